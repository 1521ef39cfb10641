#include "wta/openset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "wta/errors.hpp"
#include "wta/parallel.hpp"

namespace wta::openset {

std::string to_string(Measure m) { return m == Measure::ip ? "ip" : "plus_ed"; }

Measure parse_measure(const std::string& name) {
  if (name == "ip") return Measure::ip;
  if (name == "plus_ed") return Measure::plus_ed;
  throw UsageError("unknown confidence measure '" + name + "' (expected ip or plus_ed)");
}

namespace {

// sum_{j in O_k} e^{v_j} / sum_i e^{v_i}, max-subtracted.
double class_share(const Vector& v, const NeuronAssignment& assignment, int k) {
  const double top = v.maxCoeff();
  const Vector e = (v.array() - top).exp().matrix();
  double own = 0.0;
  for (std::size_t j : assignment.members(static_cast<std::size_t>(k))) own += e[static_cast<Eigen::Index>(j)];
  return std::clamp(own / e.sum(), 0.0, 1.0);
}

Vector plus_ed_logits(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x) {
  return -0.5 * model.beta * (model.c_plus.rowwise() - x.transpose()).rowwise().squaredNorm();
}

}  // namespace

double confidence_ip(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x) {
  const ScoreVector z = pn_ed_forward(model, x);
  return class_share(model.beta * z, model.assignment, predict(z, model.assignment));
}

double confidence_ip(const IpWtaModel& model, const Eigen::Ref<const Vector>& x) {
  const ScoreVector z = ip_forward(model, x);
  return class_share(z, model.assignment, predict(z, model.assignment));
}

double confidence_plus_ed(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x) {
  const int k = predict(pn_ed_forward(model, x), model.assignment);
  return class_share(plus_ed_logits(model, x), model.assignment, k);
}

ConfidenceReport confidence(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x) {
  const ScoreVector z = pn_ed_forward(model, x);
  ConfidenceReport r;
  r.winning_neuron = num::argmax_tiebreak(z);
  r.predicted_class = model.assignment.class_of(r.winning_neuron);
  r.p_ip = class_share(model.beta * z, model.assignment, r.predicted_class);
  r.p_plus_ed = class_share(plus_ed_logits(model, x), model.assignment, r.predicted_class);
  return r;
}

std::vector<ConfidenceReport> confidences(const PnEdWtaModel& model, const data::Dataset& data, std::size_t threads) {
  require_dim(model, data.dim, "confidences");
  std::vector<ConfidenceReport> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = confidence(model, data.sample(i));
  });
  return out;
}

std::vector<double> select_measure(std::span<const ConfidenceReport> reports, Measure measure) {
  std::vector<double> out;
  out.reserve(reports.size());
  for (const auto& r : reports) out.push_back(measure == Measure::ip ? r.p_ip : r.p_plus_ed);
  return out;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 100; ++i) t.push_back(i / 100.0);
  return t;
}

ThresholdSweep sweep_from_confidences(std::span<const double> in_conf, std::span<const double> out_conf,
                                      std::span<const double> thresholds) {
  if (in_conf.empty() || out_conf.empty()) throw DomainError("threshold sweep: in-set and out-set must be non-empty");
  if (thresholds.empty()) throw DomainError("threshold sweep: no thresholds");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw DomainError("threshold sweep: thresholds must be ascending");
  }
  std::vector<double> in_sorted(in_conf.begin(), in_conf.end());
  std::vector<double> out_sorted(out_conf.begin(), out_conf.end());
  std::sort(in_sorted.begin(), in_sorted.end());
  std::sort(out_sorted.begin(), out_sorted.end());

  ThresholdSweep s;
  s.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) {
    const auto in_below = std::lower_bound(in_sorted.begin(), in_sorted.end(), t) - in_sorted.begin();
    const auto out_below = std::lower_bound(out_sorted.begin(), out_sorted.end(), t) - out_sorted.begin();
    const auto n_in = static_cast<std::ptrdiff_t>(in_sorted.size());
    s.acceptance_rate.push_back(static_cast<double>(n_in - in_below) / static_cast<double>(n_in));
    s.rejection_rate.push_back(static_cast<double>(out_below) / static_cast<double>(out_sorted.size()));
  }
  return s;
}

ThresholdSweep threshold_sweep(const PnEdWtaModel& model, const data::Dataset& in_set, const data::Dataset& out_set,
                               Measure measure, std::span<const double> thresholds, std::size_t threads) {
  if (in_set.size() == 0 || out_set.size() == 0) {
    throw DomainError("threshold_sweep: in-set and out-set must be non-empty");
  }
  const auto in_conf = select_measure(confidences(model, in_set, threads), measure);
  const auto out_conf = select_measure(confidences(model, out_set, threads), measure);
  return sweep_from_confidences(in_conf, out_conf, thresholds);
}

std::size_t best_index(const ThresholdSweep& sweep) {
  if (sweep.thresholds.empty()) throw DomainError("best_threshold: empty sweep");
  std::size_t best = 0;
  double best_product = -1.0;
  for (std::size_t i = 0; i < sweep.thresholds.size(); ++i) {
    const double p = sweep.acceptance_rate[i] * sweep.rejection_rate[i];
    if (p > best_product) {
      best_product = p;
      best = i;
    }
  }
  return best;
}

double best_threshold(const ThresholdSweep& sweep) { return sweep.thresholds[best_index(sweep)]; }

void write_sweep_csv(const ThresholdSweep& sweep, std::ostream& out) {
  out << "threshold,acceptance_rate,rejection_rate\n";
  for (std::size_t i = 0; i < sweep.thresholds.size(); ++i) {
    out << std::defaultfloat << std::setprecision(10) << sweep.thresholds[i] << ',' << std::fixed
        << std::setprecision(6) << sweep.acceptance_rate[i] << ',' << sweep.rejection_rate[i] << '\n';
  }
}

void write_sweep_csv(const ThresholdSweep& sweep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_sweep_csv(sweep, out);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace wta::openset
