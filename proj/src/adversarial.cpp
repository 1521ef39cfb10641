#include "wta/adversarial.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "wta/errors.hpp"
#include "wta/parallel.hpp"

namespace wta::adversarial {

void AdversarialConfig::validate() const {
  if (!(step_size > 0.0)) throw InvalidParameter("adversarial: step_size must be positive");
  if (max_iters < 0) throw InvalidParameter("adversarial: max_iters must be non-negative");
  if (!(target_confidence > 0.0 && target_confidence < 1.0)) {
    throw InvalidParameter("adversarial: target_confidence must lie in (0, 1)");
  }
  if (!(clip_lo < clip_hi)) throw InvalidParameter("adversarial: empty clip range");
}

namespace {

void check_target(const IpWtaModel& model, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= model.assignment.classes()) {
    throw DomainError("adversarial: target class " + std::to_string(target) + " outside 0.." +
                      std::to_string(model.assignment.classes() - 1));
  }
}

struct TargetState {
  double log_p;
  Vector gradient;
};

TargetState evaluate_target(const IpWtaModel& model, const Eigen::Ref<const Vector>& x, int target, bool with_grad) {
  const ScoreVector z = ip_forward(model, x);
  const auto& own = model.assignment.members(static_cast<std::size_t>(target));
  const double top = z.maxCoeff();
  double own_top = -std::numeric_limits<double>::infinity();
  for (std::size_t j : own) own_top = std::max(own_top, z[static_cast<Eigen::Index>(j)]);

  // Separate max-subtraction keeps the restricted softmax finite even when
  // the target class is far behind.
  const Vector e = (z.array() - top).exp().matrix();
  const double all = e.sum();
  double own_sum = 0.0;
  for (std::size_t j : own) own_sum += std::exp(z[static_cast<Eigen::Index>(j)] - own_top);

  TargetState s{(own_top + std::log(own_sum)) - (top + std::log(all)), {}};
  if (with_grad) {
    Vector coef = -e / all;
    for (std::size_t j : own) {
      coef[static_cast<Eigen::Index>(j)] += std::exp(z[static_cast<Eigen::Index>(j)] - own_top) / own_sum;
    }
    s.gradient = model.weights.transpose() * coef;
  }
  return s;
}

}  // namespace

double log_p_ip(const IpWtaModel& model, const Eigen::Ref<const Vector>& x, int target) {
  check_target(model, target);
  return evaluate_target(model, x, target, false).log_p;
}

Vector input_gradient(const IpWtaModel& model, const Eigen::Ref<const Vector>& x, int target) {
  check_target(model, target);
  return evaluate_target(model, x, target, true).gradient;
}

AdversarialSample ascend(const IpWtaModel& model, const Eigen::Ref<const Vector>& start, int target,
                         const AdversarialConfig& config) {
  check_target(model, target);
  AdversarialSample s;
  s.target_label = target;
  s.features = start;
  const double goal = std::log(config.target_confidence);
  TargetState state = evaluate_target(model, s.features, target, true);
  while (state.log_p < goal && s.iterations < config.max_iters) {
    s.features = (s.features + config.step_size * state.gradient).cwiseMax(config.clip_lo).cwiseMin(config.clip_hi);
    ++s.iterations;
    state = evaluate_target(model, s.features, target, true);
  }
  s.achieved_p_ip = std::exp(state.log_p);
  s.converged = state.log_p >= goal;
  return s;
}

AdversarialSet gen_type1(const IpWtaModel& model, std::size_t count, const AdversarialConfig& config,
                         std::size_t threads) {
  config.validate();
  model.validate();
  const std::size_t classes = model.assignment.classes();
  AdversarialSet out(count);
  parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      num::SeededStream rng(num::derive_seed(config.seed, i));
      Vector noise(static_cast<Eigen::Index>(model.dim()));
      for (Eigen::Index p = 0; p < noise.size(); ++p) {
        noise[p] = config.clip_lo + (config.clip_hi - config.clip_lo) * rng.uniform();
      }
      out[i] = ascend(model, noise, static_cast<int>(i % classes), config);
      out[i].source_index = static_cast<int>(i);
      out[i].source_label = kNoiseSource;
    }
  });
  return out;
}

AdversarialSet gen_type2(const IpWtaModel& model, const data::Dataset& test_set, const AdversarialConfig& config,
                         std::optional<std::size_t> limit, std::size_t threads) {
  config.validate();
  model.validate();
  if (!test_set.labeled()) throw DomainError("gen_type2: test set must be labeled");
  require_dim(model, test_set.dim, "gen_type2");
  const std::size_t classes = model.assignment.classes();
  const std::size_t sources = std::min(test_set.size(), limit.value_or(test_set.size()));
  const std::size_t per_source = classes - 1;
  AdversarialSet out(sources * per_source);
  parallel_for(sources, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const int label = test_set.labels[i];
      std::size_t slot = i * per_source;
      for (std::size_t t = 0; t < classes; ++t) {
        if (static_cast<int>(t) == label) continue;
        auto s = ascend(model, test_set.sample(i), static_cast<int>(t), config);
        s.source_index = static_cast<int>(i);
        s.source_label = label;
        out[slot++] = std::move(s);
      }
    }
  });
  return out;
}

data::Dataset to_dataset(const AdversarialSet& set, std::size_t dim, std::size_t classes) {
  data::Dataset ds;
  ds.name = "adversarial";
  ds.dim = dim;
  ds.classes = classes;
  ds.features.resize(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(dim));
  ds.labels.assign(set.size(), data::kUnlabeled);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (static_cast<std::size_t>(set[i].features.size()) != dim) throw DimensionError("to_dataset: dimension mismatch");
    ds.features.row(static_cast<Eigen::Index>(i)) = set[i].features.transpose();
  }
  return ds;
}

void write_adversarial(const AdversarialSet& set, std::size_t rows, std::size_t cols,
                       const std::filesystem::path& idx_path, const std::filesystem::path& manifest_path) {
  std::vector<data::GrayImage> images;
  images.reserve(set.size());
  for (const auto& s : set) images.push_back(data::to_image(s.features, rows, cols));
  data::write_idx_images(idx_path, images);

  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << "source_index,source_label,target_label,achieved_p_ip,iterations\n";
  out << std::setprecision(10);
  for (const auto& s : set) {
    out << s.source_index << ',';
    if (s.source_label == kNoiseSource) {
      out << "noise";
    } else {
      out << s.source_label;
    }
    out << ',' << s.target_label << ',' << s.achieved_p_ip << ',' << s.iterations << '\n';
  }
  if (!out) throw IoError("write failed: " + manifest_path.string());
}

}  // namespace wta::adversarial
