#include "wta/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wta/errors.hpp"

namespace wta {

NeuronAssignment::NeuronAssignment(std::vector<int> class_of, std::size_t classes)
    : class_of_(std::move(class_of)), members_(classes) {
  if (classes == 0) throw InvalidParameter("NeuronAssignment: K must be positive");
  for (std::size_t j = 0; j < class_of_.size(); ++j) {
    const int k = class_of_[j];
    if (k < 0 || static_cast<std::size_t>(k) >= classes) {
      throw DomainError("NeuronAssignment: neuron " + std::to_string(j) + " maps to class " + std::to_string(k) +
                        ", K=" + std::to_string(classes));
    }
    members_[static_cast<std::size_t>(k)].push_back(j);
  }
  for (std::size_t k = 0; k < classes; ++k) {
    if (members_[k].empty()) throw InvalidParameter("NeuronAssignment: class " + std::to_string(k) + " has no neuron");
  }
}

NeuronAssignment NeuronAssignment::blocks(std::size_t classes, std::size_t per_class) {
  if (per_class == 0) throw InvalidParameter("NeuronAssignment: neurons per class must be positive");
  std::vector<int> class_of(classes * per_class);
  for (std::size_t j = 0; j < class_of.size(); ++j) class_of[j] = static_cast<int>(j / per_class);
  return {std::move(class_of), classes};
}

namespace {

void check_rows(Eigen::Index rows, const NeuronAssignment& a, const char* what) {
  if (static_cast<std::size_t>(rows) != a.neurons()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(rows) + " rows but assignment has " +
                         std::to_string(a.neurons()) + " neurons");
  }
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw DomainError(std::string(what) + ": non-finite parameter");
}

void check_input(std::size_t model_dim, Eigen::Index input_dim, const char* what) {
  if (static_cast<std::size_t>(input_dim) != model_dim) {
    throw DimensionError(std::string(what) + ": input has " + std::to_string(input_dim) + " features, model expects " +
                         std::to_string(model_dim));
  }
}

}  // namespace

void IpWtaModel::validate() const {
  check_rows(weights.rows(), assignment, "IpWtaModel");
  check_rows(biases.size(), assignment, "IpWtaModel biases");
  check_finite(weights, "IpWtaModel");
  if (!biases.allFinite()) throw DomainError("IpWtaModel: non-finite bias");
}

void EdWtaModel::validate() const {
  check_rows(centers.rows(), assignment, "EdWtaModel");
  check_rows(ed_biases.size(), assignment, "EdWtaModel biases");
  check_finite(centers, "EdWtaModel");
  if (!ed_biases.allFinite() || (ed_biases.array() < 0.0).any()) {
    throw DomainError("EdWtaModel: ED biases must be finite and non-negative");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidParameter("EdWtaModel: beta must be positive");
}

void PnIpWtaModel::validate() const {
  check_rows(w_plus.rows(), assignment, "PnIpWtaModel");
  check_rows(w_minus.rows(), assignment, "PnIpWtaModel");
  if (w_plus.cols() != w_minus.cols() || w_plus.cols() < 1) {
    throw DimensionError("PnIpWtaModel: w+ and w- shapes differ");
  }
  check_finite(w_plus, "PnIpWtaModel");
  check_finite(w_minus, "PnIpWtaModel");
}

void PnEdWtaModel::validate() const {
  check_rows(c_plus.rows(), assignment, "PnEdWtaModel");
  check_rows(c_minus.rows(), assignment, "PnEdWtaModel");
  if (c_plus.cols() != c_minus.cols()) throw DimensionError("PnEdWtaModel: c+ and c- shapes differ");
  check_finite(c_plus, "PnEdWtaModel");
  check_finite(c_minus, "PnEdWtaModel");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidParameter("PnEdWtaModel: beta must be positive");
}

std::string to_string(Family family) {
  switch (family) {
    case Family::ip: return "ip";
    case Family::ed: return "ed";
    case Family::pn_ip: return "pn_ip";
    case Family::pn_ed: return "pn_ed";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  if (name == "ip") return Family::ip;
  if (name == "ed") return Family::ed;
  if (name == "pn_ip") return Family::pn_ip;
  if (name == "pn_ed") return Family::pn_ed;
  throw UsageError("unknown model family '" + name + "' (expected ip, ed, pn_ip or pn_ed)");
}

Family family_of(const AnyModel& model) { return static_cast<Family>(model.index()); }

const NeuronAssignment& assignment_of(const AnyModel& model) {
  return std::visit([](const auto& m) -> const NeuronAssignment& { return m.assignment; }, model);
}

std::size_t dim_of(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

Vector augment(const Eigen::Ref<const Vector>& x) {
  Vector a(x.size() + 1);
  a.head(x.size()) = x;
  a[x.size()] = 1.0;
  return a;
}

ScoreVector ip_forward(const IpWtaModel& model, const Eigen::Ref<const Vector>& x) {
  check_input(model.dim(), x.size(), "ip_forward");
  return model.weights * x + model.biases;
}

ScoreVector ed_forward(const EdWtaModel& model, const Eigen::Ref<const Vector>& x) {
  check_input(model.dim(), x.size(), "ed_forward");
  const Vector dist = (model.centers.rowwise() - x.transpose()).rowwise().squaredNorm();
  return -0.5 * (dist + model.ed_biases.cwiseAbs2());
}

ScoreVector pn_ed_forward(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x) {
  check_input(model.dim(), x.size(), "pn_ed_forward");
  const Vector pos = (model.c_plus.rowwise() - x.transpose()).rowwise().squaredNorm();
  const Vector neg = (model.c_minus.rowwise() - x.transpose()).rowwise().squaredNorm();
  return -0.5 * (pos - neg);
}

ScoreVector pn_ip_forward(const PnIpWtaModel& model, const Eigen::Ref<const Vector>& x) {
  check_input(static_cast<std::size_t>(model.w_plus.cols()), x.size(), "pn_ip_forward");
  return model.w_plus * x - model.w_minus * x;
}

ScoreVector forward(const AnyModel& model, const Eigen::Ref<const Vector>& features) {
  switch (family_of(model)) {
    case Family::ip: return ip_forward(std::get<IpWtaModel>(model), features);
    case Family::ed: return ed_forward(std::get<EdWtaModel>(model), features);
    case Family::pn_ip: return pn_ip_forward(std::get<PnIpWtaModel>(model), augment(features));
    case Family::pn_ed: return pn_ed_forward(std::get<PnEdWtaModel>(model), features);
  }
  throw DomainError("forward: unknown family");
}

int predict(const ScoreVector& z, const NeuronAssignment& assignment) {
  if (static_cast<std::size_t>(z.size()) != assignment.neurons()) {
    throw DimensionError("predict: " + std::to_string(z.size()) + " scores for " +
                         std::to_string(assignment.neurons()) + " neurons");
  }
  return assignment.class_of(num::argmax_tiebreak(z));
}

IpWtaModel ed_to_ip(const EdWtaModel& model) {
  IpWtaModel ip;
  ip.weights = model.centers;
  ip.biases = -0.5 * (model.centers.rowwise().squaredNorm() + model.ed_biases.cwiseAbs2());
  ip.assignment = model.assignment;
  return ip;
}

double ip_to_ed_min_gamma(const IpWtaModel& model, double alpha) {
  const Vector terms = alpha * alpha * model.weights.rowwise().squaredNorm() + 2.0 * alpha * model.biases;
  return 0.5 * terms.maxCoeff();
}

EdWtaModel ip_to_ed(const IpWtaModel& model, double alpha, std::optional<double> gamma) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidParameter("ip_to_ed: alpha must be positive, got " + std::to_string(alpha));
  }
  model.validate();
  const double gamma0 = ip_to_ed_min_gamma(model, alpha);
  const double g = gamma.value_or(gamma0);
  if (g < gamma0) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "ip_to_ed: gamma " << g << " is below gamma_0 = " << gamma0;
    throw InvalidParameter(msg.str());
  }
  EdWtaModel ed;
  ed.centers = alpha * model.weights;
  const Vector radicand =
      2.0 * g - alpha * alpha * model.weights.rowwise().squaredNorm().array() - 2.0 * alpha * model.biases.array();
  // Rounding can leave the gamma_0 neuron a hair below zero.
  ed.ed_biases = radicand.cwiseMax(0.0).cwiseSqrt();
  ed.assignment = model.assignment;
  return ed;
}

NaturalEdFit natural_ed_fit(const IpWtaModel& model, const data::Dataset& data, double tolerance,
                            int max_iterations) {
  model.validate();
  if (data.size() == 0) throw DomainError("natural_ed_fit: empty dataset");
  check_input(model.dim(), static_cast<Eigen::Index>(data.dim), "natural_ed_fit");

  const auto n = static_cast<double>(data.size());
  const auto dim = static_cast<Eigen::Index>(data.dim);

  // Winner of every sample, and the sums the closed-form steps need.
  Vector sum_x = Vector::Zero(dim);
  Vector sum_w = Vector::Zero(dim);
  double sum_w_norm = 0.0;
  double sum_w_dot_x = 0.0;
  std::vector<std::size_t> winner(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.sample(i);
    const std::size_t q = num::argmax_tiebreak(ip_forward(model, x));
    winner[i] = q;
    const auto w = model.weights.row(static_cast<Eigen::Index>(q)).transpose();
    sum_x += x;
    sum_w += w;
    sum_w_norm += w.squaredNorm();
    sum_w_dot_x += w.dot(x);
  }
  if (!(sum_w_norm > 0.0)) {
    throw DegenerateError("natural_ed_fit: every winning neuron has an all-zero weight vector");
  }

  // E(alpha, u) split into a centred part and a mean-offset part:
  //   sum ||(x - xbar) - alpha (w_q - wbar)||^2 + n ||xbar - alpha wbar - u||^2
  // The centred moments are accumulated once so each energy costs O(D).
  const Vector x_bar = sum_x / n;
  const Vector w_bar = sum_w / n;
  double centred_xx = 0.0;
  double centred_xw = 0.0;
  double centred_ww = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector dx = data.sample(i) - x_bar;
    const Vector dw = model.weights.row(static_cast<Eigen::Index>(winner[i])).transpose() - w_bar;
    centred_xx += dx.squaredNorm();
    centred_xw += dx.dot(dw);
    centred_ww += dw.squaredNorm();
  }
  auto energy = [&](double alpha, const Vector& u) {
    return (centred_xx - 2.0 * alpha * centred_xw + alpha * alpha * centred_ww) +
           n * (x_bar - alpha * w_bar - u).squaredNorm();
  };

  NaturalEdFit out;
  FixedPointResult& fit = out.fit;
  fit.alpha = 0.0;
  fit.u = Vector::Zero(dim);
  for (int it = 0; it < max_iterations; ++it) {
    const Vector u_new = (sum_x - fit.alpha * sum_w) / n;
    fit.energy_trace.push_back(energy(fit.alpha, u_new));
    const double alpha_new = (sum_w_dot_x - u_new.dot(sum_w)) / sum_w_norm;
    fit.energy_trace.push_back(energy(alpha_new, u_new));

    const double du = (u_new - fit.u).cwiseAbs().maxCoeff();
    const double da = std::abs(alpha_new - fit.alpha);
    fit.u = u_new;
    fit.alpha = alpha_new;
    fit.iterations = it + 1;
    if (da < tolerance && du < tolerance) {
      fit.converged = true;
      break;
    }
  }

  if (model.assignment.neurons() > 1 && !(fit.alpha > 0.0)) {
    throw DegenerateError("natural_ed_fit: fitted alpha " + std::to_string(fit.alpha) +
                          " is not positive, winners cannot be preserved");
  }

  // c_j = alpha w_j + u. The u.x term is shared by all neurons, so winners
  // match when d_j^2 = 2 gamma - 2 alpha b_j - ||c_j||^2.
  EdWtaModel& ed = out.model;
  ed.centers = fit.alpha * model.weights;
  ed.centers.rowwise() += fit.u.transpose();
  ed.assignment = model.assignment;
  const Vector terms = ed.centers.rowwise().squaredNorm() + 2.0 * fit.alpha * model.biases;
  out.gamma = 0.5 * terms.maxCoeff();
  ed.ed_biases = (2.0 * out.gamma - terms.array()).cwiseMax(0.0).sqrt().matrix();
  return out;
}

EdWtaModel strip_ed_biases(const EdWtaModel& model) {
  EdWtaModel out = model;
  out.ed_biases.setZero();
  return out;
}

IpWtaModel pn_ed_collapse(const PnEdWtaModel& model) {
  IpWtaModel ip;
  ip.weights = model.c_plus - model.c_minus;
  ip.biases = 0.5 * (model.c_minus.rowwise().squaredNorm() - model.c_plus.rowwise().squaredNorm());
  ip.assignment = model.assignment;
  return ip;
}

IpWtaModel pn_ed_probability_equivalent(const PnEdWtaModel& model) {
  IpWtaModel ip = pn_ed_collapse(model);
  ip.weights *= model.beta;
  ip.biases *= model.beta;
  return ip;
}

IpWtaModel pn_ip_collapse(const PnIpWtaModel& model) {
  const Matrix w = model.w_plus - model.w_minus;
  const auto d = static_cast<Eigen::Index>(model.dim());
  IpWtaModel ip;
  ip.weights = w.leftCols(d);
  ip.biases = w.col(d);
  ip.assignment = model.assignment;
  return ip;
}

IpWtaModel as_ip(const AnyModel& model) {
  switch (family_of(model)) {
    case Family::ip: return std::get<IpWtaModel>(model);
    case Family::ed: return ed_to_ip(std::get<EdWtaModel>(model));
    case Family::pn_ip: return pn_ip_collapse(std::get<PnIpWtaModel>(model));
    case Family::pn_ed: return pn_ed_collapse(std::get<PnEdWtaModel>(model));
  }
  throw DomainError("as_ip: unknown family");
}

void require_dim(const AnyModel& model, std::size_t dim, const std::string& what) {
  if (dim_of(model) != dim) {
    throw DimensionError(what + ": model has D=" + std::to_string(dim_of(model)) + " but data has D=" +
                         std::to_string(dim));
  }
}

}  // namespace wta
