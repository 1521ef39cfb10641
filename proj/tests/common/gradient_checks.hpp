#pragma once

// Central finite-difference checks of the SGD updates. Each check builds a
// random instance, applies one step at learning rate mu and compares
// -(delta / mu) with the numerical gradient of the CCE loss in which the
// target distribution tau is frozen at its pre-update value.

#include <algorithm>
#include <cmath>
#include <functional>

#include "wta/adversarial.hpp"
#include "wta/models.hpp"
#include "wta/numkernel.hpp"
#include "wta/train.hpp"

namespace wta::checks {

inline constexpr double kFdStep = 1e-5;

// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double rel_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline double frozen_loss(const ScoreVector& z, double beta, const ProbabilityVector& tau) {
  return train::cce_loss(num::stable_softmax(z, beta), tau);
}

// Numerical gradient of f with respect to every entry of `p`.
inline Matrix fd_gradient(Matrix& p, const std::function<double()>& f, double h = kFdStep) {
  Matrix g(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p.data()[i];
    p.data()[i] = keep + h;
    const double up = f();
    p.data()[i] = keep - h;
    const double down = f();
    p.data()[i] = keep;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double fd_scalar(double& p, const std::function<double()>& f, double h = kFdStep) {
  const double keep = p;
  p = keep + h;
  const double up = f();
  p = keep - h;
  const double down = f();
  p = keep;
  return (up - down) / (2.0 * h);
}

inline Matrix random_matrix(num::SeededStream& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
  return m;
}

inline Vector random_input(num::SeededStream& rng, Eigen::Index d) {
  Vector x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.uniform();
  return x;
}

struct GradientErrors {
  double weights = 0.0;  // W, centers, or the routed rows of both signed matrices
  double beta = 0.0;
  /// Largest change of a parameter row that the routing says must not move.
  double unrouted_change = 0.0;

  double worst() const { return std::max(weights, beta); }
};

inline constexpr Eigen::Index kM = 4;
inline constexpr Eigen::Index kD = 5;
inline constexpr std::size_t kK = 2;

// Small enough that the beta floor never clamps a checked step.
inline constexpr double kCheckRate = 1e-2;

inline NeuronAssignment check_assignment() { return NeuronAssignment::blocks(kK, kM / kK); }

inline GradientErrors check_ip_step(num::SeededStream& rng, double mu = kCheckRate) {
  const auto assignment = check_assignment();
  Matrix w = random_matrix(rng, kM, kD + 1, 1.0);
  const Vector x = augment(random_input(rng, kD));
  const int label = static_cast<int>(rng.below(kK));
  Matrix updated = w;
  const auto r = train::ip_step(updated, assignment, x, label, mu);
  const Matrix fd = fd_gradient(w, [&] { return frozen_loss(w * x, 1.0, r.tau); });
  return {rel_error(-(updated - w) / mu, fd), 0.0, 0.0};
}

inline GradientErrors check_ed_step(num::SeededStream& rng, double mu = kCheckRate) {
  EdWtaModel m{random_matrix(rng, kM, kD, 0.5), Vector::Zero(kM), 0.5 + rng.uniform(), check_assignment()};
  const Vector x = random_input(rng, kD);
  const int label = static_cast<int>(rng.below(kK));
  EdWtaModel updated = m;
  const auto r = train::ed_step(updated, x, label, mu);
  auto loss = [&] { return frozen_loss(ed_forward(m, x), m.beta, r.tau); };
  GradientErrors e;
  e.weights = rel_error(-(updated.centers - m.centers) / mu, fd_gradient(m.centers, loss));
  const double beta_fd = fd_scalar(m.beta, loss);
  e.beta = rel_error(Matrix::Constant(1, 1, -(updated.beta - m.beta) / mu), Matrix::Constant(1, 1, beta_fd));
  return e;
}

// Signed families move one matrix per row: w+/c+ for the label's own
// neurons, w-/c- for the rest. Stacks the routed rows of -delta/mu and of the
// finite-difference gradient, and records any movement of the other row.
// The comparison is over the whole stacked gradient, as for the unsigned
// families; a single row with tau_j ~ y_j has a near-zero gradient whose
// relative error is pure finite-difference noise.
inline void compare_routed(const NeuronAssignment& assignment, int label, double mu, const Matrix& plus,
                           const Matrix& minus, const Matrix& plus_after, const Matrix& minus_after,
                           const Matrix& fd_plus, const Matrix& fd_minus, GradientErrors& e) {
  Matrix step(plus.rows(), plus.cols());
  Matrix fd(plus.rows(), plus.cols());
  for (Eigen::Index j = 0; j < plus.rows(); ++j) {
    const bool own = assignment.class_of(static_cast<std::size_t>(j)) == label;
    step.row(j) = own ? (plus_after.row(j) - plus.row(j)) / -mu : (minus_after.row(j) - minus.row(j)) / -mu;
    fd.row(j) = own ? fd_plus.row(j) : fd_minus.row(j);
    const double moved = own ? (minus_after.row(j) - minus.row(j)).cwiseAbs().maxCoeff()
                             : (plus_after.row(j) - plus.row(j)).cwiseAbs().maxCoeff();
    e.unrouted_change = std::max(e.unrouted_change, moved);
  }
  e.weights = rel_error(step, fd);
}

inline GradientErrors check_pn_ip_step(num::SeededStream& rng, double mu = kCheckRate) {
  const auto assignment = check_assignment();
  PnIpWtaModel m{random_matrix(rng, kM, kD + 1, 1.0), random_matrix(rng, kM, kD + 1, 1.0), assignment};
  const Vector x = augment(random_input(rng, kD));
  const int label = static_cast<int>(rng.below(kK));
  PnIpWtaModel updated = m;
  const auto r = train::pn_ip_step(updated, x, label, mu);
  auto loss = [&] { return frozen_loss(pn_ip_forward(m, x), 1.0, r.tau); };
  const PnIpWtaModel probe = m;
  const Matrix g_plus = fd_gradient(m.w_plus, loss);
  const Matrix g_minus = fd_gradient(m.w_minus, loss);
  GradientErrors e;
  compare_routed(assignment, label, mu, probe.w_plus, probe.w_minus, updated.w_plus, updated.w_minus, g_plus, g_minus,
                 e);
  return e;
}

inline GradientErrors check_pn_ed_step(num::SeededStream& rng, double mu = kCheckRate) {
  const auto assignment = check_assignment();
  PnEdWtaModel m{random_matrix(rng, kM, kD, 0.5), random_matrix(rng, kM, kD, 0.5), 0.5 + rng.uniform(), assignment};
  const Vector x = random_input(rng, kD);
  const int label = static_cast<int>(rng.below(kK));
  PnEdWtaModel updated = m;
  const auto r = train::pn_ed_step(updated, x, label, mu);
  auto loss = [&] { return frozen_loss(pn_ed_forward(m, x), m.beta, r.tau); };
  const PnEdWtaModel probe = m;
  const Matrix g_plus = fd_gradient(m.c_plus, loss);
  const Matrix g_minus = fd_gradient(m.c_minus, loss);
  GradientErrors e;
  compare_routed(assignment, label, mu, probe.c_plus, probe.c_minus, updated.c_plus, updated.c_minus, g_plus, g_minus,
                 e);
  const double beta_fd = fd_scalar(m.beta, loss);
  e.beta = rel_error(Matrix::Constant(1, 1, -(updated.beta - m.beta) / mu), Matrix::Constant(1, 1, beta_fd));
  return e;
}

// Gradient of ln P^IP(target | x) against finite differences in x.
inline double check_input_gradient(num::SeededStream& rng) {
  IpWtaModel m{random_matrix(rng, kM, kD, 1.0), random_matrix(rng, kM, 1, 1.0).col(0), check_assignment()};
  Vector x = random_input(rng, kD);
  const int target = static_cast<int>(rng.below(kK));
  const Vector analytic = adversarial::input_gradient(m, x, target);
  Matrix xm = x;
  const Matrix fd = fd_gradient(xm, [&] { return adversarial::log_p_ip(m, xm.col(0), target); });
  return rel_error(analytic, fd);
}

}  // namespace wta::checks
