#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Core>

namespace wta {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Neuron pre-activations z_1..z_M.
using ScoreVector = Vector;
// Softmax output; non-negative and sums to one.
using ProbabilityVector = Vector;

namespace num {

/// exp(beta*z_j) / sum_i exp(beta*z_i), computed after subtracting
/// max_j(beta*z_j). Throws DomainError naming the first non-finite entry and
/// InvalidParameter for beta <= 0.
ProbabilityVector stable_softmax(const ScoreVector& z, double beta = 1.0);

/// log(sum_i exp(v_i)) with max-subtraction.
double log_sum_exp(const Vector& v);

double squared_euclidean(std::span<const double> u, std::span<const double> v);
double squared_euclidean(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

// Smallest index attaining the extremum. Empty input throws DomainError.
std::size_t argmax_tiebreak(std::span<const double> v);
std::size_t argmax_tiebreak(const Eigen::Ref<const Vector>& v);
std::size_t argmin_tiebreak(std::span<const double> v);
std::size_t argmin_tiebreak(const Eigen::Ref<const Vector>& v);

void require_finite(const Eigen::Ref<const Vector>& v, const char* what);

/// Reproducible pseudo-random stream. Same seed gives the same sequence
/// within one build. Not thread-safe; give each worker its own stream.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed);

  /// Uniform in [0, 1).
  double uniform();
  double gaussian();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Derives an independent seed for sub-stream `index` of `seed` (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace num
}  // namespace wta
