#include "wta/numkernel.hpp"

#include <cmath>
#include <string>

#include "wta/errors.hpp"

namespace wta::num {

void require_finite(const Eigen::Ref<const Vector>& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw DomainError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

ProbabilityVector stable_softmax(const ScoreVector& z, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw InvalidParameter("stable_softmax: beta must be positive and finite, got " + std::to_string(beta));
  }
  if (z.size() == 0) throw DomainError("stable_softmax: empty score vector");
  require_finite(z, "stable_softmax");
  const Vector scaled = beta * z;
  const double top = scaled.maxCoeff();
  Vector y = (scaled.array() - top).exp().matrix();
  y /= y.sum();
  return y;
}

double log_sum_exp(const Vector& v) {
  if (v.size() == 0) throw DomainError("log_sum_exp: empty vector");
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

double squared_euclidean(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("squared_euclidean: length " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  const Eigen::Map<const Vector> a(u.data(), static_cast<Eigen::Index>(u.size()));
  const Eigen::Map<const Vector> b(v.data(), static_cast<Eigen::Index>(v.size()));
  return (a - b).squaredNorm();
}

double squared_euclidean(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  if (u.size() != v.size()) {
    throw DimensionError("squared_euclidean: length " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  return (u - v).squaredNorm();
}

std::size_t argmax_tiebreak(std::span<const double> v) {
  if (v.empty()) throw DomainError("argmax_tiebreak: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::size_t argmax_tiebreak(const Eigen::Ref<const Vector>& v) {
  return argmax_tiebreak(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

std::size_t argmin_tiebreak(std::span<const double> v) {
  if (v.empty()) throw DomainError("argmin_tiebreak: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

std::size_t argmin_tiebreak(const Eigen::Ref<const Vector>& v) {
  return argmin_tiebreak(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

SeededStream::SeededStream(std::uint64_t seed) : engine_(seed) {}

double SeededStream::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededStream::gaussian() { return normal_(engine_); }

std::size_t SeededStream::below(std::size_t n) {
  if (n == 0) throw DomainError("SeededStream::below: n must be positive");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace wta::num
