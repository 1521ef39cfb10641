#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "wta/data.hpp"
#include "wta/models.hpp"

namespace wta::adversarial {

struct AdversarialConfig {
  double step_size = 0.1;
  int max_iters = 500;
  /// Ascent stops once the target class probability reaches this value.
  double target_confidence = 0.99;
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

inline constexpr int kNoiseSource = -1;

struct AdversarialSample {
  Vector features;
  int source_index = 0;
  int source_label = kNoiseSource;
  int target_label = 0;
  double achieved_p_ip = 0.0;
  int iterations = 0;
  bool converged = false;
};

using AdversarialSet = std::vector<AdversarialSample>;

/// ln of the target class's share of softmax(z), z = Wx + b.
double log_p_ip(const IpWtaModel& model, const Eigen::Ref<const Vector>& x, int target);

/// Gradient of log_p_ip with respect to x:
///   sum_{j in O_t} y'_j w_j - sum_i y_i w_i
/// with y = softmax(z) and y' the softmax restricted to O_t.
Vector input_gradient(const IpWtaModel& model, const Eigen::Ref<const Vector>& x, int target);

/// Clipped gradient ascent on log_p_ip from `start`.
AdversarialSample ascend(const IpWtaModel& model, const Eigen::Ref<const Vector>& start, int target,
                         const AdversarialConfig& config);

/// `count` uniform-noise images, targets assigned round-robin over classes.
AdversarialSet gen_type1(const IpWtaModel& model, std::size_t count, const AdversarialConfig& config,
                         std::size_t threads = 1);

/// Every (test image, wrong class) pair, ordered by (source index, target).
/// `limit` caps the number of source images used.
AdversarialSet gen_type2(const IpWtaModel& model, const data::Dataset& test_set, const AdversarialConfig& config,
                         std::optional<std::size_t> limit = std::nullopt, std::size_t threads = 1);

/// Unlabeled dataset view of the generated samples.
data::Dataset to_dataset(const AdversarialSet& set, std::size_t dim, std::size_t classes);

/// IDX image file (features scaled back to bytes) plus a CSV manifest
/// `source_index,source_label,target_label,achieved_p_ip,iterations`.
void write_adversarial(const AdversarialSet& set, std::size_t rows, std::size_t cols,
                       const std::filesystem::path& idx_path, const std::filesystem::path& manifest_path);

}  // namespace wta::adversarial
