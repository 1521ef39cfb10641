#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wta/data.hpp"
#include "wta/models.hpp"

namespace wta::openset {

struct ConfidenceReport {
  int predicted_class = 0;
  std::size_t winning_neuron = 0;
  double p_ip = 0.0;
  double p_plus_ed = 0.0;
};

enum class Measure { ip, plus_ed };

std::string to_string(Measure m);
Measure parse_measure(const std::string& name);

/// Class-level softmax of beta z at the predicted class, i.e. the trained
/// network's own probability.
double confidence_ip(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x);
/// Same quantity for an inner-product model; scores z = Wx + b.
double confidence_ip(const IpWtaModel& model, const Eigen::Ref<const Vector>& x);
/// Class-level softmax of -(beta/2)||x - c+_i||^2 at the predicted class.
double confidence_plus_ed(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x);

ConfidenceReport confidence(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x);

/// Both measures for every sample of `data`.
std::vector<ConfidenceReport> confidences(const PnEdWtaModel& model, const data::Dataset& data,
                                          std::size_t threads = 1);
std::vector<double> select_measure(std::span<const ConfidenceReport> reports, Measure measure);

struct ThresholdSweep {
  std::vector<double> thresholds;
  /// Fraction of in-set samples with confidence >= threshold.
  std::vector<double> acceptance_rate;
  /// Fraction of out-set samples with confidence < threshold.
  std::vector<double> rejection_rate;
};

/// 0.00, 0.01, ..., 1.00
std::vector<double> default_thresholds();

ThresholdSweep sweep_from_confidences(std::span<const double> in_conf, std::span<const double> out_conf,
                                      std::span<const double> thresholds);

ThresholdSweep threshold_sweep(const PnEdWtaModel& model, const data::Dataset& in_set, const data::Dataset& out_set,
                               Measure measure, std::span<const double> thresholds, std::size_t threads = 1);

/// Index maximising acceptance * rejection; ties go to the smaller threshold.
std::size_t best_index(const ThresholdSweep& sweep);
double best_threshold(const ThresholdSweep& sweep);

/// Header `threshold,acceptance_rate,rejection_rate`, rates with 6 decimals.
void write_sweep_csv(const ThresholdSweep& sweep, std::ostream& out);
void write_sweep_csv(const ThresholdSweep& sweep, const std::string& path);

}  // namespace wta::openset
