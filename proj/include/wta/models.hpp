#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wta/data.hpp"
#include "wta/numkernel.hpp"

namespace wta {

/// Maps each output neuron to its class. Every class owns at least one
/// neuron, so M >= K.
class NeuronAssignment {
 public:
  NeuronAssignment() = default;
  NeuronAssignment(std::vector<int> class_of, std::size_t classes);

  /// Consecutive blocks: neurons [k*per_class, (k+1)*per_class) -> class k.
  static NeuronAssignment blocks(std::size_t classes, std::size_t per_class);

  std::size_t neurons() const { return class_of_.size(); }
  std::size_t classes() const { return members_.size(); }
  int class_of(std::size_t neuron) const { return class_of_[neuron]; }
  const std::vector<int>& class_of() const { return class_of_; }
  /// O_k: neuron indices of class k, ascending.
  const std::vector<std::size_t>& members(std::size_t k) const { return members_[k]; }

  bool operator==(const NeuronAssignment& other) const { return class_of_ == other.class_of_ && classes() == other.classes(); }

 private:
  std::vector<int> class_of_;
  std::vector<std::vector<std::size_t>> members_;
};

/// z_j = w_j . x + b_j
struct IpWtaModel {
  Matrix weights;  // M x D
  Vector biases;   // M
  NeuronAssignment assignment;

  std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }
  void validate() const;
};

/// z_j = -1/2 (||x - c_j||^2 + d_j^2). `beta` is the softmax inverse
/// temperature used during training; it does not affect the winner.
struct EdWtaModel {
  Matrix centers;  // M x D
  Vector ed_biases;  // M, non-negative
  double beta = 1.0;
  NeuronAssignment assignment;

  std::size_t dim() const { return static_cast<std::size_t>(centers.cols()); }
  void validate() const;
};

/// Weights split as w = w+ - w-. Rows act on the augmented input [x, 1], so
/// both matrices are M x (D+1) and the last column carries the bias.
struct PnIpWtaModel {
  Matrix w_plus;
  Matrix w_minus;
  NeuronAssignment assignment;

  std::size_t dim() const { return static_cast<std::size_t>(w_plus.cols()) - 1; }
  void validate() const;
};

/// z_j = -1/2 (||x - c+_j||^2 - ||x - c-_j||^2)
struct PnEdWtaModel {
  Matrix c_plus;   // M x D
  Matrix c_minus;  // M x D
  double beta = 1.0;
  NeuronAssignment assignment;

  std::size_t dim() const { return static_cast<std::size_t>(c_plus.cols()); }
  void validate() const;
};

using AnyModel = std::variant<IpWtaModel, EdWtaModel, PnIpWtaModel, PnEdWtaModel>;

enum class Family { ip, ed, pn_ip, pn_ed };

std::string to_string(Family family);
Family parse_family(const std::string& name);
Family family_of(const AnyModel& model);
const NeuronAssignment& assignment_of(const AnyModel& model);
std::size_t dim_of(const AnyModel& model);

Vector augment(const Eigen::Ref<const Vector>& x);

ScoreVector ip_forward(const IpWtaModel& model, const Eigen::Ref<const Vector>& x);
ScoreVector ed_forward(const EdWtaModel& model, const Eigen::Ref<const Vector>& x);
/// Distance form, evaluated directly from both prototype sets.
ScoreVector pn_ed_forward(const PnEdWtaModel& model, const Eigen::Ref<const Vector>& x);
/// `x` is the augmented input [features, 1].
ScoreVector pn_ip_forward(const PnIpWtaModel& model, const Eigen::Ref<const Vector>& x);
/// Scores for raw features, augmenting where the family needs it.
ScoreVector forward(const AnyModel& model, const Eigen::Ref<const Vector>& features);

/// Class of argmax_tiebreak(z).
int predict(const ScoreVector& z, const NeuronAssignment& assignment);

IpWtaModel ed_to_ip(const EdWtaModel& model);

/// gamma_0 = 1/2 max_j (alpha^2 ||w_j||^2 + 2 alpha b_j)
double ip_to_ed_min_gamma(const IpWtaModel& model, double alpha);
/// c_j = alpha w_j, d_j = sqrt(2 gamma - alpha^2 ||w_j||^2 - 2 alpha b_j).
/// gamma defaults to gamma_0; a smaller gamma throws InvalidParameter.
EdWtaModel ip_to_ed(const IpWtaModel& model, double alpha = 1.0, std::optional<double> gamma = std::nullopt);

struct FixedPointResult {
  double alpha = 0.0;
  Vector u;
  /// E(alpha, u) after each half-step (u-step, alpha-step, ...).
  std::vector<double> energy_trace;
  int iterations = 0;
  bool converged = false;
};

struct NaturalEdFit {
  FixedPointResult fit;
  double gamma = 0.0;
  EdWtaModel model;  // biased, winner-identical to the source
};

/// Alternating minimisation of the summed squared distance between samples
/// and their winning centre c_q(x) = alpha w_q(x) + u, starting from
/// alpha = 0. ED biases are then chosen so the result keeps the source's
/// winners.
NaturalEdFit natural_ed_fit(const IpWtaModel& model, const data::Dataset& data, double tolerance = 1e-10,
                            int max_iterations = 1000);

EdWtaModel strip_ed_biases(const EdWtaModel& model);

/// w_j = c+_j - c-_j, b_j = 1/2 (||c+_j||^2 - ||c-_j||^2)
IpWtaModel pn_ed_collapse(const PnEdWtaModel& model);
/// pn_ed_collapse scaled by the trained beta, so the plain softmax of the
/// result equals the model's softmax(beta z), not just its winner.
IpWtaModel pn_ed_probability_equivalent(const PnEdWtaModel& model);
/// w_j = (w+_j - w-_j) over features, b_j from the augmented column.
IpWtaModel pn_ip_collapse(const PnIpWtaModel& model);

/// Winner-preserving IP form of any model.
IpWtaModel as_ip(const AnyModel& model);

// Persistence (see docs/model_format.md).
inline constexpr int kModelFormatVersion = 1;
std::string serialize_model(const AnyModel& model);
AnyModel deserialize_model(const std::string& text);
void save_model(const AnyModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

/// Throws DimensionError when the model's D differs from `dim`.
void require_dim(const AnyModel& model, std::size_t dim, const std::string& what);

}  // namespace wta
