#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wta/data.hpp"
#include "wta/models.hpp"
#include "wta/numkernel.hpp"

namespace wta::train {

enum class InitMethod { random, kmeans };

std::string to_string(InitMethod init);
InitMethod parse_init(const std::string& name);

struct TrainConfig {
  int epochs = 200;
  double lr0 = 0.1;
  /// Multiplier applied to the learning rate after every epoch.
  double lr_decay = 0.5;
  std::size_t neurons_per_class = 6;
  InitMethod init = InitMethod::kmeans;
  /// Initial softmax inverse temperature for the ED families; empty means
  /// 1 / mean|z| over the first 256 samples (floored at 1e-3).
  std::optional<double> beta0;
  /// Std-dev of the Gaussian noise separating c- from c+ at start.
  double noise_sigma = 0.01;
  std::uint64_t shuffle_seed = 1;
  std::uint64_t init_seed = 2;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;            // mean CCE loss over the epoch
  double train_accuracy = 0.0;  // online: prediction made before each update
  double mu = 0.0;
  double beta = 1.0;
  /// True when the epoch left every parameter unchanged.
  bool frozen = false;
};

using EpochCallback = std::function<void(const EpochStats&)>;

template <class Model>
struct Trained {
  Model model;
  std::vector<EpochStats> stats;
};

inline constexpr double kMinBeta = 1e-6;
inline constexpr double kMinLogArg = 1e-300;

// ---- initialisation -------------------------------------------------------

struct KMeansResult {
  Matrix centers;
  std::vector<std::size_t> labels;
  /// Within-cluster SSE at every assignment step.
  std::vector<double> sse_trace;
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment is
/// stable or `max_iterations` is reached. Empty clusters are re-seeded from
/// the point farthest from its centre.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, int max_iterations = 300);

struct CenterInit {
  Matrix centers;  // M x D, class blocks in order
  NeuronAssignment assignment;
};

CenterInit init_centers(const data::Dataset& data, const TrainConfig& config);

/// c- = c+ + N(0, sigma^2) elementwise.
Matrix init_negative(const Matrix& c_plus, double sigma, std::uint64_t seed);

// ---- loss -------------------------------------------------------------------

/// Softmax of beta*z restricted to the neurons of `label`; zero elsewhere.
ProbabilityVector cce_target(const ScoreVector& z, double beta, int label, const NeuronAssignment& assignment);

/// -sum_j tau_j ln y_j with y clamped below at 1e-300.
double cce_loss(const ProbabilityVector& y, const ProbabilityVector& tau);

double lr_schedule(double lr0, double lr_decay, int epoch);

// ---- single SGD steps ---------------------------------------------------------
// Each applies one update for sample (x, label) at learning rate mu and
// returns the quantities computed before the update.

struct StepResult {
  ScoreVector z;
  ProbabilityVector y;
  ProbabilityVector tau;
  double loss = 0.0;
  bool correct = false;
};

/// `weights` is M x (D+1) acting on the augmented input `x_aug`.
StepResult ip_step(Matrix& weights, const NeuronAssignment& assignment, const Vector& x_aug, int label, double mu);
StepResult ed_step(EdWtaModel& model, const Eigen::Ref<const Vector>& x, int label, double mu);
StepResult pn_ip_step(PnIpWtaModel& model, const Vector& x_aug, int label, double mu);
StepResult pn_ed_step(PnEdWtaModel& model, const Eigen::Ref<const Vector>& x, int label, double mu);

// ---- trainers ---------------------------------------------------------------

Trained<IpWtaModel> train_ip_wta(const data::Dataset& data, const TrainConfig& config,
                                 const EpochCallback& on_epoch = {});
Trained<EdWtaModel> train_ed_wta(const data::Dataset& data, const TrainConfig& config,
                                 const EpochCallback& on_epoch = {});
/// Continues from `initial` with its ED biases dropped.
Trained<EdWtaModel> train_ed_wta(const data::Dataset& data, const TrainConfig& config, EdWtaModel initial,
                                 const EpochCallback& on_epoch = {});
Trained<PnIpWtaModel> train_pn_ip_wta(const data::Dataset& data, const TrainConfig& config,
                                      const EpochCallback& on_epoch = {});
Trained<PnEdWtaModel> train_pn_ed_wta(const data::Dataset& data, const TrainConfig& config,
                                      const EpochCallback& on_epoch = {});
Trained<PnEdWtaModel> train_pn_ed_wta(const data::Dataset& data, const TrainConfig& config, PnEdWtaModel initial,
                                      const EpochCallback& on_epoch = {});

Trained<AnyModel> train(Family family, const data::Dataset& data, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

/// 1 / mean|z| over the first `samples` inputs, floored at 1e-3.
double auto_beta(const data::Dataset& data, const std::function<ScoreVector(const Eigen::Ref<const Vector>&)>& scores,
                 std::size_t samples = 256);

// ---- evaluation and model selection ----------------------------------------------

struct EvalReport {
  std::size_t samples = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

EvalReport evaluate(const AnyModel& model, const data::Dataset& data, std::size_t threads = 1);

struct CrossValidation {
  double chosen_lr0 = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_accuracy;
};

std::vector<double> default_lr_grid();

/// Stratified k-fold selection of lr0. Each fold trains for `cv_epochs`;
/// a diverging run scores zero. Ties go to the smaller learning rate.
CrossValidation cross_validate_lr(Family family, const data::Dataset& data, const TrainConfig& config,
                                  std::vector<double> grid, int cv_epochs, std::size_t folds = 5);

void write_stats_csv(const std::vector<EpochStats>& stats, const std::string& path);

}  // namespace wta::train
