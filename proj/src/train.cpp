#include "wta/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "wta/errors.hpp"
#include "wta/parallel.hpp"

namespace wta::train {

std::string to_string(InitMethod init) { return init == InitMethod::random ? "random" : "kmeans"; }

InitMethod parse_init(const std::string& name) {
  if (name == "random") return InitMethod::random;
  if (name == "kmeans") return InitMethod::kmeans;
  throw UsageError("unknown init method '" + name + "' (expected random or kmeans)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidParameter("epochs must be at least 1");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw InvalidParameter("lr0 must be positive");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) throw InvalidParameter("lr_decay must lie in (0, 1]");
  if (neurons_per_class < 1) throw InvalidParameter("neurons_per_class must be at least 1");
  if (beta0 && !(*beta0 > 0.0)) throw InvalidParameter("beta0 must be positive");
  if (!(noise_sigma >= 0.0)) throw InvalidParameter("noise_sigma must be non-negative");
}

// ---- k-means ---------------------------------------------------------------

namespace {

std::size_t count_distinct_rows(const Matrix& points, std::size_t enough) {
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < points.rows() && seen.size() < enough; ++i) {
    seen.emplace(points.row(i).data(), points.row(i).data() + points.cols());
  }
  return seen.size();
}

// Squared distances of every point to every centre, N x k.
Matrix pairwise_sq_dist(const Matrix& points, const Vector& point_norms, const Matrix& centers) {
  Matrix d = -2.0 * points * centers.transpose();
  d.colwise() += point_norms;
  d.rowwise() += centers.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, int max_iterations) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 1) throw InvalidParameter("kmeans: k must be at least 1");
  if (n == 0) throw DomainError("kmeans: no points");
  if (count_distinct_rows(points, k) < k) {
    throw DegenerateError("kmeans: k=" + std::to_string(k) + " exceeds the number of distinct points");
  }

  num::SeededStream rng(seed);
  const Vector norms = points.rowwise().squaredNorm();
  const auto dim = points.cols();

  // k-means++ seeding.
  Matrix centers(static_cast<Eigen::Index>(k), dim);
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(n)));
  Vector closest = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = closest.sum();
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= closest[static_cast<Eigen::Index>(i)];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
      // A point already chosen has zero weight; never pick it again.
      while (closest[static_cast<Eigen::Index>(pick)] == 0.0) pick = (pick + 1) % n;
    }
    centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    closest = closest.cwiseMin((points.rowwise() - centers.row(static_cast<Eigen::Index>(c))).rowwise().squaredNorm());
  }

  KMeansResult out;
  out.labels.assign(n, k);  // k = "unassigned"
  std::vector<std::size_t> counts(k);
  for (int it = 0; it < max_iterations; ++it) {
    const Matrix dist = pairwise_sq_dist(points, norms, centers);
    bool changed = false;
    double sse = 0.0;
    Vector own(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = dist.row(static_cast<Eigen::Index>(i));
      const std::size_t best = num::argmin_tiebreak(row.transpose());
      own[static_cast<Eigen::Index>(i)] = row[static_cast<Eigen::Index>(best)];
      sse += row[static_cast<Eigen::Index>(best)];
      if (out.labels[i] != best) {
        out.labels[i] = best;
        changed = true;
      }
    }
    out.sse_trace.push_back(sse);
    out.iterations = it + 1;
    if (!changed) break;

    centers.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      centers.row(static_cast<Eigen::Index>(out.labels[i])) += points.row(static_cast<Eigen::Index>(i));
      ++counts[out.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
        continue;
      }
      const std::size_t far = num::argmax_tiebreak(own);
      centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
      own[static_cast<Eigen::Index>(far)] = 0.0;
      out.labels[far] = k;  // force a reassignment pass
    }
  }
  out.centers = std::move(centers);
  return out;
}

CenterInit init_centers(const data::Dataset& data, const TrainConfig& config) {
  if (!data.labeled()) throw DomainError("init_centers: dataset is unlabeled");
  const std::size_t per_class = config.neurons_per_class;
  const std::size_t classes = data.classes;
  CenterInit out{Matrix(static_cast<Eigen::Index>(classes * per_class), static_cast<Eigen::Index>(data.dim)),
                 NeuronAssignment::blocks(classes, per_class)};

  if (config.init == InitMethod::random) {
    const double lo = data.features.minCoeff();
    const double hi = data.features.maxCoeff();
    num::SeededStream rng(config.init_seed);
    for (Eigen::Index i = 0; i < out.centers.size(); ++i) out.centers.data()[i] = lo + (hi - lo) * rng.uniform();
    return out;
  }

  const auto counts = data.class_counts();
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] < per_class) {
      throw InvalidParameter("init_centers: class " + std::to_string(k) + " has " + std::to_string(counts[k]) +
                             " samples, fewer than " + std::to_string(per_class) + " neurons");
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == static_cast<int>(k)) idx.push_back(i);
    }
    Matrix pts(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(data.dim));
    for (std::size_t i = 0; i < idx.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(idx[i]));
    const auto km = kmeans(pts, per_class, num::derive_seed(config.init_seed, k));
    out.centers.middleRows(static_cast<Eigen::Index>(k * per_class), static_cast<Eigen::Index>(per_class)) = km.centers;
  }
  return out;
}

Matrix init_negative(const Matrix& c_plus, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidParameter("init_negative: sigma must be non-negative");
  Matrix c_minus = c_plus;
  if (sigma == 0.0) return c_minus;
  num::SeededStream rng(seed);
  for (Eigen::Index i = 0; i < c_minus.size(); ++i) c_minus.data()[i] += sigma * rng.gaussian();
  return c_minus;
}

// ---- loss -------------------------------------------------------------------

ProbabilityVector cce_target(const ScoreVector& z, double beta, int label, const NeuronAssignment& assignment) {
  if (label < 0 || static_cast<std::size_t>(label) >= assignment.classes()) {
    throw DomainError("cce_target: label " + std::to_string(label) + " outside 0.." +
                      std::to_string(assignment.classes() - 1));
  }
  if (!(beta > 0.0)) throw InvalidParameter("cce_target: beta must be positive");
  const auto& own = assignment.members(static_cast<std::size_t>(label));
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j : own) top = std::max(top, beta * z[static_cast<Eigen::Index>(j)]);
  ProbabilityVector tau = ProbabilityVector::Zero(z.size());
  double total = 0.0;
  for (std::size_t j : own) {
    const double e = std::exp(beta * z[static_cast<Eigen::Index>(j)] - top);
    tau[static_cast<Eigen::Index>(j)] = e;
    total += e;
  }
  tau /= total;
  return tau;
}

double cce_loss(const ProbabilityVector& y, const ProbabilityVector& tau) {
  if (y.size() != tau.size()) throw DimensionError("cce_loss: length mismatch");
  double loss = 0.0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (tau[j] > 0.0) loss -= tau[j] * std::log(std::max(y[j], kMinLogArg));
  }
  return loss;
}

double lr_schedule(double lr0, double lr_decay, int epoch) {
  if (epoch < 0) throw DomainError("lr_schedule: negative epoch");
  return lr0 * std::pow(lr_decay, epoch);
}

// ---- steps -----------------------------------------------------------------

namespace {

StepResult finish(ScoreVector z, double beta, int label, const NeuronAssignment& assignment) {
  StepResult r;
  if (!z.allFinite()) throw DivergenceError("non-finite scores");
  r.y = num::stable_softmax(z, beta);
  r.tau = cce_target(z, beta, label, assignment);
  r.loss = cce_loss(r.y, r.tau);
  r.correct = predict(z, assignment) == label;
  r.z = std::move(z);
  return r;
}

// Collapsed inner-product form of a PnEdWtaModel, kept in sync row by row.
struct PnEdCache {
  Matrix weights;
  Vector biases;

  explicit PnEdCache(const PnEdWtaModel& m) {
    weights = m.c_plus - m.c_minus;
    biases = 0.5 * (m.c_minus.rowwise().squaredNorm() - m.c_plus.rowwise().squaredNorm());
  }
  void refresh(const PnEdWtaModel& m, Eigen::Index j) {
    weights.row(j) = m.c_plus.row(j) - m.c_minus.row(j);
    biases[j] = 0.5 * (m.c_minus.row(j).squaredNorm() - m.c_plus.row(j).squaredNorm());
  }
};

StepResult pn_ed_step_cached(PnEdWtaModel& model, PnEdCache& cache, const Eigen::Ref<const Vector>& x, int label,
                             double mu) {
  StepResult r = finish(cache.weights * x + cache.biases, model.beta, label, model.assignment);
  const double step = mu * model.beta;
  for (Eigen::Index j = 0; j < r.z.size(); ++j) {
    if (model.assignment.class_of(static_cast<std::size_t>(j)) == label) {
      const double coef = step * (r.tau[j] - r.y[j]);
      model.c_plus.row(j) += coef * (x.transpose() - model.c_plus.row(j));
    } else {
      const double coef = step * r.y[j];
      model.c_minus.row(j) += coef * (x.transpose() - model.c_minus.row(j));
    }
    cache.refresh(model, j);
  }
  model.beta = std::max(kMinBeta, model.beta - mu * (r.y - r.tau).dot(r.z));
  return r;
}

}  // namespace

StepResult ip_step(Matrix& weights, const NeuronAssignment& assignment, const Vector& x_aug, int label, double mu) {
  StepResult r = finish(weights * x_aug, 1.0, label, assignment);
  weights.noalias() -= mu * (r.y - r.tau) * x_aug.transpose();
  return r;
}

StepResult ed_step(EdWtaModel& model, const Eigen::Ref<const Vector>& x, int label, double mu) {
  const Vector dist = (model.centers.rowwise() - x.transpose()).rowwise().squaredNorm();
  StepResult r = finish(-0.5 * dist, model.beta, label, model.assignment);
  const Vector diff = r.y - r.tau;
  for (Eigen::Index j = 0; j < diff.size(); ++j) {
    model.centers.row(j) -= mu * model.beta * diff[j] * (x.transpose() - model.centers.row(j));
  }
  model.beta = std::max(kMinBeta, model.beta + 0.5 * mu * diff.dot(dist));
  return r;
}

StepResult pn_ip_step(PnIpWtaModel& model, const Vector& x_aug, int label, double mu) {
  StepResult r = finish(pn_ip_forward(model, x_aug), 1.0, label, model.assignment);
  for (Eigen::Index j = 0; j < r.z.size(); ++j) {
    if (model.assignment.class_of(static_cast<std::size_t>(j)) == label) {
      model.w_plus.row(j) += mu * (r.tau[j] - r.y[j]) * x_aug.transpose();
    } else {
      model.w_minus.row(j) += mu * r.y[j] * x_aug.transpose();
    }
  }
  return r;
}

StepResult pn_ed_step(PnEdWtaModel& model, const Eigen::Ref<const Vector>& x, int label, double mu) {
  PnEdCache cache(model);
  return pn_ed_step_cached(model, cache, x, label, mu);
}

// ---- trainers ----------------------------------------------------------------

namespace {

void require_training_set(const data::Dataset& data) {
  if (data.size() == 0) throw DomainError("training set is empty");
  if (!data.labeled()) throw DomainError("training set is unlabeled");
}

// Diverging runs push softmax tails into the subnormal range, where x86
// arithmetic is ~100x slower. Flushing them to zero only affects values
// below 1e-308 and is restored on exit.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

// Concatenation of every trainable parameter, used to detect an epoch that
// left the model bit-identical.
template <class... Blocks>
std::vector<double> snapshot(double scalar, const Blocks&... blocks) {
  std::vector<double> out{scalar};
  (out.insert(out.end(), blocks.data(), blocks.data() + blocks.size()), ...);
  return out;
}

// Runs the per-sample SGD loop. `step(x, label, mu)` returns a StepResult;
// `beta()` reports the current temperature for the log and `params()` a
// snapshot of the model.
//
// Once a whole epoch changes no parameter, every update was below half an
// ulp of its target. Later epochs use the same state with a smaller (or
// equal) step, so they are no-ops as well; their stats are copied instead
// of recomputed.
template <class Step, class Beta, class Params>
std::vector<EpochStats> run_epochs(const data::Dataset& data, const TrainConfig& config, Step&& step, Beta&& beta,
                                   Params&& params, const EpochCallback& on_epoch) {
  const FlushDenormals ftz;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  num::SeededStream shuffler(config.shuffle_seed);
  std::vector<EpochStats> stats;
  std::vector<double> before = params();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double mu = lr_schedule(config.lr0, config.lr_decay, epoch);
    if (!stats.empty() && stats.back().frozen) {
      EpochStats e = stats.back();
      e.epoch = epoch;
      e.mu = mu;
      stats.push_back(e);
      if (on_epoch) on_epoch(e);
      continue;
    }
    std::shuffle(order.begin(), order.end(), shuffler.engine());
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::size_t s = order[i];
      StepResult r;
      try {
        r = step(data.sample(s), data.labels[s], mu);
      } catch (const DivergenceError&) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", sample " +
                              std::to_string(s) + " (non-finite scores)");
      }
      if (!std::isfinite(r.loss)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", sample " +
                              std::to_string(s) + " (non-finite loss)");
      }
      loss += r.loss;
      correct += r.correct ? 1 : 0;
    }
    EpochStats e;
    e.epoch = epoch;
    e.loss = loss / static_cast<double>(order.size());
    e.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    e.mu = mu;
    e.beta = beta();
    std::vector<double> after = params();
    e.frozen = after == before;
    before = std::move(after);
    stats.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return stats;
}

double resolve_beta(const TrainConfig& config, const data::Dataset& data,
                    const std::function<ScoreVector(const Eigen::Ref<const Vector>&)>& scores) {
  return config.beta0 ? *config.beta0 : auto_beta(data, scores);
}

}  // namespace

double auto_beta(const data::Dataset& data, const std::function<ScoreVector(const Eigen::Ref<const Vector>&)>& scores,
                 std::size_t samples) {
  const std::size_t n = std::min(samples, data.size());
  if (n == 0) throw DomainError("auto_beta: empty dataset");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ScoreVector z = scores(data.sample(i));
    total += z.cwiseAbs().sum();
    count += static_cast<std::size_t>(z.size());
  }
  const double mean = total / static_cast<double>(count);
  if (!(mean > 0.0)) return 1.0;
  return std::max(1e-3, 1.0 / mean);
}

Trained<IpWtaModel> train_ip_wta(const data::Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  require_training_set(data);
  const auto init = init_centers(data, config);
  const auto d = static_cast<Eigen::Index>(data.dim);
  Matrix weights = Matrix::Zero(init.centers.rows(), d + 1);
  weights.leftCols(d) = init.centers;

  auto stats = run_epochs(
      data, config,
      [&](const Eigen::Ref<const Vector>& x, int label, double mu) {
        return ip_step(weights, init.assignment, augment(x), label, mu);
      },
      [] { return 1.0; }, [&] { return snapshot(1.0, weights); }, on_epoch);

  IpWtaModel model{weights.leftCols(d), weights.col(d), init.assignment};
  return {std::move(model), std::move(stats)};
}

Trained<EdWtaModel> train_ed_wta(const data::Dataset& data, const TrainConfig& config, EdWtaModel initial,
                                 const EpochCallback& on_epoch) {
  config.validate();
  require_training_set(data);
  require_dim(initial, data.dim, "train_ed_wta");
  EdWtaModel model = strip_ed_biases(initial);
  model.beta = resolve_beta(config, data, [&](const Eigen::Ref<const Vector>& x) { return ed_forward(model, x); });
  model.validate();
  auto stats = run_epochs(
      data, config, [&](const Eigen::Ref<const Vector>& x, int label, double mu) { return ed_step(model, x, label, mu); },
      [&] { return model.beta; }, [&] { return snapshot(model.beta, model.centers); }, on_epoch);
  return {std::move(model), std::move(stats)};
}

Trained<EdWtaModel> train_ed_wta(const data::Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  require_training_set(data);
  auto init = init_centers(data, config);
  EdWtaModel model{std::move(init.centers), Vector::Zero(static_cast<Eigen::Index>(init.assignment.neurons())), 1.0,
                   init.assignment};
  return train_ed_wta(data, config, std::move(model), on_epoch);
}

Trained<PnIpWtaModel> train_pn_ip_wta(const data::Dataset& data, const TrainConfig& config,
                                      const EpochCallback& on_epoch) {
  config.validate();
  require_training_set(data);
  const auto init = init_centers(data, config);
  const auto d = static_cast<Eigen::Index>(data.dim);
  PnIpWtaModel model;
  model.w_plus = Matrix::Zero(init.centers.rows(), d + 1);
  model.w_plus.leftCols(d) = init.centers;
  model.w_minus = Matrix::Zero(init.centers.rows(), d + 1);
  model.assignment = init.assignment;
  auto stats = run_epochs(
      data, config,
      [&](const Eigen::Ref<const Vector>& x, int label, double mu) { return pn_ip_step(model, augment(x), label, mu); },
      [] { return 1.0; }, [&] { return snapshot(1.0, model.w_plus, model.w_minus); }, on_epoch);
  return {std::move(model), std::move(stats)};
}

Trained<PnEdWtaModel> train_pn_ed_wta(const data::Dataset& data, const TrainConfig& config, PnEdWtaModel initial,
                                      const EpochCallback& on_epoch) {
  config.validate();
  require_training_set(data);
  require_dim(initial, data.dim, "train_pn_ed_wta");
  PnEdWtaModel model = std::move(initial);
  PnEdCache cache(model);
  model.beta = resolve_beta(config, data,
                            [&](const Eigen::Ref<const Vector>& x) -> ScoreVector { return cache.weights * x + cache.biases; });
  model.validate();
  auto stats = run_epochs(
      data, config,
      [&](const Eigen::Ref<const Vector>& x, int label, double mu) {
        return pn_ed_step_cached(model, cache, x, label, mu);
      },
      [&] { return model.beta; }, [&] { return snapshot(model.beta, model.c_plus, model.c_minus); }, on_epoch);
  return {std::move(model), std::move(stats)};
}

Trained<PnEdWtaModel> train_pn_ed_wta(const data::Dataset& data, const TrainConfig& config,
                                      const EpochCallback& on_epoch) {
  config.validate();
  require_training_set(data);
  auto init = init_centers(data, config);
  PnEdWtaModel model;
  model.c_minus = init_negative(init.centers, config.noise_sigma, num::derive_seed(config.init_seed, 1000));
  model.c_plus = std::move(init.centers);
  model.assignment = init.assignment;
  return train_pn_ed_wta(data, config, std::move(model), on_epoch);
}

Trained<AnyModel> train(Family family, const data::Dataset& data, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
  auto wrap = [](auto trained) { return Trained<AnyModel>{AnyModel(std::move(trained.model)), std::move(trained.stats)}; };
  switch (family) {
    case Family::ip: return wrap(train_ip_wta(data, config, on_epoch));
    case Family::ed: return wrap(train_ed_wta(data, config, on_epoch));
    case Family::pn_ip: return wrap(train_pn_ip_wta(data, config, on_epoch));
    case Family::pn_ed: return wrap(train_pn_ed_wta(data, config, on_epoch));
  }
  throw DomainError("train: unknown family");
}

// ---- evaluation ---------------------------------------------------------------

EvalReport evaluate(const AnyModel& model, const data::Dataset& data, std::size_t threads) {
  if (data.size() == 0) throw DomainError("evaluate: empty dataset");
  if (!data.labeled()) throw DomainError("evaluate: dataset is unlabeled");
  require_dim(model, data.dim, "evaluate");
  const auto& assignment = assignment_of(model);
  std::vector<int> predicted(data.size());
  parallel_for(data.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) predicted[i] = predict(forward(model, data.sample(i)), assignment);
  });
  EvalReport r;
  r.samples = data.size();
  const std::size_t k = std::max(data.classes, assignment.classes());
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < data.size(); ++i) {
    ++r.confusion[static_cast<std::size_t>(data.labels[i])][static_cast<std::size_t>(predicted[i])];
    if (predicted[i] == data.labels[i]) ++r.correct;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.samples);
  return r;
}

std::vector<double> default_lr_grid() { return {1e-2, 1e-1, 1.0, 1e1, 1e2}; }

CrossValidation cross_validate_lr(Family family, const data::Dataset& data, const TrainConfig& config,
                                  std::vector<double> grid, int cv_epochs, std::size_t folds) {
  if (grid.empty()) throw InvalidParameter("cross_validate_lr: empty grid");
  if (folds < 2) throw InvalidParameter("cross_validate_lr: need at least 2 folds");
  require_training_set(data);
  std::sort(grid.begin(), grid.end());

  // Stratified assignment: each class is shuffled and dealt round-robin.
  const auto counts = data.class_counts();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < folds) {
      throw DomainError("cross_validate_lr: class " + std::to_string(k) + " has " + std::to_string(counts[k]) +
                        " samples, fewer than " + std::to_string(folds) + " folds");
    }
  }
  std::vector<std::size_t> fold_of(data.size());
  num::SeededStream rng(num::derive_seed(config.shuffle_seed, 77));
  for (std::size_t k = 0; k < counts.size(); ++k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == static_cast<int>(k)) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    for (std::size_t i = 0; i < idx.size(); ++i) fold_of[idx[i]] = i % folds;
  }

  CrossValidation out;
  out.grid = grid;
  for (double lr : grid) {
    double acc = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> train_idx, val_idx;
      for (std::size_t i = 0; i < data.size(); ++i) (fold_of[i] == f ? val_idx : train_idx).push_back(i);
      const auto train_set = data::select(data, train_idx, data.name + "-train");
      const auto val_set = data::select(data, val_idx, data.name + "-val");
      TrainConfig cfg = config;
      cfg.lr0 = lr;
      cfg.epochs = cv_epochs;
      try {
        const auto trained = train(family, train_set, cfg);
        acc += evaluate(trained.model, val_set).accuracy;
      } catch (const DivergenceError&) {
        // scores zero
      }
    }
    out.mean_accuracy.push_back(acc / static_cast<double>(folds));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (out.mean_accuracy[i] > out.mean_accuracy[best]) best = i;
  }
  out.chosen_lr0 = grid[best];
  return out;
}

void write_stats_csv(const std::vector<EpochStats>& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,loss,train_acc,mu,beta\n";
  out << std::setprecision(10);
  for (const auto& s : stats) {
    out << s.epoch << ',' << s.loss << ',' << s.train_accuracy << ',' << s.mu << ',' << s.beta << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace wta::train
