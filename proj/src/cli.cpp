#include "wta/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <sstream>

#include "wta/adversarial.hpp"
#include "wta/data.hpp"
#include "wta/errors.hpp"
#include "wta/kvconfig.hpp"
#include "wta/models.hpp"
#include "wta/openset.hpp"
#include "wta/parallel.hpp"
#include "wta/train.hpp"
#include "wta/viz.hpp"

#ifndef WTA_VERSION
#define WTA_VERSION "0.0.0"
#endif

namespace wta::cli {

std::string version() { return WTA_VERSION; }

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr std::size_t kImageRows = 28;
constexpr std::size_t kImageCols = 28;
constexpr std::size_t kMnistClasses = 10;

// ---- option plumbing ------------------------------------------------------------

// Every subcommand option is a string keyed by its normalised name so that
// the same key can come from a built-in default, the config file, or a flag.
struct Options {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> handles;
  std::string config_path;

  void add(CLI::App* app, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    handles[key] = app->add_option(flag, values[key], help);
  }

  void add_train_keys(CLI::App* app) {
    add(app, "epochs", "training epochs");
    add(app, "lr0", "initial learning rate");
    add(app, "lr_decay", "per-epoch learning rate factor");
    add(app, "neurons_per_class", "output neurons per class");
    add(app, "init", "center initialisation: random | kmeans");
    add(app, "beta0", "initial softmax sharpness, or auto");
    add(app, "noise_sigma", "std-dev of the negative-center perturbation");
    add(app, "shuffle_seed", "seed for per-epoch sample order");
    add(app, "init_seed", "seed for center initialisation");
  }

  void add_attack_keys(CLI::App* app) {
    add(app, "step_size", "gradient ascent step");
    add(app, "max_iters", "ascent iteration cap");
    add(app, "target_confidence", "stop once the target class reaches this P^IP");
    add(app, "clip_lo", "lower pixel bound");
    add(app, "clip_hi", "upper pixel bound");
    add(app, "attack_seed", "seed for noise starts");
  }

  void add_data_keys(CLI::App* app, bool train, bool test) {
    add(app, "data_dir", "directory with the MNIST IDX files (mnist/ subdirectory or the files directly)");
    if (train) {
      add(app, "train_images", "training images (IDX)");
      add(app, "train_labels", "training labels (IDX)");
    }
    if (test) {
      add(app, "test_images", "test images (IDX)");
      add(app, "test_labels", "test labels (IDX)");
    }
    add(app, "limit", train && test ? "use only the first N training samples" : "use only the first N samples");
    if (train && test) add(app, "test_limit", "use only the first N test samples");
  }

  /// defaults < config file < explicit flags
  KeyValues resolve(const KeyValues& defaults) const {
    KeyValues kv = defaults;
    if (!config_path.empty()) kv.merge(KeyValues::load(config_path));
    for (const auto& [key, opt] : handles) {
      if (opt->count() > 0) kv.set(key, values.at(key));
    }
    return kv;
  }
};

struct Common {
  std::string out;
  std::size_t threads = 0;
};

void add_common(CLI::App* app, Options& options, Common& common) {
  app->add_option("--config", options.config_path, "key = value settings file")->check(CLI::ExistingFile);
  app->add_option("--out", common.out, "output directory (default: runs/<command>-<timestamp>)");
  app->add_option("--threads", common.threads, "worker threads (default: hardware concurrency)");
}

// ---- run bookkeeping --------------------------------------------------------------

std::string timestamp(std::time_t t, const char* format) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, format);
  return out.str();
}

class Run {
 public:
  Run(std::string command, const Common& common)
      : command_(std::move(command)), started_(std::chrono::steady_clock::now()), wall_(std::time(nullptr)) {
    threads_ = common.threads == 0 ? default_threads() : common.threads;
    if (!common.out.empty()) {
      dir_ = common.out;
    } else {
      const fs::path base = fs::path("runs") / (command_ + "-" + timestamp(wall_, "%Y%m%d-%H%M%S"));
      dir_ = base;
      for (int i = 1; fs::exists(dir_); ++i) dir_ = base.string() + "-" + std::to_string(i);
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    manifest_["command"] = command_;
    manifest_["tool_version"] = version();
    manifest_["started_utc"] = timestamp(wall_, "%Y-%m-%dT%H:%M:%SZ");
    manifest_["threads"] = threads_;
  }

  Run(const Run&) = delete;
  Run& operator=(const Run&) = delete;
  // A failed command leaves no empty run directory behind.
  ~Run() {
    std::error_code ec;
    if (!finished_ && fs::is_empty(dir_, ec) && !ec) fs::remove(dir_, ec);
  }

  fs::path path(const std::string& name) {
    const fs::path p = dir_ / name;
    manifest_["outputs"][name] = p.string();
    return p;
  }
  void input(const std::string& role, const fs::path& p) { manifest_["inputs"][role] = p.string(); }
  void config(const KeyValues& kv) {
    for (const auto& [k, v] : kv.entries()) manifest_["config"][k] = v;
  }
  Json& extra() { return manifest_["results"]; }
  std::size_t threads() const { return threads_; }

  void finish() {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    manifest_["duration_seconds"] = seconds;
    const fs::path p = dir_ / "manifest.json";
    std::ofstream out(p);
    out << manifest_.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + p.string());
    std::cout << "wrote " << dir_.string() << '\n';
    finished_ = true;
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point started_;
  std::time_t wall_;
  std::size_t threads_ = 1;
  fs::path dir_;
  Json manifest_;
  bool finished_ = false;
};

// ---- data resolution ----------------------------------------------------------------

fs::path require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + " not found: " + path);
  return path;
}

// Resolves `<prefix>_images` / `<prefix>_labels`, falling back to the
// standard MNIST file names under data_dir.
std::optional<std::pair<fs::path, fs::path>> dataset_paths(const KeyValues& kv, const std::string& prefix) {
  auto images = kv.get(prefix + "_images");
  auto labels = kv.get(prefix + "_labels");
  if (images && labels) {
    return std::pair{require_file(*images, prefix + " images"), require_file(*labels, prefix + " labels")};
  }
  if (images || labels) throw UsageError("give both --" + prefix + "-images and --" + prefix + "-labels");
  const auto dir = kv.get("data_dir");
  if (!dir) return std::nullopt;
  const std::string stem = prefix == "train" ? "train" : "t10k";
  fs::path root = *dir;
  if (fs::is_directory(root / "mnist")) root /= "mnist";
  return std::pair{require_file((root / (stem + "-images-idx3-ubyte")).string(), prefix + " images"),
                   require_file((root / (stem + "-labels-idx1-ubyte")).string(), prefix + " labels")};
}

// `limit_key` names the setting that truncates this set (empty: never).
data::Dataset load_set(const KeyValues& kv, const std::string& prefix, Run& run,
                       const std::string& limit_key = "limit") {
  const auto paths = dataset_paths(kv, prefix);
  if (!paths) {
    throw UsageError("no " + prefix + " data: give --data-dir or --" + prefix + "-images and --" + prefix +
                     "-labels");
  }
  run.input(prefix + "_images", paths->first);
  run.input(prefix + "_labels", paths->second);
  auto set = data::load_idx_dataset(paths->first, paths->second, kMnistClasses, prefix);
  if (limit_key.empty()) return set;
  if (const auto limit = kv.get_int(limit_key, 0); limit > 0) set = data::head(set, static_cast<std::size_t>(limit));
  return set;
}

AnyModel load_model_key(const KeyValues& kv, Run& run) {
  const auto path = kv.get("model");
  if (!path) throw UsageError("--model is required");
  run.input("model", require_file(*path, "model"));
  return load_model(*path);
}

const PnEdWtaModel& require_pn_ed(const AnyModel& model, const std::string& command) {
  if (family_of(model) != Family::pn_ed) {
    throw UsageError(command + " needs a pn_ed model, got " + to_string(family_of(model)));
  }
  return std::get<PnEdWtaModel>(model);
}

Json confusion_json(const train::EvalReport& report) {
  Json rows = Json::array();
  for (const auto& row : report.confusion) rows.push_back(row);
  return rows;
}

std::vector<double> thresholds_from(const KeyValues& kv) {
  const double step = kv.get_double("threshold_step", 0.01);
  if (!(step > 0.0) || step > 1.0) throw UsageError("threshold_step must be in (0, 1]");
  std::vector<double> t;
  const auto n = static_cast<long long>(std::llround(1.0 / step));
  for (long long i = 0; i <= n; ++i) t.push_back(std::min(1.0, static_cast<double>(i) * step));
  return t;
}

void report_sweep(const std::string& label, const openset::ThresholdSweep& sweep, Json& out) {
  const auto i = openset::best_index(sweep);
  std::cout << label << ": best threshold " << sweep.thresholds[i] << " acceptance " << sweep.acceptance_rate[i]
            << " rejection " << sweep.rejection_rate[i] << '\n';
  out[label] = {{"best_threshold", sweep.thresholds[i]},
                {"acceptance", sweep.acceptance_rate[i]},
                {"rejection", sweep.rejection_rate[i]}};
}

// ---- commands -----------------------------------------------------------------------

void cmd_train(const KeyValues& cli_kv, const Common& common) {
  Run run("train", common);
  KeyValues kv = cli_kv;
  const auto family_name = kv.get("family");
  if (!family_name) throw UsageError("--family is required (ip, ed, pn_ip, pn_ed)");
  const Family family = parse_family(*family_name);
  const auto config = to_train_config(kv);
  kv.merge(to_key_values(config));
  run.config(kv);

  const auto train_set = load_set(kv, "train", run);
  std::optional<data::Dataset> test_set;
  if (dataset_paths(kv, "test")) test_set = load_set(kv, "test", run, "test_limit");

  const auto log = [](const train::EpochStats& e) {
    std::cout << "epoch " << e.epoch << " loss " << e.loss << " train_acc " << e.train_accuracy << " mu " << e.mu
              << " beta " << e.beta << '\n';
  };
  train::Trained<AnyModel> trained;
  if (const auto init = kv.get("init_model")) {
    run.input("init_model", require_file(*init, "initial model"));
    AnyModel start = load_model(*init);
    if (family != family_of(start)) {
      throw UsageError("--init-model is a " + to_string(family_of(start)) + " model but --family is " + *family_name);
    }
    if (family == Family::ed) {
      auto r = train::train_ed_wta(train_set, config, std::get<EdWtaModel>(std::move(start)), log);
      trained = {std::move(r.model), std::move(r.stats)};
    } else if (family == Family::pn_ed) {
      auto r = train::train_pn_ed_wta(train_set, config, std::get<PnEdWtaModel>(std::move(start)), log);
      trained = {std::move(r.model), std::move(r.stats)};
    } else {
      throw UsageError("--init-model is supported for ed and pn_ed only");
    }
  } else {
    trained = train::train(family, train_set, config, log);
  }

  save_model(trained.model, run.path("model.json"));
  train::write_stats_csv(trained.stats, run.path("stats.csv").string());
  const auto train_eval = train::evaluate(trained.model, train_set, run.threads());
  run.extra()["train_accuracy"] = train_eval.accuracy;
  std::cout << "train accuracy " << train_eval.accuracy << '\n';
  if (test_set) {
    const auto test_eval = train::evaluate(trained.model, *test_set, run.threads());
    run.extra()["test_accuracy"] = test_eval.accuracy;
    run.extra()["test_confusion"] = confusion_json(test_eval);
    std::cout << "test accuracy " << test_eval.accuracy << '\n';
  }
  run.finish();
}

void cmd_eval(const KeyValues& kv, const Common& common) {
  Run run("eval", common);
  run.config(kv);
  const AnyModel model = load_model_key(kv, run);
  const auto set = load_set(kv, "test", run);
  const auto report = train::evaluate(model, set, run.threads());
  std::cout << "accuracy " << std::setprecision(6) << report.accuracy << " (" << report.correct << "/"
            << report.samples << ")\n";
  Json j;
  j["family"] = to_string(family_of(model));
  j["samples"] = report.samples;
  j["correct"] = report.correct;
  j["accuracy"] = report.accuracy;
  j["confusion"] = confusion_json(report);
  std::ofstream out(run.path("report.json"));
  out << j.dump(2) << '\n';
  run.extra() = j;
  run.finish();
}

void cmd_convert(const KeyValues& kv, const Common& common) {
  Run run("convert", common);
  run.config(kv);
  const AnyModel source = load_model_key(kv, run);
  const Family from = family_of(source);
  if (const auto declared = kv.get("from"); declared && parse_family(*declared) != from) {
    throw UsageError("--from " + *declared + " but the model is " + to_string(from));
  }
  const auto to = kv.get("to");
  if (!to) throw UsageError("--to is required (ip, ed, natural_ed, strip_d)");
  const std::string pair = to_string(from) + "->" + *to;

  AnyModel result;
  if (*to == "ip" && from == Family::ed) {
    result = ed_to_ip(std::get<EdWtaModel>(source));
  } else if (*to == "ip" && (from == Family::pn_ed || from == Family::pn_ip)) {
    result = as_ip(source);
  } else if (*to == "ed" && from == Family::ip) {
    const auto& ip = std::get<IpWtaModel>(source);
    const double alpha = kv.get_double("alpha", 1.0);
    const double gamma0 = ip_to_ed_min_gamma(ip, alpha);
    std::optional<double> gamma;
    if (kv.contains("gamma")) gamma = kv.get_double("gamma", gamma0);
    result = ip_to_ed(ip, alpha, gamma);
    run.extra()["alpha"] = alpha;
    run.extra()["gamma"] = gamma.value_or(gamma0);
    run.extra()["gamma_min"] = gamma0;
  } else if (*to == "natural_ed" && from == Family::ip) {
    const auto train_set = load_set(kv, "train", run);
    const auto fit = natural_ed_fit(std::get<IpWtaModel>(source), train_set, kv.get_double("tolerance", 1e-10),
                                    static_cast<int>(kv.get_int("max_iterations", 1000)));
    result = fit.model;
    run.extra()["alpha"] = fit.fit.alpha;
    run.extra()["gamma"] = fit.gamma;
    run.extra()["iterations"] = fit.fit.iterations;
    run.extra()["converged"] = fit.fit.converged;
    run.extra()["energy_trace"] = fit.fit.energy_trace;
    std::cout << "alpha " << fit.fit.alpha << " gamma " << fit.gamma << " iterations " << fit.fit.iterations
              << (fit.fit.converged ? "" : " (not converged)") << '\n';
  } else if (*to == "strip_d" && from == Family::ed) {
    result = strip_ed_biases(std::get<EdWtaModel>(source));
  } else {
    throw UsageError("unsupported conversion " + pair);
  }
  run.extra()["conversion"] = pair;
  save_model(result, run.path("model.json"));
  run.finish();
}

data::Dataset load_out_set(const KeyValues& kv, Run& run) {
  if (const auto dir = kv.get("outlier_dir")) {
    if (!fs::is_directory(*dir)) throw UsageError("outlier directory not found: " + *dir);
    run.input("outlier_dir", *dir);
    return data::load_outlier_dataset(*dir, kImageRows, kImageCols, kMnistClasses, kv.get_bool("permissive", false));
  }
  if (const auto idx = kv.get("outlier_images")) {
    run.input("outlier_images", require_file(*idx, "outlier images"));
    return data::assemble_dataset(data::load_idx_images(*idx), std::nullopt, kMnistClasses, "outliers");
  }
  throw UsageError("no out-set: give --outlier-dir or --outlier-images");
}

data::Dataset load_in_images(const KeyValues& kv, Run& run) {
  if (dataset_paths(kv, "test")) return load_set(kv, "test", run);
  throw UsageError("no in-set: give --data-dir or --test-images and --test-labels");
}

void cmd_reject(const KeyValues& kv, const Common& common) {
  Run run("reject", common);
  run.config(kv);
  const AnyModel any = load_model_key(kv, run);
  const auto& model = require_pn_ed(any, "reject");
  const auto out_set = load_out_set(kv, run);
  const auto in_set = load_in_images(kv, run);
  const auto thresholds = thresholds_from(kv);
  const auto in_conf = openset::confidences(model, in_set, run.threads());
  const auto out_conf = openset::confidences(model, out_set, run.threads());
  for (const auto measure : {openset::Measure::plus_ed, openset::Measure::ip}) {
    const auto in = openset::select_measure(in_conf, measure);
    const auto out = openset::select_measure(out_conf, measure);
    const auto sweep = openset::sweep_from_confidences(in, out, thresholds);
    const std::string name = openset::to_string(measure);
    openset::write_sweep_csv(sweep, run.path("sweep_" + name + ".csv").string());
    report_sweep(name, sweep, run.extra());
  }
  run.finish();
}

void cmd_adversarial(const KeyValues& cli_kv, const Common& common) {
  Run run("adversarial", common);
  KeyValues kv = cli_kv;
  const auto config = to_adversarial_config(kv);
  kv.merge(to_key_values(config));
  run.config(kv);
  const AnyModel any = load_model_key(kv, run);
  const auto& model = require_pn_ed(any, "adversarial");
  const IpWtaModel ip = pn_ed_probability_equivalent(model);
  const auto test_set = load_in_images(kv, run);

  const auto type1_count = kv.get_int("type1_count", 10000);
  if (type1_count < 0) throw UsageError("type1_count must be non-negative");
  std::optional<std::size_t> type2_limit;
  if (const auto l = kv.get_int("type2_limit", -1); l >= 0) type2_limit = static_cast<std::size_t>(l);

  const auto type1 = adversarial::gen_type1(ip, static_cast<std::size_t>(type1_count), config, run.threads());
  adversarial::write_adversarial(type1, kImageRows, kImageCols, run.path("type1-images-idx3-ubyte"),
                                 run.path("type1.csv"));
  const auto type2 = adversarial::gen_type2(ip, test_set, config, type2_limit, run.threads());
  adversarial::write_adversarial(type2, kImageRows, kImageCols, run.path("type2-images-idx3-ubyte"),
                                 run.path("type2.csv"));

  adversarial::AdversarialSet all = type1;
  all.insert(all.end(), type2.begin(), type2.end());
  std::size_t converged = 0;
  for (const auto& s : all) converged += s.converged ? 1 : 0;
  run.extra()["type1"] = type1.size();
  run.extra()["type2"] = type2.size();
  run.extra()["converged"] = converged;
  std::cout << "generated " << type1.size() << " type-1 and " << type2.size() << " type-2 samples (" << converged
            << " reached the target confidence)\n";

  const auto adv_set = adversarial::to_dataset(all, test_set.dim, test_set.classes);
  const auto thresholds = thresholds_from(kv);
  const auto in_conf = openset::confidences(model, test_set, run.threads());
  const auto out_conf = openset::confidences(model, adv_set, run.threads());
  for (const auto measure : {openset::Measure::plus_ed, openset::Measure::ip}) {
    const auto sweep = openset::sweep_from_confidences(openset::select_measure(in_conf, measure),
                                                       openset::select_measure(out_conf, measure), thresholds);
    const std::string name = openset::to_string(measure);
    openset::write_sweep_csv(sweep, run.path("sweep_" + name + ".csv").string());
    report_sweep(name, sweep, run.extra());
  }
  run.finish();
}

viz::Colormap parse_colormap(const std::string& name) {
  if (name == "signed_green_red" || name == "green_red") return viz::Colormap::signed_green_red;
  if (name == "grayscale" || name == "gray") return viz::Colormap::grayscale;
  throw UsageError("unknown colormap '" + name + "' (expected signed_green_red or grayscale)");
}

void cmd_viz(const KeyValues& kv, const Common& common) {
  Run run("viz", common);
  run.config(kv);
  const AnyModel model = load_model_key(kv, run);
  const auto& assignment = assignment_of(model);
  viz::GridSpec spec;
  spec.rows = static_cast<std::size_t>(kv.get_int("grid_rows", static_cast<long long>(assignment.classes())));
  if (spec.rows == 0) throw UsageError("grid_rows must be positive");
  spec.cols = static_cast<std::size_t>(
      kv.get_int("grid_cols", static_cast<long long>((assignment.neurons() + spec.rows - 1) / spec.rows)));
  spec.cell_rows = static_cast<std::size_t>(kv.get_int("cell_rows", kImageRows));
  spec.cell_cols = static_cast<std::size_t>(kv.get_int("cell_cols", kImageCols));
  spec.colormap = parse_colormap(kv.get_or("colormap", "signed_green_red"));
  const std::string ext = kv.get_or("format", "png");
  if (ext != "png" && ext != "pgm") throw UsageError("format must be png or pgm");

  const auto emit = [&](const std::string& name, const Matrix& m) {
    viz::write_image(viz::render_signed_grid(m, spec), run.path(name + "." + ext));
  };
  switch (family_of(model)) {
    case Family::ip:
      emit("weights", std::get<IpWtaModel>(model).weights);
      break;
    case Family::ed:
      emit("centers", std::get<EdWtaModel>(model).centers);
      break;
    case Family::pn_ip: {
      const auto& m = std::get<PnIpWtaModel>(model);
      const auto d = static_cast<Eigen::Index>(m.dim());
      const Matrix pos = m.w_plus.leftCols(d);
      const Matrix neg = m.w_minus.leftCols(d);
      emit("pos", pos);
      emit("neg", neg);
      emit("diff", pos - neg);
      break;
    }
    case Family::pn_ed: {
      const auto& m = std::get<PnEdWtaModel>(model);
      emit("pos", m.c_plus);
      emit("neg", m.c_minus);
      emit("diff", m.c_plus - m.c_minus);
      break;
    }
  }
  run.finish();
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    KeyValues one;
    one.set("grid", item);
    grid.push_back(one.get_double("grid", 0.0));
  }
  if (grid.empty()) throw UsageError("empty learning-rate grid");
  return grid;
}

void cmd_xval(const KeyValues& cli_kv, const Common& common) {
  Run run("xval-lr", common);
  KeyValues kv = cli_kv;
  const auto family_name = kv.get("family");
  if (!family_name) throw UsageError("--family is required (ip, ed, pn_ip, pn_ed)");
  const Family family = parse_family(*family_name);
  const auto config = to_train_config(kv);
  kv.merge(to_key_values(config));
  run.config(kv);
  const auto set = load_set(kv, "train", run);
  const auto grid = kv.get("grid") ? parse_grid(*kv.get("grid")) : train::default_lr_grid();
  const auto cv_epochs = static_cast<int>(kv.get_int("cv_epochs", config.epochs));
  const auto folds = kv.get_int("folds", 5);
  if (folds < 2) throw UsageError("folds must be at least 2");
  const auto cv = train::cross_validate_lr(family, set, config, grid, cv_epochs, static_cast<std::size_t>(folds));

  std::ofstream csv(run.path("xval.csv"));
  csv << "lr0,mean_accuracy\n";
  for (std::size_t i = 0; i < cv.grid.size(); ++i) {
    csv << cv.grid[i] << ',' << std::fixed << std::setprecision(6) << cv.mean_accuracy[i] << std::defaultfloat
        << '\n';
    std::cout << "lr0 " << cv.grid[i] << " mean accuracy " << cv.mean_accuracy[i] << '\n';
  }
  std::cout << "chosen lr0 " << cv.chosen_lr0 << '\n';
  run.extra()["chosen_lr0"] = cv.chosen_lr0;
  run.extra()["grid"] = cv.grid;
  run.extra()["mean_accuracy"] = cv.mean_accuracy;
  run.finish();
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Winner-take-all prototype classifiers: training, conversion, rejection, attacks"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    Options options;
    Common common;
    KeyValues defaults;
    void (*handler)(const KeyValues&, const Common&);
  };
  std::vector<std::unique_ptr<Sub>> subs;
  const auto make = [&](const std::string& name, const std::string& help,
                        void (*handler)(const KeyValues&, const Common&)) -> Sub& {
    auto sub = std::make_unique<Sub>();
    sub->app = app.add_subcommand(name, help);
    sub->handler = handler;
    add_common(sub->app, sub->options, sub->common);
    subs.push_back(std::move(sub));
    return *subs.back();
  };

  {
    auto& s = make("train", "train a model", cmd_train);
    s.options.add(s.app, "family", "ip | ed | pn_ip | pn_ed");
    s.options.add(s.app, "init_model", "continue training from this model (ed, pn_ed)");
    s.options.add_data_keys(s.app, true, true);
    s.options.add_train_keys(s.app);
  }
  {
    auto& s = make("eval", "test accuracy and confusion counts", cmd_eval);
    s.options.add(s.app, "model", "model file");
    s.options.add_data_keys(s.app, false, true);
  }
  {
    auto& s = make("convert", "equivalence conversions between model families", cmd_convert);
    s.options.add(s.app, "model", "source model file");
    s.options.add(s.app, "from", "expected source family (checked)");
    s.options.add(s.app, "to", "ip | ed | natural_ed | strip_d");
    s.options.add(s.app, "alpha", "ip->ed center scale");
    s.options.add(s.app, "gamma", "ip->ed offset (default: smallest valid)");
    s.options.add(s.app, "tolerance", "natural_ed fixed-point tolerance");
    s.options.add(s.app, "max_iterations", "natural_ed iteration cap");
    s.options.add_data_keys(s.app, true, false);
  }
  {
    auto& s = make("reject", "open-set threshold sweep for both confidence measures", cmd_reject);
    s.options.add(s.app, "model", "pn_ed model file");
    s.options.add(s.app, "outlier_dir", "directory of PGM/PNG out-of-set images (resized to 28x28)");
    s.options.add(s.app, "outlier_images", "out-of-set images as an IDX file");
    s.options.add(s.app, "permissive", "skip unreadable files in outlier_dir");
    s.options.add(s.app, "threshold_step", "sweep spacing (default 0.01)");
    s.options.add_data_keys(s.app, false, true);
  }
  {
    auto& s = make("adversarial", "generate adversarial sets and sweep rejection", cmd_adversarial);
    s.options.add(s.app, "model", "pn_ed model file");
    s.options.add(s.app, "type1_count", "noise-seeded samples (default 10000)");
    s.options.add(s.app, "type2_limit", "use only the first N test images for type-2");
    s.options.add(s.app, "threshold_step", "sweep spacing (default 0.01)");
    s.options.add_data_keys(s.app, false, true);
    s.options.add_attack_keys(s.app);
  }
  {
    auto& s = make("viz", "render weights or prototypes as image grids", cmd_viz);
    s.options.add(s.app, "model", "model file");
    s.options.add(s.app, "grid_rows", "grid rows (default: classes)");
    s.options.add(s.app, "grid_cols", "grid columns (default: neurons per class)");
    s.options.add(s.app, "cell_rows", "cell height (default 28)");
    s.options.add(s.app, "cell_cols", "cell width (default 28)");
    s.options.add(s.app, "colormap", "signed_green_red | grayscale");
    s.options.add(s.app, "format", "png | pgm");
  }
  {
    auto& s = make("xval-lr", "k-fold selection of the initial learning rate", cmd_xval);
    s.options.add(s.app, "family", "ip | ed | pn_ip | pn_ed");
    s.options.add(s.app, "grid", "comma-separated lr0 candidates (default 0.01,0.1,1,10,100)");
    s.options.add(s.app, "cv_epochs", "epochs per fold (default: epochs)");
    s.options.add(s.app, "folds", "number of folds (default 5)");
    s.options.add_data_keys(s.app, true, false);
    s.options.add_train_keys(s.app);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    for (const auto& sub : subs) {
      if (sub->app->parsed()) {
        sub->handler(sub->options.resolve(sub->defaults), sub->common);
        return kExitOk;
      }
    }
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("wta");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace wta::cli
