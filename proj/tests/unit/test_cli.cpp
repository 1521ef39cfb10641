#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "helpers.hpp"
#include "wta/cli.hpp"
#include "wta/errors.hpp"
#include "wta/kvconfig.hpp"
#include "wta/viz.hpp"

using namespace wta;
using namespace wta::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

// Ten classes of 28x28 images, each a bright square at a class-specific spot.
void write_digits(const fs::path& dir, const std::string& stem, std::size_t per_class, std::uint64_t seed) {
  num::SeededStream rng(seed);
  std::vector<data::GrayImage> images;
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::uint8_t c = 0; c < 10; ++c) {
      data::GrayImage img{28, 28, std::vector<std::uint8_t>(784)};
      for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(40));
      const std::size_t top = (c / 5) * 14 + 3;
      const std::size_t left = (c % 5) * 5 + 1;
      for (std::size_t r = top; r < top + 8; ++r)
        for (std::size_t q = left; q < left + 5; ++q) img.pixels[r * 28 + q] = static_cast<std::uint8_t>(200 + rng.below(56));
      images.push_back(std::move(img));
      labels.push_back(c);
    }
  }
  data::write_idx_images(dir / (stem + "-images-idx3-ubyte"), images);
  data::write_idx_labels(dir / (stem + "-labels-idx1-ubyte"), labels);
}

struct Fixture {
  TempDir dir;
  Fixture() {
    write_digits(dir.path(), "train", 12, 1);
    write_digits(dir.path(), "t10k", 4, 2);
  }
  std::string data() const { return dir.path().string(); }
  std::string out(const std::string& name) const { return (dir / name).string(); }
};

const std::vector<std::string> kFast{"--epochs", "3", "--neurons-per-class", "2", "--lr0", "0.01"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("key-value config parsing") {
  const auto kv = KeyValues::parse("# comment\nepochs = 5   # trailing\n\nlr-decay=0.25\ninit = random\n");
  CHECK(kv.get_int("epochs", 0) == 5);
  CHECK(kv.get_double("lr_decay", 0.0) == 0.25);
  CHECK(kv.get_or("init", "") == "random");
  CHECK_FALSE(kv.contains("beta0"));
  CHECK_THROWS_AS(KeyValues::parse("just words\n"), FormatError);
  CHECK_THROWS_AS(KeyValues::parse(" = 3\n"), FormatError);

  const auto cfg = to_train_config(kv);
  CHECK(cfg.epochs == 5);
  CHECK(cfg.lr_decay == 0.25);
  CHECK(cfg.init == train::InitMethod::random);
  CHECK_FALSE(cfg.beta0.has_value());

  // Materialised configs parse back to the same values.
  train::TrainConfig t;
  t.lr0 = 0.1;
  t.beta0 = 2.5;
  t.shuffle_seed = 18446744073709551615ULL;
  const auto back = to_train_config(KeyValues::parse(to_key_values(t).dump()));
  CHECK(back.lr0 == 0.1);
  CHECK(back.beta0 == 2.5);
  CHECK(back.shuffle_seed == t.shuffle_seed);
  CHECK(to_key_values(t).get_or("lr0", "") == "0.1");

  adversarial::AdversarialConfig a;
  a.step_size = 0.3;
  CHECK(to_adversarial_config(KeyValues::parse(to_key_values(a).dump())).step_size == 0.3);

  KeyValues base = KeyValues::parse("a = 1\nb = 2\n");
  base.merge(KeyValues::parse("b = 3\n"));
  CHECK(base.get_int("a", 0) == 1);
  CHECK(base.get_int("b", 0) == 3);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli::run(std::vector<std::string>{}) == cli::kExitUsage);
  CHECK(cli::run({"frobnicate"}) == cli::kExitUsage);
  CHECK(cli::run({"train", "--no-such-flag", "1"}) == cli::kExitUsage);
  TempDir dir;
  CHECK(cli::run({"train", "--family", "ip", "--out", (dir / "a").string()}) == cli::kExitUsage);
  CHECK(cli::run({"train", "--family", "ip", "--data-dir", "/nonexistent", "--out", (dir / "b").string()}) ==
        cli::kExitUsage);
  CHECK_FALSE(fs::exists(dir / "b"));
  CHECK(cli::run({"eval", "--out", (dir / "c").string()}) == cli::kExitUsage);
}

TEST_CASE("train, evaluate and reproduce") {
  Fixture f;
  const auto base = with({"train", "--family", "pn_ed", "--data-dir", f.data()}, kFast);
  REQUIRE(cli::run(with(base, {"--out", f.out("a")})) == cli::kExitOk);
  REQUIRE(cli::run(with(base, {"--out", f.out("b"), "--threads", "3"})) == cli::kExitOk);
  CHECK(slurp(fs::path(f.out("a")) / "model.json") == slurp(fs::path(f.out("b")) / "model.json"));

  const auto m = manifest(f.out("a"));
  CHECK(m["command"] == "train");
  CHECK(m["config"]["epochs"] == "3");
  CHECK(m["config"]["lr0"] == "0.01");
  CHECK(m["results"]["test_accuracy"].get<double>() > 0.9);
  CHECK(m["inputs"].contains("train_images"));
  CHECK(fs::exists(fs::path(f.out("a")) / "stats.csv"));

  REQUIRE(cli::run({"eval", "--model", f.out("a") + "/model.json", "--data-dir", f.data(), "--out", f.out("e")}) ==
          cli::kExitOk);
  CHECK(manifest(f.out("e"))["results"].dump().find("accuracy") != std::string::npos);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  Fixture f;
  {
    std::ofstream cfg(f.dir / "run.conf");
    cfg << "# test settings\nepochs = 2\nneurons-per-class = 2\nlr0 = 0.02\ninit = random\n";
  }
  REQUIRE(cli::run({"train", "--family", "ed", "--data-dir", f.data(), "--config", f.out("run.conf"), "--lr0", "0.005",
                    "--out", f.out("r")}) == cli::kExitOk);
  const auto m = manifest(f.out("r"));
  CHECK(m["config"]["epochs"] == "2");
  CHECK(m["config"]["init"] == "random");
  CHECK(m["config"]["lr0"] == "0.005");
  CHECK(m["config"]["lr_decay"] == "0.5");
}

TEST_CASE("convert, reject, adversarial and viz on a small model") {
  Fixture f;
  REQUIRE(cli::run(with({"train", "--family", "pn_ed", "--data-dir", f.data(), "--out", f.out("pn")}, kFast)) ==
          cli::kExitOk);
  REQUIRE(cli::run(with({"train", "--family", "ed", "--data-dir", f.data(), "--out", f.out("ed")}, kFast)) ==
          cli::kExitOk);
  REQUIRE(cli::run(with({"train", "--family", "ip", "--data-dir", f.data(), "--out", f.out("ip")}, kFast)) ==
          cli::kExitOk);
  const std::string pn = f.out("pn") + "/model.json";
  const std::string ed = f.out("ed") + "/model.json";
  const std::string ip = f.out("ip") + "/model.json";

  // ed -> ip keeps every prediction.
  REQUIRE(cli::run({"convert", "--model", ed, "--to", "ip", "--out", f.out("c1")}) == cli::kExitOk);
  REQUIRE(cli::run({"eval", "--model", f.out("c1") + "/model.json", "--data-dir", f.data(), "--out", f.out("e1")}) ==
          cli::kExitOk);
  REQUIRE(cli::run({"eval", "--model", ed, "--data-dir", f.data(), "--out", f.out("e0")}) == cli::kExitOk);
  const auto converted = manifest(f.out("e1"))["results"];
  const auto source = manifest(f.out("e0"))["results"];
  CHECK(converted["family"] == "ip");
  CHECK(converted["accuracy"] == source["accuracy"]);
  CHECK(converted["confusion"] == source["confusion"]);

  CHECK(cli::run({"convert", "--model", ip, "--to", "natural_ed", "--data-dir", f.data(), "--out", f.out("c2")}) ==
        cli::kExitOk);
  CHECK(cli::run({"convert", "--model", ip, "--to", "ed", "--alpha", "1", "--gamma", "0", "--out", f.out("c3")}) ==
        cli::kExitFailure);
  CHECK(cli::run({"convert", "--model", pn, "--to", "ed", "--out", f.out("c4")}) == cli::kExitUsage);
  CHECK(cli::run({"convert", "--model", pn, "--from", "ip", "--to", "ip", "--out", f.out("c5")}) == cli::kExitUsage);

  // Rejecting the test set against itself: acceptance + rejection = 1.
  {
    std::vector<data::GrayImage> imgs = data::load_idx_images(f.dir / "t10k-images-idx3-ubyte");
    data::write_idx_images(f.dir / "out-idx", imgs);
  }
  REQUIRE(cli::run({"reject", "--model", pn, "--data-dir", f.data(), "--outlier-images", f.out("out-idx"), "--out",
                    f.out("rej")}) == cli::kExitOk);
  std::ifstream sweep(fs::path(f.out("rej")) / "sweep_plus_ed.csv");
  std::string line;
  std::getline(sweep, line);
  CHECK(line == "threshold,acceptance_rate,rejection_rate");
  int rows = 0;
  while (std::getline(sweep, line)) {
    double t = 0, a = 0, r = 0;
    char c1 = 0, c2 = 0;
    std::istringstream(line) >> t >> c1 >> a >> c2 >> r;
    CHECK(a + r == doctest::Approx(1.0).epsilon(1e-6));
    ++rows;
  }
  CHECK(rows == 101);
  CHECK(fs::exists(fs::path(f.out("rej")) / "sweep_ip.csv"));
  CHECK(cli::run({"reject", "--model", pn, "--data-dir", f.data(), "--out", f.out("rej2")}) == cli::kExitUsage);
  CHECK(cli::run({"reject", "--model", ed, "--data-dir", f.data(), "--outlier-images", f.out("out-idx"), "--out",
                  f.out("rej3")}) == cli::kExitUsage);

  REQUIRE(cli::run({"adversarial", "--model", pn, "--data-dir", f.data(), "--type1-count", "10", "--type2-limit", "3",
                    "--max-iters", "5", "--out", f.out("adv")}) == cli::kExitOk);
  const auto adv = manifest(f.out("adv"));
  CHECK(adv["outputs"].size() >= 4);
  int manifest_rows = 0;
  for (const auto& [name, path] : adv["outputs"].items()) {
    if (name.find(".csv") == std::string::npos || name.find("sweep") != std::string::npos) continue;
    std::ifstream csv(path.get<std::string>());
    std::string l;
    std::getline(csv, l);
    while (std::getline(csv, l)) ++manifest_rows;
  }
  CHECK(manifest_rows == 10 + 9 * 3);

  REQUIRE(cli::run({"viz", "--model", pn, "--out", f.out("viz")}) == cli::kExitOk);
  for (const char* name : {"pos.png", "neg.png", "diff.png"}) CHECK(fs::exists(fs::path(f.out("viz")) / name));
  const auto img = viz::read_image(fs::path(f.out("viz")) / "pos.png");
  CHECK(img.rows == 10 * 29 + 1);
  CHECK(img.cols == 2 * 29 + 1);
  REQUIRE(cli::run({"viz", "--model", ip, "--format", "pgm", "--colormap", "grayscale", "--out", f.out("viz2")}) ==
          cli::kExitOk);
  CHECK(fs::exists(fs::path(f.out("viz2")) / "weights.pgm"));
  CHECK(cli::run({"viz", "--model", ip, "--grid-rows", "3", "--out", f.out("viz3")}) == cli::kExitFailure);
}

TEST_CASE("learning-rate cross-validation command") {
  Fixture f;
  REQUIRE(cli::run({"xval-lr", "--family", "ip", "--data-dir", f.data(), "--grid", "0.01,0.1", "--cv-epochs", "2",
                    "--folds", "3", "--neurons-per-class", "1", "--out", f.out("x")}) == cli::kExitOk);
  const auto m = manifest(f.out("x"));
  CHECK(m["results"]["grid"].size() == 2);
  const auto csv = slurp(fs::path(f.out("x")) / "xval.csv");
  CHECK(csv.rfind("lr0,mean_accuracy\n", 0) == 0);
  CHECK(cli::run({"xval-lr", "--family", "ip", "--data-dir", f.data(), "--grid", "a,b", "--out", f.out("y")}) ==
        cli::kExitUsage);
}
