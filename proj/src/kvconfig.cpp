#include "wta/kvconfig.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "wta/errors.hpp"

namespace wta {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string KeyValues::normalize_key(std::string key) {
  key = trim(key);
  while (!key.empty() && key.front() == '-') key.erase(key.begin());
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(source + ":" + std::to_string(number) + ": expected key = value");
    }
    const auto key = normalize_key(line.substr(0, eq));
    if (key.empty()) throw FormatError(source + ":" + std::to_string(number) + ": empty key");
    kv.set(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void KeyValues::set(const std::string& key, std::string value) { entries_[normalize_key(key)] = std::move(value); }

bool KeyValues::contains(const std::string& key) const { return entries_.count(normalize_key(key)) > 0; }

std::optional<std::string> KeyValues::get(const std::string& key) const {
  const auto it = entries_.find(normalize_key(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("setting '" + key + "': '" + *v + "' is not a number");
  }
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long long i = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return i;
  } catch (const std::exception&) {
    throw UsageError("setting '" + key + "': '" + *v + "' is not an integer");
  }
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const auto u = std::stoull(*v, &used);
    if (used != v->size() || v->front() == '-') throw std::invalid_argument(*v);
    return u;
  } catch (const std::exception&) {
    throw UsageError("setting '" + key + "': '" + *v + "' is not an unsigned integer");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw UsageError("setting '" + key + "': '" + *v + "' is not a boolean");
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

std::string KeyValues::dump() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  return out.str();
}

train::TrainConfig to_train_config(const KeyValues& kv, train::TrainConfig base) {
  base.epochs = static_cast<int>(kv.get_int("epochs", base.epochs));
  base.lr0 = kv.get_double("lr0", base.lr0);
  base.lr_decay = kv.get_double("lr_decay", base.lr_decay);
  const auto npc = kv.get_int("neurons_per_class", static_cast<long long>(base.neurons_per_class));
  if (npc < 1) throw UsageError("neurons_per_class must be at least 1");
  base.neurons_per_class = static_cast<std::size_t>(npc);
  if (const auto init = kv.get("init")) base.init = train::parse_init(*init);
  if (const auto beta = kv.get("beta0")) {
    base.beta0 = *beta == "auto" ? std::nullopt : std::optional<double>(kv.get_double("beta0", 1.0));
  }
  base.noise_sigma = kv.get_double("noise_sigma", base.noise_sigma);
  base.shuffle_seed = kv.get_u64("shuffle_seed", base.shuffle_seed);
  base.init_seed = kv.get_u64("init_seed", base.init_seed);
  base.validate();
  return base;
}

KeyValues to_key_values(const train::TrainConfig& c) {
  KeyValues kv;
  kv.set("epochs", std::to_string(c.epochs));
  kv.set("lr0", format_double(c.lr0));
  kv.set("lr_decay", format_double(c.lr_decay));
  kv.set("neurons_per_class", std::to_string(c.neurons_per_class));
  kv.set("init", train::to_string(c.init));
  kv.set("beta0", c.beta0 ? format_double(*c.beta0) : "auto");
  kv.set("noise_sigma", format_double(c.noise_sigma));
  kv.set("shuffle_seed", std::to_string(c.shuffle_seed));
  kv.set("init_seed", std::to_string(c.init_seed));
  return kv;
}

adversarial::AdversarialConfig to_adversarial_config(const KeyValues& kv, adversarial::AdversarialConfig base) {
  base.step_size = kv.get_double("step_size", base.step_size);
  base.max_iters = static_cast<int>(kv.get_int("max_iters", base.max_iters));
  base.target_confidence = kv.get_double("target_confidence", base.target_confidence);
  base.clip_lo = kv.get_double("clip_lo", base.clip_lo);
  base.clip_hi = kv.get_double("clip_hi", base.clip_hi);
  base.seed = kv.get_u64("attack_seed", base.seed);
  base.validate();
  return base;
}

KeyValues to_key_values(const adversarial::AdversarialConfig& c) {
  KeyValues kv;
  kv.set("step_size", format_double(c.step_size));
  kv.set("max_iters", std::to_string(c.max_iters));
  kv.set("target_confidence", format_double(c.target_confidence));
  kv.set("clip_lo", format_double(c.clip_lo));
  kv.set("clip_hi", format_double(c.clip_hi));
  kv.set("attack_seed", std::to_string(c.seed));
  return kv;
}

}  // namespace wta
