#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "wta/adversarial.hpp"
#include "wta/train.hpp"

namespace wta {

/// Plain-text `key = value` settings. `#` starts a comment; dashes in keys
/// are normalised to underscores so config keys match CLI flag names.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& source = "<config>");
  static KeyValues load(const std::filesystem::path& path);

  static std::string normalize_key(std::string key);

  void set(const std::string& key, std::string value);
  bool contains(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Later entries win.
  void merge(const KeyValues& other);

  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string dump() const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Keys: epochs, lr0, lr_decay, neurons_per_class, init, beta0 ("auto" or a
/// number), noise_sigma, shuffle_seed, init_seed.
train::TrainConfig to_train_config(const KeyValues& kv, train::TrainConfig base = {});
KeyValues to_key_values(const train::TrainConfig& config);

/// Keys: step_size, max_iters, target_confidence, clip_lo, clip_hi, attack_seed.
adversarial::AdversarialConfig to_adversarial_config(const KeyValues& kv, adversarial::AdversarialConfig base = {});
KeyValues to_key_values(const adversarial::AdversarialConfig& config);

}  // namespace wta
