#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "wta/data.hpp"
#include "wta/models.hpp"
#include "wta/numkernel.hpp"

namespace wta::testing {

inline Matrix random_matrix(num::SeededStream& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
  return m;
}

inline Vector random_vector(num::SeededStream& rng, std::size_t n, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.gaussian();
  return v;
}

inline Vector random_unit_box(num::SeededStream& rng, std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform();
  return v;
}

inline NeuronAssignment round_robin(std::size_t neurons, std::size_t classes) {
  std::vector<int> class_of(neurons);
  for (std::size_t j = 0; j < neurons; ++j) class_of[j] = static_cast<int>(j % classes);
  return NeuronAssignment(class_of, classes);
}

inline IpWtaModel random_ip(num::SeededStream& rng, std::size_t m, std::size_t d, std::size_t k) {
  return {random_matrix(rng, m, d), random_vector(rng, m), round_robin(m, k)};
}

inline EdWtaModel random_ed(num::SeededStream& rng, std::size_t m, std::size_t d, std::size_t k) {
  EdWtaModel ed{random_matrix(rng, m, d), random_vector(rng, m).cwiseAbs(), 1.0 + rng.uniform(), round_robin(m, k)};
  return ed;
}

inline PnEdWtaModel random_pn_ed(num::SeededStream& rng, std::size_t m, std::size_t d, std::size_t k) {
  return {random_matrix(rng, m, d, 0.5), random_matrix(rng, m, d, 0.5), 0.5 + rng.uniform(), round_robin(m, k)};
}

/// Labelled dataset with features in [0,1].
inline data::Dataset random_dataset(num::SeededStream& rng, std::size_t n, std::size_t d, std::size_t k) {
  data::Dataset ds;
  ds.name = "random";
  ds.dim = d;
  ds.classes = k;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < ds.features.size(); ++i) ds.features.data()[i] = rng.uniform();
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(i % k));
  return ds;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("wta-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace wta::testing
