#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wta/numkernel.hpp"

namespace wta::data {

/// 8-bit grayscale image, row-major.
struct GrayImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
  bool operator==(const GrayImage&) const = default;
};

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

std::vector<GrayImage> load_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

// Byte-buffer variants; `source` only feeds error messages.
std::vector<GrayImage> parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& source);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& source);

void write_idx_images(const std::filesystem::path& path, std::span<const GrayImage> images);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// Binary (P5) or ASCII (P2) PGM with maxval <= 255.
GrayImage load_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
/// 8-bit PNG; colour inputs are rejected.
GrayImage load_png_gray(const std::filesystem::path& path);

/// All .pgm/.png files in `dir`, sorted by filename. A file that fails to
/// parse throws, unless `permissive` is set, in which case it is reported on
/// stderr and skipped.
std::vector<GrayImage> load_grayscale_dir(const std::filesystem::path& dir, bool permissive = false);

/// Bilinear interpolation with pixel-centre alignment, rounded to the
/// nearest intensity.
GrayImage resize_bilinear(const GrayImage& image, std::size_t out_rows, std::size_t out_cols);

inline constexpr int kUnlabeled = -1;

/// Labelled feature vectors in [0,1]^D, one row per sample.
struct Dataset {
  std::string name;
  std::size_t dim = 0;
  std::size_t classes = 0;
  Matrix features;          // N x D
  std::vector<int> labels;  // kUnlabeled for outlier sets

  std::size_t size() const { return labels.size(); }
  bool labeled() const { return !labels.empty() && labels.front() != kUnlabeled; }
  Eigen::Ref<const Vector> sample(std::size_t i) const {
    return features.row(static_cast<Eigen::Index>(i)).transpose();
  }
  /// Samples per class; empty for unlabeled sets.
  std::vector<std::size_t> class_counts() const;
};

/// Flattens row-major and scales bytes by 1/255. Labels >= K throw
/// DomainError; count mismatch or mixed image sizes throw DimensionError.
Dataset assemble_dataset(std::span<const GrayImage> images,
                         std::optional<std::span<const std::uint8_t>> labels, std::size_t classes,
                         std::string name);

/// MNIST-style pair of IDX files.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t classes, std::string name);

/// Outlier directory resized to rows x cols, unlabeled.
Dataset load_outlier_dataset(const std::filesystem::path& dir, std::size_t rows, std::size_t cols,
                             std::size_t classes, bool permissive = false);

/// First n samples (or all if n >= size).
Dataset head(const Dataset& data, std::size_t n);
/// Rows selected by index, in the given order.
Dataset select(const Dataset& data, std::span<const std::size_t> indices, std::string name);

/// Inverse of the 1/255 scaling, rounded and clamped.
GrayImage to_image(const Eigen::Ref<const Vector>& features, std::size_t rows, std::size_t cols);

}  // namespace wta::data
