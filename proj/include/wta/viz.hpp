#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "wta/numkernel.hpp"

namespace wta::viz {

enum class Colormap {
  /// v >= 0 -> green, v < 0 -> red, scaled by the largest |v| in the grid.
  signed_green_red,
  /// 0.5 - 0.5 v/s: positive values land in [0, 0.5], negative in [0.5, 1].
  grayscale,
};

struct GridSpec {
  std::size_t rows = 0;  // classes
  std::size_t cols = 0;  // neurons per class
  std::size_t cell_rows = 28;
  std::size_t cell_cols = 28;
  Colormap colormap = Colormap::signed_green_red;
};

/// Interleaved 8-bit image with 1 (gray) or 3 (RGB) channels.
struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> data;

  const std::uint8_t* pixel(std::size_t r, std::size_t c) const { return &data[(r * cols + c) * channels]; }
  bool operator==(const Image&) const = default;
};

/// Tiles the rows of `matrix` (one neuron per cell, row-major over the grid)
/// with 1-pixel white separators. Output is
/// (rows*(cell_rows+1)+1) x (cols*(cell_cols+1)+1).
Image render_signed_grid(const Matrix& matrix, const GridSpec& spec);

/// .png writes 8-bit gray or RGB; .pgm writes P5 and requires one channel.
void write_image(const Image& image, const std::filesystem::path& path);
Image read_image(const std::filesystem::path& path);

}  // namespace wta::viz
