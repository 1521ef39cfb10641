#include "wta/viz.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>

#include "wta/data.hpp"
#include "wta/errors.hpp"

namespace wta::viz {
namespace fs = std::filesystem;

Image render_signed_grid(const Matrix& matrix, const GridSpec& spec) {
  const auto cells = spec.rows * spec.cols;
  if (cells != static_cast<std::size_t>(matrix.rows())) {
    throw DimensionError("render_signed_grid: " + std::to_string(spec.rows) + "x" + std::to_string(spec.cols) +
                         " grid does not hold " + std::to_string(matrix.rows()) + " neurons");
  }
  if (spec.cell_rows * spec.cell_cols != static_cast<std::size_t>(matrix.cols())) {
    throw DimensionError("render_signed_grid: " + std::to_string(spec.cell_rows) + "x" +
                         std::to_string(spec.cell_cols) + " cells do not hold D=" + std::to_string(matrix.cols()));
  }
  Image img;
  img.channels = spec.colormap == Colormap::grayscale ? 1 : 3;
  img.rows = spec.rows * (spec.cell_rows + 1) + 1;
  img.cols = spec.cols * (spec.cell_cols + 1) + 1;
  img.data.assign(img.rows * img.cols * img.channels, 255);

  const double scale = matrix.size() == 0 ? 0.0 : matrix.cwiseAbs().maxCoeff();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t top = (cell / spec.cols) * (spec.cell_rows + 1) + 1;
    const std::size_t left = (cell % spec.cols) * (spec.cell_cols + 1) + 1;
    for (std::size_t r = 0; r < spec.cell_rows; ++r) {
      for (std::size_t c = 0; c < spec.cell_cols; ++c) {
        const double v = matrix(static_cast<Eigen::Index>(cell), static_cast<Eigen::Index>(r * spec.cell_cols + c));
        const double rel = scale > 0.0 ? v / scale : 0.0;
        std::uint8_t* px = &img.data[((top + r) * img.cols + left + c) * img.channels];
        if (spec.colormap == Colormap::grayscale) {
          px[0] = static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * (0.5 - 0.5 * rel)), 0L, 255L));
        } else {
          const auto level = static_cast<std::uint8_t>(std::min(255.0, std::floor(255.0 * std::abs(rel))));
          px[0] = v < 0.0 ? level : 0;
          px[1] = v >= 0.0 ? level : 0;
          px[2] = 0;
        }
      }
    }
  }
  return img;
}

void write_image(const Image& image, const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") {
    if (image.channels != 1) {
      throw InvalidParameter("write_image: PGM output needs a single-channel image; render with the grayscale colormap");
    }
    data::write_pgm(path, data::GrayImage{image.rows, image.cols, image.data});
    return;
  }
  if (ext != ".png") throw InvalidParameter("write_image: unsupported extension '" + ext + "' (use .png or .pgm)");
  if (image.channels != 1 && image.channels != 3) throw InvalidParameter("write_image: need 1 or 3 channels");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.cols);
  png.height = static_cast<png_uint_32>(image.rows);
  png.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.data.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("write_image: " + path.string() + ": " + msg);
  }
}

Image read_image(const fs::path& path) {
  if (path.extension() == ".pgm") {
    auto gray = data::load_pgm(path);
    return Image{gray.rows, gray.cols, 1, std::move(gray.pixels)};
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) throw IoError(path.string() + ": " + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img;
  img.rows = png.height;
  img.cols = png.width;
  img.channels = color ? 3 : 1;
  img.data.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + png.message);
  }
  return img;
}

}  // namespace wta::viz
