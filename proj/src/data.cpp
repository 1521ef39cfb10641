#include "wta/data.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "wta/errors.hpp"

namespace wta::data {
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

void check_header(std::span<const std::uint8_t> bytes, std::size_t header, const std::string& source) {
  if (bytes.size() < header) {
    throw FormatError(source + ": truncated IDX header (" + std::to_string(bytes.size()) + " bytes, need " +
                      std::to_string(header) + ")");
  }
}

void check_magic(std::uint32_t actual, std::uint32_t expected, const std::string& source) {
  if (actual != expected) {
    throw FormatError(source + ": IDX magic " + std::to_string(actual) + ", expected " +
                      std::to_string(expected));
  }
}

}  // namespace

std::vector<GrayImage> parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& source) {
  check_header(bytes, 16, source);
  check_magic(read_be32(bytes, 0), kIdxImageMagic, source);
  const std::size_t count = read_be32(bytes, 4);
  const std::size_t rows = read_be32(bytes, 8);
  const std::size_t cols = read_be32(bytes, 12);
  const std::size_t need = 16 + count * rows * cols;
  if (bytes.size() < need) {
    throw FormatError(source + ": truncated IDX payload (" + std::to_string(bytes.size()) + " bytes, need " +
                      std::to_string(need) + ")");
  }
  std::vector<GrayImage> images(count);
  auto it = bytes.begin() + 16;
  for (auto& img : images) {
    img.rows = rows;
    img.cols = cols;
    img.pixels.assign(it, it + static_cast<std::ptrdiff_t>(rows * cols));
    it += static_cast<std::ptrdiff_t>(rows * cols);
  }
  return images;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& source) {
  check_header(bytes, 8, source);
  check_magic(read_be32(bytes, 0), kIdxLabelMagic, source);
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() < 8 + count) {
    throw FormatError(source + ": truncated IDX payload (" + std::to_string(bytes.size()) + " bytes, need " +
                      std::to_string(8 + count) + ")");
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

std::vector<GrayImage> load_idx_images(const fs::path& path) {
  const auto bytes = read_file(path);
  return parse_idx_images(bytes, path.string());
}

std::vector<std::uint8_t> load_idx_labels(const fs::path& path) {
  const auto bytes = read_file(path);
  return parse_idx_labels(bytes, path.string());
}

void write_idx_images(const fs::path& path, std::span<const GrayImage> images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t rows = images.empty() ? 0 : images.front().rows;
  const std::size_t cols = images.empty() ? 0 : images.front().cols;
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(images.size()));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  for (const auto& img : images) {
    if (img.rows != rows || img.cols != cols) throw DimensionError("write_idx_images: mixed image sizes");
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_idx_labels(const fs::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    tok.push_back(static_cast<char>(bytes[pos++]));
  }
  return tok;
}

std::size_t pgm_number(std::span<const std::uint8_t> bytes, std::size_t& pos, const std::string& source) {
  const auto tok = pgm_token(bytes, pos);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); })) {
    throw FormatError(source + ": bad PGM header token '" + tok + "'");
  }
  return std::stoul(tok);
}

}  // namespace

GrayImage load_pgm(const fs::path& path) {
  const auto bytes = read_file(path);
  const std::string source = path.string();
  std::size_t pos = 0;
  const auto magic = pgm_token(bytes, pos);
  if (magic != "P5" && magic != "P2") throw FormatError(source + ": not a PGM file (magic '" + magic + "')");
  GrayImage img;
  img.cols = pgm_number(bytes, pos, source);
  img.rows = pgm_number(bytes, pos, source);
  const std::size_t maxval = pgm_number(bytes, pos, source);
  if (img.rows == 0 || img.cols == 0) throw FormatError(source + ": zero-sized PGM");
  if (maxval == 0 || maxval > 255) throw FormatError(source + ": unsupported PGM maxval " + std::to_string(maxval));
  const std::size_t n = img.rows * img.cols;
  img.pixels.resize(n);
  auto rescale = [maxval](std::size_t v) {
    return static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  };
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + n) throw FormatError(source + ": truncated PGM payload");
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = rescale(bytes[pos + i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto tok = pgm_token(bytes, pos);
      if (tok.empty()) throw FormatError(source + ": truncated PGM payload");
      const std::size_t v = std::stoul(tok);
      if (v > maxval) throw FormatError(source + ": PGM value exceeds maxval");
      img.pixels[i] = rescale(v);
    }
  }
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << image.cols << ' ' << image.rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage load_png_gray(const fs::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw FormatError(path.string() + ": " + png.message);
  }
  if (png.format & PNG_FORMAT_FLAG_COLOR) {
    png_image_free(&png);
    throw FormatError(path.string() + ": colour PNG, expected 8-bit grayscale");
  }
  png.format = PNG_FORMAT_GRAY;
  GrayImage img;
  img.rows = png.height;
  img.cols = png.width;
  img.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    throw FormatError(path.string() + ": " + png.message);
  }
  return img;
}

std::vector<GrayImage> load_grayscale_dir(const fs::path& dir, bool permissive) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<GrayImage> images;
  for (const auto& file : files) {
    try {
      auto ext = file.extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".pgm") {
        images.push_back(load_pgm(file));
      } else if (ext == ".png") {
        images.push_back(load_png_gray(file));
      } else {
        throw FormatError(file.string() + ": unsupported image type");
      }
    } catch (const Error& e) {
      if (!permissive) throw;
      std::cerr << "skipping " << file.filename().string() << ": " << e.what() << '\n';
    }
  }
  return images;
}

GrayImage resize_bilinear(const GrayImage& image, std::size_t out_rows, std::size_t out_cols) {
  if (out_rows == 0 || out_cols == 0) throw DomainError("resize_bilinear: zero-sized target");
  if (image.rows == 0 || image.cols == 0) throw DomainError("resize_bilinear: empty source image");
  if (out_rows == image.rows && out_cols == image.cols) return image;

  // Source coordinate of an output pixel centre, clamped to the valid range.
  auto source_coord = [](std::size_t i, std::size_t in, std::size_t out) {
    const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };

  GrayImage out{out_rows, out_cols, std::vector<std::uint8_t>(out_rows * out_cols)};
  for (std::size_t r = 0; r < out_rows; ++r) {
    const double sr = source_coord(r, image.rows, out_rows);
    const auto r0 = static_cast<std::size_t>(sr);
    const std::size_t r1 = std::min(r0 + 1, image.rows - 1);
    const double fr = sr - static_cast<double>(r0);
    for (std::size_t c = 0; c < out_cols; ++c) {
      const double sc = source_coord(c, image.cols, out_cols);
      const auto c0 = static_cast<std::size_t>(sc);
      const std::size_t c1 = std::min(c0 + 1, image.cols - 1);
      const double fc = sc - static_cast<double>(c0);
      const double top = (1.0 - fc) * image.at(r0, c0) + fc * image.at(r0, c1);
      const double bottom = (1.0 - fc) * image.at(r1, c0) + fc * image.at(r1, c1);
      const double v = (1.0 - fr) * top + fr * bottom;
      out.pixels[r * out_cols + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  if (!labeled()) return {};
  std::vector<std::size_t> counts(classes, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

Dataset assemble_dataset(std::span<const GrayImage> images, std::optional<std::span<const std::uint8_t>> labels,
                         std::size_t classes, std::string name) {
  if (labels && labels->size() != images.size()) {
    throw DimensionError("assemble_dataset: " + std::to_string(images.size()) + " images but " +
                         std::to_string(labels->size()) + " labels");
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.classes = classes;
  ds.dim = images.empty() ? 0 : images.front().rows * images.front().cols;
  ds.features.resize(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(ds.dim));
  ds.labels.assign(images.size(), kUnlabeled);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.rows * img.cols != ds.dim) {
      throw DimensionError("assemble_dataset: image " + std::to_string(i) + " has " +
                           std::to_string(img.rows * img.cols) + " pixels, expected " + std::to_string(ds.dim) +
                           " (resize first)");
    }
    for (std::size_t p = 0; p < ds.dim; ++p) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = img.pixels[p] / 255.0;
    }
    if (labels) {
      const std::size_t l = (*labels)[i];
      if (l >= classes) {
        throw DomainError("assemble_dataset: label " + std::to_string(l) + " of sample " + std::to_string(i) +
                          " is not below K=" + std::to_string(classes));
      }
      ds.labels[i] = static_cast<int>(l);
    }
  }
  return ds;
}

Dataset load_idx_dataset(const fs::path& images, const fs::path& labels, std::size_t classes, std::string name) {
  const auto imgs = load_idx_images(images);
  const auto lbls = load_idx_labels(labels);
  return assemble_dataset(imgs, std::span<const std::uint8_t>(lbls), classes, std::move(name));
}

Dataset load_outlier_dataset(const fs::path& dir, std::size_t rows, std::size_t cols, std::size_t classes,
                             bool permissive) {
  auto images = load_grayscale_dir(dir, permissive);
  for (auto& img : images) img = resize_bilinear(img, rows, cols);
  return assemble_dataset(images, std::nullopt, classes, dir.filename().string());
}

Dataset head(const Dataset& data, std::size_t n) {
  n = std::min(n, data.size());
  Dataset out;
  out.name = data.name;
  out.dim = data.dim;
  out.classes = data.classes;
  out.features = data.features.topRows(static_cast<Eigen::Index>(n));
  out.labels.assign(data.labels.begin(), data.labels.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

Dataset select(const Dataset& data, std::span<const std::size_t> indices, std::string name) {
  Dataset out;
  out.name = std::move(name);
  out.dim = data.dim;
  out.classes = data.classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(data.dim));
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(indices[i]));
    out.labels[i] = data.labels[indices[i]];
  }
  return out;
}

GrayImage to_image(const Eigen::Ref<const Vector>& features, std::size_t rows, std::size_t cols) {
  if (static_cast<std::size_t>(features.size()) != rows * cols) {
    throw DimensionError("to_image: feature length does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  GrayImage img{rows, cols, std::vector<std::uint8_t>(rows * cols)};
  for (std::size_t i = 0; i < rows * cols; ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(features[static_cast<Eigen::Index>(i)] * 255.0), 0L, 255L));
  }
  return img;
}

}  // namespace wta::data
