#include "ncsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "ncsr/checkpoint.hpp"
#include "ncsr/resize.hpp"
#include "ncsr/rng.hpp"

namespace ncsr {

namespace {

struct FileCloser {
  void operator()(FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngError {
  char message[256] = "";
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<PngError*>(png_get_error_ptr(png));
  std::snprintf(err->message, sizeof err->message, "%s", msg);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

double pixel_std(const Tensor& t) {
  const double m = mean(t);
  double s = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) s += (t[i] - m) * (t[i] - m);
  return std::sqrt(s / static_cast<double>(t.size()));
}

}  // namespace

Tensor load_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path + ": not a PNG file");
  }

  PngError err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  std::string unsupported;
  png_uint_32 width = 0, height = 0;
  volatile int channels = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": " + err.message);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  const int interlace = png_get_interlace_type(png, info);
  if (depth != 8) unsupported = "bit depth " + std::to_string(depth) + " (only 8-bit is supported)";
  else if (interlace != PNG_INTERLACE_NONE) unsupported = "interlaced PNG is not supported";
  else if (color == PNG_COLOR_TYPE_PALETTE) unsupported = "palette PNG is not supported";
  else if (color == PNG_COLOR_TYPE_GRAY) channels = 1;
  else if (color == PNG_COLOR_TYPE_RGB) channels = 3;
  else unsupported = "colour type with alpha is not supported";
  if (!unsupported.empty()) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": " + unsupported);
  }

  const size_t stride = static_cast<size_t>(width) * static_cast<size_t>(channels);
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 i = 0; i < height; ++i) rows[i] = pixels.data() + i * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor out(Shape{1, 3, height, width});
  for (int64_t i = 0; i < height; ++i)
    for (int64_t j = 0; j < width; ++j)
      for (int64_t c = 0; c < 3; ++c) {
        const unsigned char b = pixels[static_cast<size_t>(i) * stride + static_cast<size_t>(j * channels + (channels == 3 ? c : 0))];
        out.at(0, c, i, j) = b / 255.0;
      }
  return out;
}

void save_png(const std::string& path, const Tensor& img) {
  const Shape& s = img.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("save_png expects (1, 3, H, W), got " + s.str());
  std::vector<unsigned char> pixels(static_cast<size_t>(s.h * s.w * 3));
  for (int64_t i = 0; i < s.h; ++i)
    for (int64_t j = 0; j < s.w; ++j)
      for (int64_t c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(0, c, i, j), 0.0, 1.0);
        pixels[static_cast<size_t>((i * s.w + j) * 3 + c)] = static_cast<unsigned char>(std::lround(v * 255.0));
      }

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path);
  PngError err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(static_cast<size_t>(s.h));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path + ": " + err.message);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(s.w), static_cast<png_uint_32>(s.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t i = 0; i < s.h; ++i) rows[static_cast<size_t>(i)] = pixels.data() + i * s.w * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImagePair make_pair(const Tensor& hr, int scale, int multiple) {
  require(scale == 2 || scale == 4 || scale == 8, "make_pair: scale must be 2, 4 or 8");
  require(multiple >= scale && multiple % scale == 0, "make_pair: crop multiple must be a multiple of the scale");
  const Shape& s = hr.shape();
  const int64_t h = s.h / multiple * multiple;
  const int64_t w = s.w / multiple * multiple;
  if (h == 0 || w == 0) {
    throw ShapeError("image " + s.str() + " is smaller than the minimum side " + std::to_string(multiple));
  }
  const int64_t top = (s.h - h) / 2;
  const int64_t left = (s.w - w) / 2;
  ImagePair p;
  p.hr = Tensor(Shape{s.n, s.c, h, w});
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) p.hr.at(n, c, i, j) = hr.at(n, c, top + i, left + j);
  p.lr = bicubic_resize(p.hr, 1, scale);
  return p;
}

namespace {

Tensor synth_image(Rng& rng, int size, int family) {
  Tensor img(Shape{1, 3, size, size});
  const double n = static_cast<double>(size);
  const double two_pi = 2.0 * std::numbers::pi;
  // A smooth colour gradient under every pattern.
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.2 + 0.6 * rng.uniform();
    gx[c] = 0.4 * (rng.uniform() - 0.5);
    gy[c] = 0.4 * (rng.uniform() - 0.5);
  }
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) img.at(0, c, i, j) = base[c] + gx[c] * (j / n - 0.5) + gy[c] * (i / n - 0.5);

  if (family == 0) {
    const int blobs = 3 + static_cast<int>(rng.below(4));
    for (int b = 0; b < blobs; ++b) {
      const double cy = n * rng.uniform(), cx = n * rng.uniform();
      const double sigma = n * (0.04 + 0.12 * rng.uniform());
      double amp[3];
      for (double& a : amp) a = 0.8 * (rng.uniform() - 0.5);
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
          const double r2 = ((i - cy) * (i - cy) + (j - cx) * (j - cx)) / (2.0 * sigma * sigma);
          const double g = std::exp(-r2);
          for (int c = 0; c < 3; ++c) img.at(0, c, i, j) += amp[c] * g;
        }
    }
  } else if (family == 1) {
    const double freq = 2.0 + 10.0 * rng.uniform();
    const double angle = std::numbers::pi * rng.uniform();
    const double phase = two_pi * rng.uniform();
    const double amp = 0.15 + 0.2 * rng.uniform();
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        const double t = (std::cos(angle) * j + std::sin(angle) * i) / n;
        const double v = amp * std::sin(two_pi * freq * t + phase);
        for (int c = 0; c < 3; ++c) img.at(0, c, i, j) += v * (c == 1 ? 0.7 : 1.0);
      }
  } else {
    const int cell = 2 + static_cast<int>(rng.below(7));
    const int oy = static_cast<int>(rng.below(static_cast<uint64_t>(cell)));
    const int ox = static_cast<int>(rng.below(static_cast<uint64_t>(cell)));
    const double amp = 0.15 + 0.2 * rng.uniform();
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        const bool on = (((i + oy) / cell) + ((j + ox) / cell)) % 2 == 0;
        for (int c = 0; c < 3; ++c) img.at(0, c, i, j) += on ? amp : -amp;
      }
  }
  for (int64_t i = 0; i < img.size(); ++i) img[i] = std::round(std::clamp(img[i], 0.0, 1.0) * 255.0) / 255.0;
  return img;
}

}  // namespace

std::vector<ImageRecord> synth_corpus(const SyntheticCorpusSpec& spec) {
  require(spec.n_images >= 1, "synthetic corpus needs n_images >= 1");
  require(spec.size >= 4, "synthetic corpus needs size >= 4");
  const Rng root(spec.seed);
  std::vector<ImageRecord> out;
  for (int k = 0; k < spec.n_images; ++k) {
    Rng rng = root.derive(static_cast<uint64_t>(k));
    Tensor img = synth_image(rng, spec.size, k % 3);
    while (pixel_std(img) <= 0.05) img = synth_image(rng, spec.size, k % 3);
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03d", k);
    out.push_back(ImageRecord{id, "", std::move(img)});
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected 'id<TAB>hr_path'");
    }
    std::filesystem::path p = line.substr(tab + 1);
    if (p.is_relative()) p = dir / p;
    out.push_back(ManifestEntry{line.substr(0, tab), p.string()});
  }
  if (out.empty()) throw FormatError("manifest " + path + " lists no images");
  return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const ManifestEntry& e : entries) text += e.id + "\t" + e.hr_path + "\n";
  write_file(path, text);
}

}  // namespace ncsr
