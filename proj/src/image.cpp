#include "kin/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>

namespace kin {

Image::Image(std::size_t channels, std::size_t height, std::size_t width, float fill)
    : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {}

float from_u8(std::uint8_t v) noexcept { return static_cast<float>(v) / 127.5f - 1.0f; }

std::uint8_t to_u8(float v) noexcept {
  float x = (v + 1.0f) * 127.5f;
  if (!(x > 0.0f)) x = 0.0f;  // also maps NaN to 0
  if (x > 255.0f) x = 255.0f;
  return static_cast<std::uint8_t>(std::lround(x));
}

Image from_rgb8(std::span<const std::uint8_t> interleaved, std::size_t height, std::size_t width) {
  if (interleaved.size() != height * width * 3) throw Error("rgb8 buffer size mismatch");
  Image img(3, height, width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = from_u8(interleaved[(y * width + x) * 3 + c]);
  return img;
}

std::vector<std::uint8_t> to_rgb8(const Image& image) {
  if (image.channels() != 3) throw Error("to_rgb8: image must have 3 channels");
  std::vector<std::uint8_t> out(image.height() * image.width() * 3);
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c) out[(y * image.width() + x) * 3 + c] = to_u8(image.at(c, y, x));
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error("cannot open '" + path.string() + "'");
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  *text = message;
  png_longjmp(png, 1);
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error("libpng initialisation failed");

  std::vector<std::uint8_t> pixels;
  png_uint_32 width = 0, height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("reading PNG '" + path.string() + "': " + error);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("unsupported PNG layout in '" + path.string() + "'");
  }
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_rgb8(pixels, height, width);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const auto pixels = to_rgb8(image);
  FilePtr file = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error("libpng initialisation failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("writing PNG '" + path.string() + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * image.width() * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error("raw image '" + path.string() + "': bad header: " + e.what());
  }
  if (h.value("format", "") != "rgb8") throw Error("raw image: unsupported format");
  const auto height = h.at("height").get<std::size_t>();
  const auto width = h.at("width").get<std::size_t>();
  std::vector<std::uint8_t> pixels(height * width * 3);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw Error("raw image '" + path.string() + "' is truncated");
  }
  return from_rgb8(pixels, height, width);
}

void write_raw(const std::filesystem::path& path, const Image& image) {
  const auto pixels = to_rgb8(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const nlohmann::json h = {{"format", "rgb8"}, {"height", image.height()}, {"width", image.width()}};
  out << h.dump() << '\n';
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

Image read_image(const std::filesystem::path& path) {
  if (path.extension() == ".rgb") return read_raw(path);
  return read_png(path);
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (path.extension() == ".rgb") {
    write_raw(path, image);
  } else {
    write_png(path, image);
  }
}

Tensor to_tensor(const Image& image) {
  return Tensor(Shape{1, image.channels(), image.height(), image.width()}, image.data());
}

Image to_image(const Tensor& tensor) {
  const Shape& s = tensor.shape();
  if (s.batch != 1) throw Error("to_image: batch must be 1");
  Image img(s.channels, s.height, s.width);
  std::copy(tensor.data().begin(), tensor.data().end(), img.data().begin());
  return img;
}

Image horizontal_gradient(std::size_t height, std::size_t width, std::span<const float, 3> left,
                          std::span<const float, 3> right) {
  Image img(3, height, width);
  for (std::size_t x = 0; x < width; ++x) {
    const float t = width > 1 ? static_cast<float>(x) / static_cast<float>(width - 1) : 0.0f;
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = left[c] + (right[c] - left[c]) * t;
      for (std::size_t y = 0; y < height; ++y) img.at(c, y, x) = v;
    }
  }
  return img;
}

}  // namespace kin
