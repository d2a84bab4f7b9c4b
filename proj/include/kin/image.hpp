#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kin/tensor.hpp"

namespace kin {

/// Planar float image (channel, row, column), values nominally in [-1, 1].
///
/// Deliberately not a Tensor: whole-image buffers are I/O residency, reported
/// separately from the per-patch tensor memory the meter tracks.
class Image {
 public:
  Image() = default;
  Image(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f);

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t bytes() const noexcept { return data_.size() * sizeof(float); }

  float& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

// 8-bit <-> [-1, 1]: x / 127.5 - 1 and round(clamp((x + 1) * 127.5, 0, 255)).
float from_u8(std::uint8_t v) noexcept;
std::uint8_t to_u8(float v) noexcept;

/// Interleaved 8-bit RGB <-> planar float.
Image from_rgb8(std::span<const std::uint8_t> interleaved, std::size_t height, std::size_t width);
std::vector<std::uint8_t> to_rgb8(const Image& image);

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

/// Raw format: one line of JSON header `{"format":"rgb8","height":H,"width":W}`
/// terminated by '\n', followed by H*W*3 interleaved bytes.
Image read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const Image& image);

/// Dispatches on extension: .png or .rgb.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

Tensor to_tensor(const Image& image);
Image to_image(const Tensor& tensor);

/// Synthetic test pattern: horizontal ramp between two RGB colours in [-1, 1].
Image horizontal_gradient(std::size_t height, std::size_t width, std::span<const float, 3> left,
                          std::span<const float, 3> right);

}  // namespace kin
