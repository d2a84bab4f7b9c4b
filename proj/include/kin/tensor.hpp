#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kin/memory.hpp"

namespace kin {

/// Raised for shape mismatches, violated preconditions and malformed inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t numel() const noexcept { return batch * channels * height * width; }
  std::size_t plane() const noexcept { return height * width; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense (batch, channel, height, width) float32 array, row-major.
class Tensor {
 public:
  using Storage = std::vector<float, TrackingAllocator<float>>;

  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::span<const float> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t bytes() const noexcept { return data_.size() * sizeof(float); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  float* plane(std::size_t b, std::size_t c) noexcept {
    return data_.data() + (b * shape_.channels + c) * shape_.plane();
  }
  const float* plane(std::size_t b, std::size_t c) const noexcept {
    return data_.data() + (b * shape_.channels + c) * shape_.plane();
  }

  float& at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((b * shape_.channels + c) * shape_.height + h) * shape_.width + w];
  }
  float at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((b * shape_.channels + c) * shape_.height + h) * shape_.width + w];
  }

 private:
  Shape shape_;
  Storage data_;
};

/// Explicit per-side zero padding for conv2d.
struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;

  static Padding uniform(int p) { return {p, p, p, p}; }
};

/// Per-(batch, channel) statistics; index with `b * channels + c`.
struct ChannelStats {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::vector<float> mu;
  std::vector<float> sigma;
};

// Cross-correlation. weight is [Cout, Cin, kh, kw]; bias may be empty.
Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const float> bias, int stride,
              Padding padding);

// Transposed convolution. weight is [Cin, Cout, kh, kw] (gradient-of-conv2d layout).
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, std::span<const float> bias,
                        int stride, int padding, int output_padding);

// Mirror padding that does not repeat the edge pixel; requires pad < min(H, W).
Tensor reflection_pad2d(const Tensor& input, int pad);

Tensor crop(const Tensor& input, std::size_t top, std::size_t left, std::size_t height,
            std::size_t width);

// Mean and population standard deviation over H*W, accumulated in double.
ChannelStats channel_stats(const Tensor& input);

// gamma * (x - mu) / (sigma + eps) + beta, per channel.
Tensor normalize_with_stats(const Tensor& input, const ChannelStats& stats,
                            std::span<const float> gamma, std::span<const float> beta, float eps);

Tensor relu(Tensor input);
Tensor tanh(Tensor input);
Tensor add(const Tensor& a, const Tensor& b);

/// Bilinear resampling with half-pixel centers (align_corners = false), no
/// antialiasing. `planes` holds `channels` row-major planes of height x width.
Tensor bilinear_resize(std::span<const float> planes, std::size_t channels, std::size_t height,
                       std::size_t width, std::size_t out_height, std::size_t out_width);
Tensor bilinear_resize(const Tensor& input, std::size_t out_height, std::size_t out_width);

}  // namespace kin
