#include "kin/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kin {

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << batch << ", " << channels << ", " << height << ", " << width << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::span<const float> values) : shape_(shape) {
  if (values.size() != shape.numel()) {
    throw Error("tensor: " + std::to_string(values.size()) + " values do not fill shape " +
                shape.str());
  }
  data_.assign(values.begin(), values.end());
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(message);
}

// Smallest integer o >= 0 with o * stride + offset >= 0.
std::ptrdiff_t first_valid(std::ptrdiff_t offset, int stride) {
  if (offset >= 0) return 0;
  return (-offset + stride - 1) / stride;
}

// One past the largest o with o * stride + offset < extent.
std::ptrdiff_t end_valid(std::ptrdiff_t offset, int stride, std::ptrdiff_t extent,
                         std::ptrdiff_t out_extent) {
  if (extent - offset <= 0) return 0;
  const std::ptrdiff_t n = (extent - offset - 1) / stride + 1;
  return std::min(n, out_extent);
}

std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const float> bias, int stride,
              Padding padding) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(ws.height >= 1 && ws.width >= 1, "conv2d: kernel must be at least 1x1");
  require(in.channels == ws.channels, "conv2d: input has " + std::to_string(in.channels) +
                                          " channels but weight " + ws.str() + " expects " +
                                          std::to_string(ws.channels));
  require(bias.empty() || bias.size() == ws.batch,
          "conv2d: bias length " + std::to_string(bias.size()) + " != output channels " +
              std::to_string(ws.batch));
  require(padding.top >= 0 && padding.bottom >= 0 && padding.left >= 0 && padding.right >= 0,
          "conv2d: negative padding");

  const auto padded_h = static_cast<std::ptrdiff_t>(in.height) + padding.top + padding.bottom;
  const auto padded_w = static_cast<std::ptrdiff_t>(in.width) + padding.left + padding.right;
  const auto kh = static_cast<std::ptrdiff_t>(ws.height);
  const auto kw = static_cast<std::ptrdiff_t>(ws.width);
  require(padded_h >= kh && padded_w >= kw,
          "conv2d: kernel " + ws.str() + " larger than padded input " + in.str());
  const std::ptrdiff_t out_h = (padded_h - kh) / stride + 1;
  const std::ptrdiff_t out_w = (padded_w - kw) / stride + 1;
  require(out_h > 0 && out_w > 0 && in.batch > 0, "conv2d: zero-size output");

  Tensor out(Shape{in.batch, ws.batch, static_cast<std::size_t>(out_h),
                   static_cast<std::size_t>(out_w)});
  const auto in_h = static_cast<std::ptrdiff_t>(in.height);
  const auto in_w = static_cast<std::ptrdiff_t>(in.width);

  for (std::size_t b = 0; b < in.batch; ++b) {
    for (std::size_t oc = 0; oc < ws.batch; ++oc) {
      float* dst = out.plane(b, oc);
      std::fill(dst, dst + out_h * out_w, bias.empty() ? 0.0f : bias[oc]);
      for (std::size_t ic = 0; ic < in.channels; ++ic) {
        const float* src = input.plane(b, ic);
        const float* wk = weight.plane(oc, ic);
        for (std::ptrdiff_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t row_off = ky - padding.top;
          const std::ptrdiff_t oy0 = first_valid(row_off, stride);
          const std::ptrdiff_t oy1 = end_valid(row_off, stride, in_h, out_h);
          for (std::ptrdiff_t kx = 0; kx < kw; ++kx) {
            const float w = wk[ky * kw + kx];
            const std::ptrdiff_t col_off = kx - padding.left;
            const std::ptrdiff_t ox0 = first_valid(col_off, stride);
            const std::ptrdiff_t ox1 = end_valid(col_off, stride, in_w, out_w);
            if (ox0 >= ox1) continue;
            for (std::ptrdiff_t oy = oy0; oy < oy1; ++oy) {
              const float* srow = src + (oy * stride + row_off) * in_w;
              float* drow = dst + oy * out_w;
              if (stride == 1) {
                for (std::ptrdiff_t ox = ox0; ox < ox1; ++ox) drow[ox] += w * srow[ox + col_off];
              } else {
                for (std::ptrdiff_t ox = ox0; ox < ox1; ++ox)
                  drow[ox] += w * srow[ox * stride + col_off];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, std::span<const float> bias,
                        int stride, int padding, int output_padding) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  require(stride >= 1, "conv_transpose2d: stride must be >= 1");
  require(padding >= 0 && output_padding >= 0, "conv_transpose2d: negative padding");
  require(output_padding < stride,
          "conv_transpose2d: output_padding must be smaller than stride");
  require(in.channels == ws.batch, "conv_transpose2d: input has " + std::to_string(in.channels) +
                                       " channels but weight " + ws.str() + " expects " +
                                       std::to_string(ws.batch));
  require(bias.empty() || bias.size() == ws.channels,
          "conv_transpose2d: bias length " + std::to_string(bias.size()) +
              " != output channels " + std::to_string(ws.channels));

  const auto kh = static_cast<std::ptrdiff_t>(ws.height);
  const auto kw = static_cast<std::ptrdiff_t>(ws.width);
  const auto in_h = static_cast<std::ptrdiff_t>(in.height);
  const auto in_w = static_cast<std::ptrdiff_t>(in.width);
  const std::ptrdiff_t out_h = (in_h - 1) * stride - 2 * padding + kh + output_padding;
  const std::ptrdiff_t out_w = (in_w - 1) * stride - 2 * padding + kw + output_padding;
  require(in_h > 0 && in_w > 0 && out_h > 0 && out_w > 0 && in.batch > 0,
          "conv_transpose2d: zero-size output");

  Tensor out(Shape{in.batch, ws.channels, static_cast<std::size_t>(out_h),
                   static_cast<std::size_t>(out_w)});
  for (std::size_t b = 0; b < in.batch; ++b) {
    for (std::size_t oc = 0; oc < ws.channels; ++oc) {
      float* dst = out.plane(b, oc);
      std::fill(dst, dst + out_h * out_w, bias.empty() ? 0.0f : bias[oc]);
      for (std::size_t ic = 0; ic < in.channels; ++ic) {
        const float* src = input.plane(b, ic);
        const float* wk = weight.plane(ic, oc);
        for (std::ptrdiff_t ky = 0; ky < kh; ++ky) {
          // oy = iy * stride + ky - padding must land in [0, out_h).
          const std::ptrdiff_t row_off = ky - padding;
          const std::ptrdiff_t iy0 = first_valid(row_off, stride);
          const std::ptrdiff_t iy1 = end_valid(row_off, stride, out_h, in_h);
          for (std::ptrdiff_t kx = 0; kx < kw; ++kx) {
            const float w = wk[ky * kw + kx];
            const std::ptrdiff_t col_off = kx - padding;
            const std::ptrdiff_t ix0 = first_valid(col_off, stride);
            const std::ptrdiff_t ix1 = end_valid(col_off, stride, out_w, in_w);
            for (std::ptrdiff_t iy = iy0; iy < iy1; ++iy) {
              const float* srow = src + iy * in_w;
              float* drow = dst + (iy * stride + row_off) * out_w;
              for (std::ptrdiff_t ix = ix0; ix < ix1; ++ix)
                drow[ix * stride + col_off] += w * srow[ix];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor reflection_pad2d(const Tensor& input, int pad) {
  const Shape& s = input.shape();
  require(pad >= 0, "reflection_pad2d: negative pad");
  require(static_cast<std::size_t>(pad) < std::min(s.height, s.width),
          "reflection_pad2d: pad " + std::to_string(pad) + " must be smaller than spatial dims of " +
              s.str());
  if (pad == 0) return input;

  const auto h = static_cast<std::ptrdiff_t>(s.height);
  const auto w = static_cast<std::ptrdiff_t>(s.width);
  const std::ptrdiff_t oh = h + 2 * pad;
  const std::ptrdiff_t ow = w + 2 * pad;
  Tensor out(Shape{s.batch, s.channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      const float* src = input.plane(b, c);
      float* dst = out.plane(b, c);
      for (std::ptrdiff_t y = 0; y < oh; ++y) {
        const float* srow = src + reflect_index(y - pad, h) * w;
        float* drow = dst + y * ow;
        for (std::ptrdiff_t x = 0; x < pad; ++x) drow[x] = srow[reflect_index(x - pad, w)];
        std::copy(srow, srow + w, drow + pad);
        for (std::ptrdiff_t x = pad + w; x < ow; ++x) drow[x] = srow[reflect_index(x - pad, w)];
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& input, std::size_t top, std::size_t left, std::size_t height,
            std::size_t width) {
  const Shape& s = input.shape();
  require(top + height <= s.height && left + width <= s.width,
          "crop: window exceeds tensor " + s.str());
  Tensor out(Shape{s.batch, s.channels, height, width});
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      const float* src = input.plane(b, c);
      float* dst = out.plane(b, c);
      for (std::size_t y = 0; y < height; ++y) {
        const float* srow = src + (top + y) * s.width + left;
        std::copy(srow, srow + width, dst + y * width);
      }
    }
  }
  return out;
}

ChannelStats channel_stats(const Tensor& input) {
  const Shape& s = input.shape();
  require(s.plane() >= 1, "channel_stats: empty spatial extent");
  ChannelStats stats{s.batch, s.channels, std::vector<float>(s.batch * s.channels),
                     std::vector<float>(s.batch * s.channels)};
  const auto n = static_cast<double>(s.plane());
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      const float* p = input.plane(b, c);
      double sum = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
      const double mean = sum / n;
      double sq = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
      stats.mu[b * s.channels + c] = static_cast<float>(mean);
      stats.sigma[b * s.channels + c] = static_cast<float>(std::sqrt(sq / n));
    }
  }
  return stats;
}

Tensor normalize_with_stats(const Tensor& input, const ChannelStats& stats,
                            std::span<const float> gamma, std::span<const float> beta, float eps) {
  const Shape& s = input.shape();
  require(stats.batch == s.batch && stats.channels == s.channels,
          "normalize_with_stats: statistics do not match tensor " + s.str());
  require(gamma.size() == s.channels && beta.size() == s.channels,
          "normalize_with_stats: gamma/beta length must equal channel count " +
              std::to_string(s.channels));
  Tensor out(s);
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      const float mu = stats.mu[b * s.channels + c];
      const float scale = gamma[c] / (stats.sigma[b * s.channels + c] + eps);
      const float shift = beta[c];
      const float* src = input.plane(b, c);
      float* dst = out.plane(b, c);
      for (std::size_t i = 0; i < s.plane(); ++i) dst[i] = (src[i] - mu) * scale + shift;
    }
  }
  return out;
}

Tensor relu(Tensor input) {
  for (float& v : input.data()) v = v > 0.0f ? v : 0.0f;
  return input;
}

Tensor tanh(Tensor input) {
  for (float& v : input.data()) v = std::tanh(v);
  return input;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " +
                                      b.shape().str());
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  return out;
}

Tensor bilinear_resize(std::span<const float> planes, std::size_t channels, std::size_t height,
                       std::size_t width, std::size_t out_height, std::size_t out_width) {
  require(planes.size() == channels * height * width, "bilinear_resize: buffer size mismatch");
  require(height > 0 && width > 0 && out_height > 0 && out_width > 0,
          "bilinear_resize: empty extent");

  struct Tap {
    std::size_t lo, hi;
    float frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> result(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      auto lo = static_cast<std::size_t>(src);
      if (lo > in - 1) lo = in - 1;
      const std::size_t hi = std::min(lo + 1, in - 1);
      result[o] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
    }
    return result;
  };
  const auto ty = taps(height, out_height);
  const auto tx = taps(width, out_width);

  Tensor out(Shape{1, channels, out_height, out_width});
  for (std::size_t c = 0; c < channels; ++c) {
    const float* src = planes.data() + c * height * width;
    float* dst = out.plane(0, c);
    for (std::size_t y = 0; y < out_height; ++y) {
      const float* r0 = src + ty[y].lo * width;
      const float* r1 = src + ty[y].hi * width;
      const float fy = ty[y].frac;
      for (std::size_t x = 0; x < out_width; ++x) {
        const float fx = tx[x].frac;
        const float top = r0[tx[x].lo] + (r0[tx[x].hi] - r0[tx[x].lo]) * fx;
        const float bottom = r1[tx[x].lo] + (r1[tx[x].hi] - r1[tx[x].lo]) * fx;
        dst[y * out_width + x] = top + (bottom - top) * fy;
      }
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, std::size_t out_height, std::size_t out_width) {
  const Shape& s = input.shape();
  require(s.batch == 1, "bilinear_resize: batch must be 1");
  return bilinear_resize(input.data(), s.channels, s.height, s.width, out_height, out_width);
}

}  // namespace kin
