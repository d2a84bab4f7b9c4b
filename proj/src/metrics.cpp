#include "kin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace kin {

namespace {

double to_255(float v) { return (static_cast<double>(v) + 1.0) * 127.5; }

void require_same_dims(const Image& a, const Image& b, const char* what) {
  if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) {
    throw Error(std::string(what) + ": image dimensions differ");
  }
}

// Summed-area table with one row/column of zero padding.
class Integral {
 public:
  Integral(std::size_t h, std::size_t w) : w_(w + 1), sums_((h + 1) * (w + 1), 0.0) {}

  template <class F>
  void build(std::size_t h, std::size_t w, F&& value) {
    for (std::size_t y = 0; y < h; ++y) {
      double row = 0.0;
      for (std::size_t x = 0; x < w; ++x) {
        row += value(y, x);
        sums_[(y + 1) * w_ + x + 1] = sums_[y * w_ + x + 1] + row;
      }
    }
  }

  double box(std::size_t y, std::size_t x, std::size_t n) const {
    return sums_[(y + n) * w_ + x + n] - sums_[y * w_ + x + n] - sums_[(y + n) * w_ + x] +
           sums_[y * w_ + x];
  }

 private:
  std::size_t w_;
  std::vector<double> sums_;
};

}  // namespace

nlohmann::json MetricReport::to_json() const {
  return {{"metric", metric},
          {"value", value},
          {"parameters", parameters},
          {"images", images},
          {"degenerate", degenerate}};
}

HistogramCorrelation histogram_correlation(const Image& a, const Image& b, int bins) {
  if (a.channels() != b.channels()) throw Error("histogram_correlation: channel counts differ");
  if (bins < 1 || bins > 256) throw Error("histogram_correlation: bins must be in [1, 256]");
  const auto nb = static_cast<std::size_t>(bins);

  auto histogram = [&](const Image& img) {
    std::vector<double> h(img.channels() * nb, 0.0);
    const std::size_t plane = img.height() * img.width();
    if (plane == 0) return h;
    for (std::size_t c = 0; c < img.channels(); ++c) {
      const float* p = img.data().data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) h[c * nb + to_u8(p[i]) * nb / 256] += 1.0;
      for (std::size_t k = 0; k < nb; ++k) h[c * nb + k] /= static_cast<double>(plane);
    }
    return h;
  };
  const auto ha = histogram(a);
  const auto hb = histogram(b);

  const double n = static_cast<double>(ha.size());
  const double ma = std::accumulate(ha.begin(), ha.end(), 0.0) / n;
  const double mb = std::accumulate(hb.begin(), hb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ha.size(); ++i) {
    const double da = ha[i] - ma;
    const double db = hb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return {0.0, true};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

double sobel_gradient_ycbcr(const Image& rgb) {
  if (rgb.channels() != 3) throw Error("sobel_gradient_ycbcr: expected an RGB image");
  const std::size_t h = rgb.height();
  const std::size_t w = rgb.width();
  if (h < 3 || w < 3) return 0.0;

  std::vector<double> ycc(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double r = to_255(rgb.at(0, y, x));
      const double g = to_255(rgb.at(1, y, x));
      const double b = to_255(rgb.at(2, y, x));
      ycc[(0 * h + y) * w + x] = 0.299 * r + 0.587 * g + 0.114 * b;
      ycc[(1 * h + y) * w + x] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
      ycc[(2 * h + y) * w + x] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }

  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double* p = ycc.data() + c * h * w;
    auto v = [&](std::size_t y, std::size_t x) { return p[y * w + x]; };
    for (std::size_t y = 1; y + 1 < h; ++y) {
      for (std::size_t x = 1; x + 1 < w; ++x) {
        const double gx = (v(y - 1, x + 1) + 2.0 * v(y, x + 1) + v(y + 1, x + 1)) -
                          (v(y - 1, x - 1) + 2.0 * v(y, x - 1) + v(y + 1, x - 1));
        const double gy = (v(y + 1, x - 1) + 2.0 * v(y + 1, x) + v(y + 1, x + 1)) -
                          (v(y - 1, x - 1) + 2.0 * v(y - 1, x) + v(y - 1, x + 1));
        total += std::sqrt(gx * gx + gy * gy);
      }
    }
  }
  return total / (3.0 * static_cast<double>((h - 2) * (w - 2)));
}

double ssim(const Image& a, const Image& b, int window) {
  require_same_dims(a, b, "ssim");
  if (window < 1) throw Error("ssim: window must be positive");
  const auto n = static_cast<std::size_t>(window);
  const std::size_t h = a.height();
  const std::size_t w = a.width();
  if (h < n || w < n) throw Error("ssim: image smaller than the window");
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const double count = static_cast<double>(n * n);

  double total = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    // Centered values keep the second moments well conditioned.
    auto va = [&](std::size_t y, std::size_t x) { return to_255(a.at(c, y, x)) - 127.5; };
    auto vb = [&](std::size_t y, std::size_t x) { return to_255(b.at(c, y, x)) - 127.5; };
    Integral sa(h, w), sb(h, w), saa(h, w), sbb(h, w), sab(h, w);
    sa.build(h, w, va);
    sb.build(h, w, vb);
    saa.build(h, w, [&](std::size_t y, std::size_t x) { return va(y, x) * va(y, x); });
    sbb.build(h, w, [&](std::size_t y, std::size_t x) { return vb(y, x) * vb(y, x); });
    sab.build(h, w, [&](std::size_t y, std::size_t x) { return va(y, x) * vb(y, x); });
    for (std::size_t y = 0; y + n <= h; ++y) {
      for (std::size_t x = 0; x + n <= w; ++x) {
        const double ma = sa.box(y, x, n) / count;
        const double mb = sb.box(y, x, n) / count;
        const double var_a = saa.box(y, x, n) / count - ma * ma;
        const double var_b = sbb.box(y, x, n) / count - mb * mb;
        const double cov = sab.box(y, x, n) / count - ma * mb;
        // Shift the means back to the 8-bit scale for the luminance term.
        const double ua = ma + 127.5;
        const double ub = mb + 127.5;
        total += ((2.0 * ua * ub + c1) * (2.0 * cov + c2)) /
                 ((ua * ua + ub * ub + c1) * (var_a + var_b + c2));
      }
    }
  }
  const double windows = static_cast<double>((h - n + 1) * (w - n + 1) * a.channels());
  return total / windows;
}

double seam_discrepancy(const Image& image, const TileGrid& grid) {
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  const std::size_t p = grid.patch;
  if (p == 0) throw Error("seam_discrepancy: grid has no patch size");
  if (h > grid.covered_h() || w > grid.covered_w()) {
    throw Error("seam_discrepancy: grid does not cover the image");
  }

  double border_sum = 0.0, control_sum = 0.0;
  std::size_t border_n = 0, control_n = 0;
  auto diff = [&](std::size_t c, std::size_t y0, std::size_t x0, std::size_t y1, std::size_t x1) {
    return std::abs(static_cast<double>(image.at(c, y0, x0)) - static_cast<double>(image.at(c, y1, x1)));
  };

  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t x = p; x < w; x += p) {  // vertical borders between x-1 and x
      for (std::size_t y = 0; y < h; ++y) {
        border_sum += diff(c, y, x - 1, y, x);
        ++border_n;
        if (x >= 2) {
          control_sum += diff(c, y, x - 2, y, x - 1);
          ++control_n;
        }
        if (x + 1 < w) {
          control_sum += diff(c, y, x, y, x + 1);
          ++control_n;
        }
      }
    }
    for (std::size_t y = p; y < h; y += p) {  // horizontal borders between y-1 and y
      for (std::size_t x = 0; x < w; ++x) {
        border_sum += diff(c, y - 1, x, y, x);
        ++border_n;
        if (y >= 2) {
          control_sum += diff(c, y - 2, x, y - 1, x);
          ++control_n;
        }
        if (y + 1 < h) {
          control_sum += diff(c, y, x, y + 1, x);
          ++control_n;
        }
      }
    }
  }
  if (border_n == 0) return 0.0;
  const double border = border_sum / static_cast<double>(border_n);
  const double control = control_n ? control_sum / static_cast<double>(control_n) : 0.0;
  return border - control;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

namespace {

double l2_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

std::vector<StatSimilarityRecord> stats_similarity(const Generator& gen, const Image& image,
                                                   const TileGrid& grid,
                                                   const StatsSimilarityOptions& opts) {
  const int sites = gen.config().norm_site_count();
  std::vector<int> layers = opts.layers;
  if (layers.empty()) {
    layers.resize(static_cast<std::size_t>(sites));
    std::iota(layers.begin(), layers.end(), 1);
  }
  for (int id : layers) {
    if (id < 1 || id > sites) throw Error("stats_similarity: no norm layer " + std::to_string(id));
  }

  const auto coords = patch_coords(grid);
  std::vector<std::vector<LayerStats>> probes;
  probes.reserve(coords.size());
  for (Coord at : coords) probes.push_back(gen.stat_probe(extract_patch(image, grid, at)));

  struct Pair {
    std::size_t a, b;
    double distance;
  };
  std::vector<Pair> pairs;
  const double p = static_cast<double>(grid.patch);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t j = opts.include_self_pairs ? i : i + 1; j < coords.size(); ++j) {
      const double dr = coords[i].row - coords[j].row;
      const double dc = coords[i].col - coords[j].col;
      const double d = p * std::sqrt(dr * dr + dc * dc);
      if (d <= opts.max_distance_px) pairs.push_back({i, j, d});
    }
  }
  if (opts.max_pairs > 0 && pairs.size() > opts.max_pairs) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(opts.max_pairs);
    std::sort(pairs.begin(), pairs.end(),
              [](const Pair& x, const Pair& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  }

  std::vector<StatSimilarityRecord> records;
  records.reserve(pairs.size() * layers.size());
  for (const Pair& pr : pairs) {
    for (int id : layers) {
      const LayerStats& sa = probes[pr.a][static_cast<std::size_t>(id - 1)];
      const LayerStats& sb = probes[pr.b][static_cast<std::size_t>(id - 1)];
      records.push_back({id, coords[pr.a], coords[pr.b], pr.distance,
                         cosine_similarity(sa.mu, sb.mu), cosine_similarity(sa.sigma, sb.sigma),
                         l2_distance(sa.mu, sb.mu), l2_distance(sa.sigma, sb.sigma)});
    }
  }
  return records;
}

std::string stats_similarity_csv(const std::vector<StatSimilarityRecord>& records) {
  std::ostringstream os;
  os.precision(9);
  os << "layer_id,row_a,col_a,row_b,col_b,distance_px,cosine_mu,cosine_sigma,l2_mu,l2_sigma\n";
  for (const auto& r : records) {
    os << r.layer_id << ',' << r.a.row << ',' << r.a.col << ',' << r.b.row << ',' << r.b.col << ','
       << r.distance_px << ',' << r.cosine_mu << ',' << r.cosine_sigma << ',' << r.l2_mu << ','
       << r.l2_sigma << '\n';
  }
  return os.str();
}

}  // namespace kin
