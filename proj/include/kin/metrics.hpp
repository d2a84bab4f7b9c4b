#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kin/generator.hpp"
#include "kin/image.hpp"
#include "kin/pipeline.hpp"

namespace kin {

struct MetricReport {
  std::string metric;
  double value = 0.0;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<std::string> images;
  bool degenerate = false;

  nlohmann::json to_json() const;
};

struct HistogramCorrelation {
  double value = 0.0;
  bool degenerate = false;  // a histogram had zero variance; value is defined as 0
};

/// Pearson correlation of the per-channel normalized histograms (8-bit scale,
/// channels concatenated).
HistogramCorrelation histogram_correlation(const Image& a, const Image& b, int bins = 256);

/// Mean Sobel gradient magnitude over the Y, Cb and Cr planes (BT.601, 8-bit
/// scale), evaluated on interior pixels.
double sobel_gradient_ycbcr(const Image& rgb);

/// Mean SSIM over all `window` x `window` windows (stride 1, uniform weights)
/// and channels, on the 8-bit scale with C1 = (0.01*255)^2, C2 = (0.03*255)^2.
double ssim(const Image& a, const Image& b, int window = 8);

/// Mean |difference| across internal patch borders minus the mean |difference|
/// across the adjacent one-pixel-offset control lines. 0 for single-patch grids.
double seam_discrepancy(const Image& image, const TileGrid& grid);

struct StatSimilarityRecord {
  int layer_id = 0;
  Coord a;
  Coord b;
  double distance_px = 0.0;
  double cosine_mu = 0.0;
  double cosine_sigma = 0.0;
  double l2_mu = 0.0;
  double l2_sigma = 0.0;
};

struct StatsSimilarityOptions {
  std::vector<int> layers;      // empty: every norm site
  double max_distance_px = 5000.0;
  bool include_self_pairs = false;
  std::size_t max_pairs = 0;   // 0: all pairs within range; otherwise a seeded sample
  std::uint64_t seed = 0;
};

double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Probes every patch and compares per-layer statistics between patch pairs.
std::vector<StatSimilarityRecord> stats_similarity(const Generator& gen, const Image& image,
                                                   const TileGrid& grid,
                                                   const StatsSimilarityOptions& opts = {});

std::string stats_similarity_csv(const std::vector<StatSimilarityRecord>& records);

}  // namespace kin
