#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kin/generator.hpp"
#include "kin/image.hpp"
#include "kin/normstrat.hpp"

namespace kin {

enum class RemainderPolicy { StrictCrop, PadReflect };
enum class PatchOrder { RowMajor, ColumnMajor, Shuffled };

RemainderPolicy parse_policy(const std::string& name);
std::string to_string(RemainderPolicy policy);
PatchOrder parse_order(const std::string& name);
std::string to_string(PatchOrder order);

/// Non-overlapping P x P tiling of an M x N image.
struct TileGrid {
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t patch = 0;
  int rows = 0;
  int cols = 0;
  RemainderPolicy policy = RemainderPolicy::PadReflect;

  std::size_t covered_h() const noexcept { return static_cast<std::size_t>(rows) * patch; }
  std::size_t covered_w() const noexcept { return static_cast<std::size_t>(cols) * patch; }
  // Final output extent: the covered region for StrictCrop, the input for PadReflect.
  std::size_t output_h() const noexcept;
  std::size_t output_w() const noexcept;
  std::size_t patch_count() const noexcept { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// StrictCrop: floor(M/P) x floor(N/P); PadReflect: ceil(M/P) x ceil(N/P).
TileGrid make_grid(std::size_t height, std::size_t width, std::size_t patch, RemainderPolicy policy);

/// Patch coordinates in the requested processing order.
std::vector<Coord> patch_coords(const TileGrid& grid, PatchOrder order = PatchOrder::RowMajor,
                                std::uint64_t seed = 0);

/// Crops patch (i, j). Pixels past the image edge are mirrored (repeatedly if needed).
Tensor extract_patch(const Image& image, const TileGrid& grid, Coord at);

/// Writes a translated patch into `output`, dropping pixels beyond the output extent.
void place_patch(Image& output, const TileGrid& grid, Coord at, const Tensor& patch);

struct TranslateOptions {
  NormMode mode = NormMode::patch_in();
  RemainderPolicy policy = RemainderPolicy::PadReflect;
  PatchOrder order = PatchOrder::RowMajor;
  std::uint64_t order_seed = 0;
  int threads = 1;
  // FullIN runs the whole covered region as one tensor; refuse beyond this.
  std::size_t full_in_max_pixels = std::size_t{1} << 20;
  // KIN only: reuse a persisted caching pass, and/or persist the one just run.
  std::filesystem::path load_tables_path;
  std::filesystem::path save_tables_path;
};

struct TranslationReport {
  TileGrid grid;
  std::string mode;
  std::string kernel;
  int threads = 1;
  double cache_seconds = 0.0;
  double infer_seconds = 0.0;
  std::size_t peak_tensor_bytes = 0;
  std::size_t table_bytes = 0;
  std::size_t image_bytes = 0;
  std::string output_path;

  nlohmann::json to_json() const;
  static TranslationReport from_json(const nlohmann::json& j);
};

struct TranslationResult {
  Image output;
  TranslationReport report;
};

/// Full tiled translation: caching pass (KIN) or thumbnail capture (TIN),
/// inference pass, assembly at the original coordinates.
TranslationResult translate(const Image& image, const Generator& gen, const TranslateOptions& opts);

/// Fills every KIN table cell by running each patch once in the caching phase.
void cache_pass(const Image& image, const Generator& gen, const TileGrid& grid,
                std::vector<NormLayerState>& states, const TranslateOptions& opts);

/// TIN: captures per-layer statistics from the image resized to one patch.
void thumbnail_pass(const Image& image, const Generator& gen, const TileGrid& grid,
                    std::vector<NormLayerState>& states);

/// Translates every patch with prepared states and assembles the output.
Image infer_pass(const Image& image, const Generator& gen, const TileGrid& grid,
                 std::vector<NormLayerState>& states, const TranslateOptions& opts);

/// Stat-table sidecar: container entries `layer{id}.mu` / `layer{id}.sigma`, shape [rows, cols, C].
void save_tables(const std::filesystem::path& path, const std::vector<NormLayerState>& states);
void load_tables(const std::filesystem::path& path, std::vector<NormLayerState>& states);

}  // namespace kin
