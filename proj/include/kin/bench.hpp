#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kin/generator.hpp"
#include "kin/normstrat.hpp"

namespace kin {

struct MemoryBenchOptions {
  std::vector<int> grids{2, 4, 8};           // patches per side for the tiled modes
  std::vector<std::size_t> full_in_sizes{256, 512};  // square image sides for FullIN
  std::vector<NormKind> modes{NormKind::PatchIN, NormKind::TIN, NormKind::KIN};
  KinKernel kernel = build_kernel(KernelKind::Constant, 3);
  double flatness_tolerance = 0.05;
  std::size_t full_in_max_pixels = std::size_t{1} << 22;
};

struct MemoryBenchRow {
  std::string mode;
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  int rows = 0;
  int cols = 0;
  std::size_t peak_tensor_bytes = 0;
  std::size_t table_bytes = 0;

  bool operator==(const MemoryBenchRow&) const = default;
};

struct MemoryBenchCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;

  bool operator==(const MemoryBenchCheck&) const = default;
};

struct MemoryBenchReport {
  int patch_size = 0;
  int base_width = 0;
  int n_resblocks = 0;
  std::vector<MemoryBenchRow> rows;
  std::vector<MemoryBenchCheck> checks;

  bool passed() const;
  nlohmann::json to_json() const;
  static MemoryBenchReport from_json(const nlohmann::json& j);
  bool operator==(const MemoryBenchReport&) const = default;
};

/// Translates synthetic gradients of increasing size single-threaded and records
/// peak tensor bytes. Checks: each tiled mode's peak spread stays within the
/// tolerance; FullIN's peak grows at least with the pixel count.
MemoryBenchReport run_memory_bench(const Generator& gen, const MemoryBenchOptions& opts);

}  // namespace kin
