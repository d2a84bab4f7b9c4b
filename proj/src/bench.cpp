#include "kin/bench.hpp"

#include <algorithm>
#include <array>

#include "kin/image.hpp"
#include "kin/pipeline.hpp"

namespace kin {

namespace {

Image bench_image(std::size_t h, std::size_t w) {
  constexpr std::array<float, 3> left{-0.8f, -0.2f, 0.6f};
  constexpr std::array<float, 3> right{0.7f, 0.1f, -0.5f};
  return horizontal_gradient(h, w, left, right);
}

}  // namespace

bool MemoryBenchReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

MemoryBenchReport run_memory_bench(const Generator& gen, const MemoryBenchOptions& opts) {
  const GeneratorConfig& cfg = gen.config();
  MemoryBenchReport report{cfg.patch_size, cfg.base_width, cfg.n_resblocks, {}, {}};
  const auto p = static_cast<std::size_t>(cfg.patch_size);

  for (NormKind kind : opts.modes) {
    if (kind == NormKind::FullIN) continue;
    TranslateOptions t;
    t.mode = kind == NormKind::KIN ? NormMode::kin(opts.kernel) : NormMode{kind, std::nullopt};
    std::size_t lo = SIZE_MAX, hi = 0;
    for (int g : opts.grids) {
      const auto side = static_cast<std::size_t>(g) * p;
      const auto result = translate(bench_image(side, side), gen, t);
      report.rows.push_back({to_string(kind), side, side, result.report.grid.rows,
                             result.report.grid.cols, result.report.peak_tensor_bytes,
                             result.report.table_bytes});
      lo = std::min(lo, result.report.peak_tensor_bytes);
      hi = std::max(hi, result.report.peak_tensor_bytes);
    }
    if (!opts.grids.empty()) {
      const double spread = lo > 0 ? static_cast<double>(hi - lo) / static_cast<double>(lo) : 0.0;
      report.checks.push_back({to_string(kind) + " peak spread across grids",
                               spread < opts.flatness_tolerance, spread, opts.flatness_tolerance});
    }
  }

  if (std::find(opts.modes.begin(), opts.modes.end(), NormKind::FullIN) != opts.modes.end() &&
      opts.full_in_sizes.size() >= 2) {
    TranslateOptions t;
    t.mode = NormMode::full_in();
    t.full_in_max_pixels = opts.full_in_max_pixels;
    std::vector<std::size_t> peaks;
    for (std::size_t side : opts.full_in_sizes) {
      const auto result = translate(bench_image(side, side), gen, t);
      report.rows.push_back({"full-in", side, side, 1, 1, result.report.peak_tensor_bytes, 0});
      peaks.push_back(result.report.peak_tensor_bytes);
    }
    const double first = static_cast<double>(opts.full_in_sizes.front());
    const double last = static_cast<double>(opts.full_in_sizes.back());
    const double want = (last / first) * (last / first);
    const double growth = static_cast<double>(peaks.back()) / static_cast<double>(peaks.front());
    report.checks.push_back({"full-in peak growth", growth >= want, growth, want});
  }
  return report;
}

nlohmann::json MemoryBenchReport::to_json() const {
  nlohmann::json j{{"patch_size", patch_size}, {"base_width", base_width},
                   {"n_resblocks", n_resblocks}, {"rows", nlohmann::json::array()},
                   {"checks", nlohmann::json::array()}, {"passed", passed()}};
  for (const auto& r : rows) {
    j["rows"].push_back({{"mode", r.mode},
                         {"image_h", r.image_h},
                         {"image_w", r.image_w},
                         {"rows", r.rows},
                         {"cols", r.cols},
                         {"peak_tensor_bytes", r.peak_tensor_bytes},
                         {"table_bytes", r.table_bytes}});
  }
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"passed", c.passed},
                           {"measured", c.measured},
                           {"threshold", c.threshold}});
  }
  return j;
}

MemoryBenchReport MemoryBenchReport::from_json(const nlohmann::json& j) {
  MemoryBenchReport r;
  r.patch_size = j.at("patch_size").get<int>();
  r.base_width = j.at("base_width").get<int>();
  r.n_resblocks = j.at("n_resblocks").get<int>();
  for (const auto& row : j.at("rows")) {
    r.rows.push_back({row.at("mode").get<std::string>(), row.at("image_h").get<std::size_t>(),
                      row.at("image_w").get<std::size_t>(), row.at("rows").get<int>(),
                      row.at("cols").get<int>(), row.at("peak_tensor_bytes").get<std::size_t>(),
                      row.at("table_bytes").get<std::size_t>()});
  }
  for (const auto& c : j.at("checks")) {
    r.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(),
                        c.at("measured").get<double>(), c.at("threshold").get<double>()});
  }
  return r;
}

}  // namespace kin
