#include "kin/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "parallel.hpp"

namespace kin {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Mirror index without edge repetition, folded as often as needed.
std::size_t mirror(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  i %= period;
  return i < n ? i : period - i;
}

void require_rgb(const Image& image, const Generator& gen) {
  if (image.channels() != static_cast<std::size_t>(gen.config().in_channels)) {
    throw Error("image has " + std::to_string(image.channels()) + " channels, generator expects " +
                std::to_string(gen.config().in_channels));
  }
}

TileGrid grid_for(const Image& image, const Generator& gen, const TranslateOptions& opts) {
  return make_grid(image.height(), image.width(),
                   static_cast<std::size_t>(gen.config().patch_size), opts.policy);
}

}  // namespace

RemainderPolicy parse_policy(const std::string& name) {
  if (name == "strict-crop") return RemainderPolicy::StrictCrop;
  if (name == "pad-reflect") return RemainderPolicy::PadReflect;
  throw Error("unknown remainder policy '" + name + "' (expected strict-crop or pad-reflect)");
}

std::string to_string(RemainderPolicy policy) {
  return policy == RemainderPolicy::StrictCrop ? "strict-crop" : "pad-reflect";
}

PatchOrder parse_order(const std::string& name) {
  if (name == "row-major") return PatchOrder::RowMajor;
  if (name == "col-major") return PatchOrder::ColumnMajor;
  if (name == "shuffle") return PatchOrder::Shuffled;
  throw Error("unknown patch order '" + name + "' (expected row-major, col-major or shuffle)");
}

std::string to_string(PatchOrder order) {
  switch (order) {
    case PatchOrder::RowMajor: return "row-major";
    case PatchOrder::ColumnMajor: return "col-major";
    case PatchOrder::Shuffled: return "shuffle";
  }
  return "?";
}

std::size_t TileGrid::output_h() const noexcept {
  return policy == RemainderPolicy::StrictCrop ? covered_h() : image_h;
}

std::size_t TileGrid::output_w() const noexcept {
  return policy == RemainderPolicy::StrictCrop ? covered_w() : image_w;
}

TileGrid make_grid(std::size_t height, std::size_t width, std::size_t patch, RemainderPolicy policy) {
  if (height < 1 || width < 1) throw Error("cannot tile an empty image");
  if (patch < 1) throw Error("patch size must be positive");
  TileGrid g{height, width, patch, 0, 0, policy};
  if (policy == RemainderPolicy::StrictCrop) {
    g.rows = static_cast<int>(height / patch);
    g.cols = static_cast<int>(width / patch);
    if (g.rows < 1 || g.cols < 1) {
      throw Error("image " + std::to_string(height) + "x" + std::to_string(width) +
                  " holds no full " + std::to_string(patch) + "x" + std::to_string(patch) +
                  " patch under strict-crop");
    }
  } else {
    g.rows = static_cast<int>((height + patch - 1) / patch);
    g.cols = static_cast<int>((width + patch - 1) / patch);
  }
  return g;
}

std::vector<Coord> patch_coords(const TileGrid& grid, PatchOrder order, std::uint64_t seed) {
  std::vector<Coord> coords;
  coords.reserve(grid.patch_count());
  if (order == PatchOrder::ColumnMajor) {
    for (int c = 0; c < grid.cols; ++c)
      for (int r = 0; r < grid.rows; ++r) coords.push_back({r, c});
  } else {
    for (int r = 0; r < grid.rows; ++r)
      for (int c = 0; c < grid.cols; ++c) coords.push_back({r, c});
  }
  if (order == PatchOrder::Shuffled) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
  }
  return coords;
}

Tensor extract_patch(const Image& image, const TileGrid& grid, Coord at) {
  if (at.row < 0 || at.row >= grid.rows || at.col < 0 || at.col >= grid.cols) {
    throw Error("patch coordinate outside grid");
  }
  const std::size_t p = grid.patch;
  const std::size_t top = static_cast<std::size_t>(at.row) * p;
  const std::size_t left = static_cast<std::size_t>(at.col) * p;
  Tensor patch(Shape{1, image.channels(), p, p});
  for (std::size_t c = 0; c < image.channels(); ++c) {
    float* dst = patch.plane(0, c);
    for (std::size_t y = 0; y < p; ++y) {
      const std::size_t sy = mirror(top + y, image.height());
      for (std::size_t x = 0; x < p; ++x) {
        dst[y * p + x] = image.at(c, sy, mirror(left + x, image.width()));
      }
    }
  }
  return patch;
}

void place_patch(Image& output, const TileGrid& grid, Coord at, const Tensor& patch) {
  const std::size_t p = grid.patch;
  const std::size_t top = static_cast<std::size_t>(at.row) * p;
  const std::size_t left = static_cast<std::size_t>(at.col) * p;
  const std::size_t h = std::min(p, output.height() - std::min(top, output.height()));
  const std::size_t w = std::min(p, output.width() - std::min(left, output.width()));
  for (std::size_t c = 0; c < output.channels(); ++c) {
    const float* src = patch.plane(0, c);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) output.at(c, top + y, left + x) = src[y * p + x];
  }
}

void cache_pass(const Image& image, const Generator& gen, const TileGrid& grid,
                std::vector<NormLayerState>& states, const TranslateOptions& opts) {
  require_rgb(image, gen);
  if (opts.mode.kind != NormKind::KIN) throw Error("cache_pass requires KIN mode");
  const auto coords = patch_coords(grid, opts.order, opts.order_seed);
  detail::parallel_for(coords.size(), opts.threads, [&](std::size_t k) {
    const Coord at = coords[k];
    gen.forward(extract_patch(image, grid, at), states, opts.mode, at, Phase::Caching);
  });
}

void thumbnail_pass(const Image& image, const Generator& gen, const TileGrid& grid,
                    std::vector<NormLayerState>& states) {
  require_rgb(image, gen);
  const std::size_t h = std::min(grid.image_h, grid.covered_h());
  const std::size_t w = std::min(grid.image_w, grid.covered_w());
  Tensor thumb;
  if (h == image.height() && w == image.width()) {
    thumb = bilinear_resize(image.data(), image.channels(), h, w, grid.patch, grid.patch);
  } else {
    std::vector<float> region(image.channels() * h * w);
    for (std::size_t c = 0; c < image.channels(); ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) region[(c * h + y) * w + x] = image.at(c, y, x);
    thumb = bilinear_resize(region, image.channels(), h, w, grid.patch, grid.patch);
  }
  gen.forward(thumb, states, NormMode::tin(), std::nullopt, Phase::Caching);
}

Image infer_pass(const Image& image, const Generator& gen, const TileGrid& grid,
                 std::vector<NormLayerState>& states, const TranslateOptions& opts) {
  require_rgb(image, gen);
  if (opts.mode.kind == NormKind::KIN) {
    for (const NormLayerState& s : states) {
      if (!s.table) throw Error("KIN inference requires caching tables");
      if (s.table->rows() != grid.rows || s.table->cols() != grid.cols) {
        throw Error("caching table is " + std::to_string(s.table->rows()) + "x" +
                    std::to_string(s.table->cols()) + " but grid is " + std::to_string(grid.rows) +
                    "x" + std::to_string(grid.cols));
      }
      if (!s.table->complete()) {
        std::string cells;
        for (Coord c : s.table->unfilled_cells()) {
          cells += " (" + std::to_string(c.row) + ", " + std::to_string(c.col) + ")";
        }
        throw Error("inference before a complete caching pass; layer " +
                    std::to_string(s.layer_id) + " unfilled cells:" + cells);
      }
    }
  }
  Image output(static_cast<std::size_t>(gen.config().out_channels), grid.output_h(),
               grid.output_w());
  const auto coords = patch_coords(grid, opts.order, opts.order_seed);
  detail::parallel_for(coords.size(), opts.threads, [&](std::size_t k) {
    const Coord at = coords[k];
    const Tensor out =
        gen.forward(extract_patch(image, grid, at), states, opts.mode, at, Phase::Inference);
    place_patch(output, grid, at, out);  // disjoint regions per patch
  });
  return output;
}

TranslationResult translate(const Image& image, const Generator& gen, const TranslateOptions& opts) {
  require_rgb(image, gen);
  const TileGrid grid = grid_for(image, gen, opts);
  TranslationResult result;
  TranslationReport& report = result.report;
  report.grid = grid;
  report.mode = to_string(opts.mode.kind);
  report.kernel = opts.mode.kernel ? opts.mode.kernel->describe() : "";
  report.threads = opts.threads;

  const PeakScope scope;
  if (opts.mode.kind == NormKind::FullIN) {
    const std::size_t pixels = grid.covered_h() * grid.covered_w();
    if (pixels > opts.full_in_max_pixels) {
      throw Error("full-in refuses a " + std::to_string(grid.covered_h()) + "x" +
                  std::to_string(grid.covered_w()) + " input: " + std::to_string(pixels) +
                  " pixels exceeds the budget of " + std::to_string(opts.full_in_max_pixels) +
                  " (full-image IN exists as a small-image oracle; use patch-in, tin or kin)");
    }
    const auto start = Clock::now();
    Tensor input(Shape{1, image.channels(), grid.covered_h(), grid.covered_w()});
    for (std::size_t c = 0; c < image.channels(); ++c)
      for (std::size_t y = 0; y < grid.covered_h(); ++y)
        for (std::size_t x = 0; x < grid.covered_w(); ++x)
          input.at(0, c, y, x) = image.at(c, mirror(y, image.height()), mirror(x, image.width()));
    auto states = gen.make_norm_states(opts.mode);
    const Tensor out = gen.forward(input, states, opts.mode, std::nullopt, Phase::Inference);
    result.output = Image(static_cast<std::size_t>(gen.config().out_channels), grid.output_h(),
                          grid.output_w());
    for (std::size_t c = 0; c < result.output.channels(); ++c)
      for (std::size_t y = 0; y < grid.output_h(); ++y)
        for (std::size_t x = 0; x < grid.output_w(); ++x)
          result.output.at(c, y, x) = out.at(0, c, y, x);
    report.infer_seconds = seconds_since(start);
  } else {
    auto states = gen.make_norm_states(opts.mode, grid.rows, grid.cols);
    auto start = Clock::now();
    if (opts.mode.kind == NormKind::KIN) {
      if (!opts.load_tables_path.empty()) {
        load_tables(opts.load_tables_path, states);
      } else {
        cache_pass(image, gen, grid, states, opts);
      }
      if (!opts.save_tables_path.empty()) save_tables(opts.save_tables_path, states);
    } else if (opts.mode.kind == NormKind::TIN) {
      thumbnail_pass(image, gen, grid, states);
    }
    report.cache_seconds = seconds_since(start);
    for (const auto& s : states) report.table_bytes += s.table ? s.table->bytes() : 0;
    start = Clock::now();
    result.output = infer_pass(image, gen, grid, states, opts);
    report.infer_seconds = seconds_since(start);
  }
  report.peak_tensor_bytes = scope.peak_above_baseline();
  report.image_bytes = image.bytes() + result.output.bytes();
  return result;
}

nlohmann::json TranslationReport::to_json() const {
  return {
      {"grid",
       {{"image_h", grid.image_h},
        {"image_w", grid.image_w},
        {"patch_size", grid.patch},
        {"rows", grid.rows},
        {"cols", grid.cols},
        {"policy", to_string(grid.policy)}}},
      {"mode", mode},
      {"kernel", kernel},
      {"threads", threads},
      {"cache_seconds", cache_seconds},
      {"infer_seconds", infer_seconds},
      {"peak_tensor_bytes", peak_tensor_bytes},
      {"table_bytes", table_bytes},
      {"image_bytes", image_bytes},
      {"output_path", output_path},
  };
}

TranslationReport TranslationReport::from_json(const nlohmann::json& j) {
  TranslationReport r;
  const auto& g = j.at("grid");
  r.grid = TileGrid{g.at("image_h").get<std::size_t>(),
                    g.at("image_w").get<std::size_t>(),
                    g.at("patch_size").get<std::size_t>(),
                    g.at("rows").get<int>(),
                    g.at("cols").get<int>(),
                    parse_policy(g.at("policy").get<std::string>())};
  r.mode = j.at("mode").get<std::string>();
  r.kernel = j.at("kernel").get<std::string>();
  r.threads = j.at("threads").get<int>();
  r.cache_seconds = j.at("cache_seconds").get<double>();
  r.infer_seconds = j.at("infer_seconds").get<double>();
  r.peak_tensor_bytes = j.at("peak_tensor_bytes").get<std::size_t>();
  r.table_bytes = j.at("table_bytes").get<std::size_t>();
  r.image_bytes = j.at("image_bytes").get<std::size_t>();
  r.output_path = j.at("output_path").get<std::string>();
  return r;
}

void save_tables(const std::filesystem::path& path, const std::vector<NormLayerState>& states) {
  WeightStore store;
  for (const NormLayerState& s : states) {
    if (!s.table) throw Error("save_tables: layer " + std::to_string(s.layer_id) + " has no table");
    const StatTable& t = *s.table;
    if (!t.complete()) {
      throw Error("save_tables: layer " + std::to_string(s.layer_id) + " table is incomplete");
    }
    const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(t.rows()),
                                          static_cast<std::uint32_t>(t.cols()),
                                          static_cast<std::uint32_t>(t.channels())};
    const std::string prefix = "layer" + std::to_string(s.layer_id);
    store[prefix + ".mu"] = NamedArray{dims, {t.mu_data().begin(), t.mu_data().end()}};
    store[prefix + ".sigma"] = NamedArray{dims, {t.sigma_data().begin(), t.sigma_data().end()}};
  }
  write_container(path, store);
}

void load_tables(const std::filesystem::path& path, std::vector<NormLayerState>& states) {
  const WeightStore store = read_container(path);
  for (NormLayerState& s : states) {
    if (!s.table) throw Error("load_tables: layer " + std::to_string(s.layer_id) + " has no table");
    const std::string prefix = "layer" + std::to_string(s.layer_id);
    auto mu = store.find(prefix + ".mu");
    auto sigma = store.find(prefix + ".sigma");
    if (mu == store.end() || sigma == store.end()) {
      throw Error("table file '" + path.string() + "' lacks entries for " + prefix);
    }
    StatTable& t = *s.table;
    const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(t.rows()),
                                          static_cast<std::uint32_t>(t.cols()),
                                          static_cast<std::uint32_t>(t.channels())};
    if (mu->second.dims != dims || sigma->second.dims != dims) {
      throw Error("table file entry " + prefix + " does not match the grid/channel shape");
    }
    const std::size_t c = t.channels();
    for (int r = 0; r < t.rows(); ++r) {
      for (int col = 0; col < t.cols(); ++col) {
        const std::size_t off = (static_cast<std::size_t>(r) * static_cast<std::size_t>(t.cols()) +
                                 static_cast<std::size_t>(col)) * c;
        t.write({r, col}, std::span<const float>(mu->second.values).subspan(off, c),
                std::span<const float>(sigma->second.values).subspan(off, c));
      }
    }
  }
}

}  // namespace kin
