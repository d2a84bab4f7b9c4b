// kintile: tiled image-to-image translation with kernelized instance normalization.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "kin/bench.hpp"
#include "kin/generator.hpp"
#include "kin/image.hpp"
#include "kin/metrics.hpp"
#include "kin/pipeline.hpp"
#include "kin/weight_file.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using kintile_cli::RunConfig;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw kin::Error("cannot open '" + path.string() + "' for writing");
  out << text;
}

kin::Generator make_generator(const RunConfig& c) {
  kin::GeneratorConfig g;
  g.base_width = c.base_width;
  g.n_resblocks = c.resblocks;
  g.patch_size = c.patch;
  if (!c.weights.empty()) {
    const kin::WeightStore store = kin::read_container(c.weights);
    // Architecture width and depth follow the weight file.
    if (auto it = store.find("stem.conv.weight"); it != store.end() && it->second.dims.size() == 4) {
      g.base_width = static_cast<int>(it->second.dims[0]);
      g.in_channels = static_cast<int>(it->second.dims[1]);
    }
    int n = 0;
    while (store.count("res" + std::to_string(n + 1) + ".conv1.weight")) ++n;
    if (n > 0) g.n_resblocks = n;
    if (auto it = store.find("head.conv.weight"); it != store.end() && !it->second.dims.empty()) {
      g.out_channels = static_cast<int>(it->second.dims[0]);
    }
    return kin::Generator::from_weights(g, store);
  }
  if (c.seed) return kin::Generator::from_seed(g, *c.seed);
  throw UsageError("either --weights or --seed is required");
}

kin::NormMode make_mode(const std::string& mode, const RunConfig& c) {
  const kin::NormKind kind = kin::parse_norm_kind(mode);
  if (kind != kin::NormKind::KIN) return kin::NormMode{kind, std::nullopt};
  return kin::NormMode::kin(
      kin::build_kernel(kin::parse_kernel_kind(c.kernel), c.kernel_size, c.kernel_sigma));
}

kin::TranslateOptions make_options(const RunConfig& c, const kin::NormMode& mode) {
  kin::TranslateOptions o;
  o.mode = mode;
  o.policy = kin::parse_policy(c.policy);
  o.order = kin::parse_order(c.order);
  o.order_seed = c.order_seed;
  o.threads = std::max(1, c.threads);
  o.full_in_max_pixels = static_cast<std::size_t>(c.full_in_max_pixels);
  return o;
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

int cmd_translate(const RunConfig& c) {
  require_path(c.input, "--input");
  require_path(c.output, "--output");
  const kin::Generator gen = make_generator(c);
  const kin::NormMode mode = make_mode(c.mode, c);
  kin::TranslateOptions opts = make_options(c, mode);
  opts.load_tables_path = c.load_tables;
  opts.save_tables_path = c.save_tables;

  const kin::Image input = kin::read_image(c.input);
  kin::TranslationResult result = kin::translate(input, gen, opts);
  if (fs::path(c.output).has_parent_path()) fs::create_directories(fs::path(c.output).parent_path());
  kin::write_image(c.output, result.output);
  result.report.output_path = c.output;

  nlohmann::json report = result.report.to_json();
  report["config"] = c.to_json();
  write_text(c.report.empty() ? c.output + ".json" : c.report, report.dump(2) + "\n");
  std::cout << "translated " << input.height() << "x" << input.width() << " with "
            << mode.describe() << " on a " << result.report.grid.rows << "x"
            << result.report.grid.cols << " grid; peak tensor bytes "
            << result.report.peak_tensor_bytes << "\n";
  return 0;
}

int cmd_compare(const RunConfig& c) {
  require_path(c.input, "--input");
  require_path(c.output, "--output");
  const kin::Generator gen = make_generator(c);
  const kin::Image input = kin::read_image(c.input);
  const kin::Image reference = c.reference.empty() ? input : kin::read_image(c.reference);

  const std::array<std::string, 3> modes{"patch-in", "tin", "kin"};
  std::ostringstream csv;
  csv.precision(10);
  csv << "mode,kernel,histogram_correlation,sobel_gradient,ssim,seam_discrepancy\n";
  nlohmann::json rows = nlohmann::json::array();
  for (const std::string& name : modes) {
    const kin::NormMode mode = make_mode(name, c);
    const auto result = kin::translate(input, gen, make_options(c, mode));
    const kin::Image& out = result.output;
    const bool same_dims = out.height() == reference.height() && out.width() == reference.width();
    const auto corr = kin::histogram_correlation(out, reference);
    const double grad = kin::sobel_gradient_ycbcr(out);
    const double sim = same_dims ? kin::ssim(out, reference) : 0.0;
    const double seam = kin::seam_discrepancy(out, result.report.grid);
    const std::string kernel = mode.kernel ? mode.kernel->describe() : "";
    csv << name << ',' << kernel << ',' << corr.value << ',' << grad << ',' << sim << ',' << seam
        << '\n';
    rows.push_back({{"mode", name},
                    {"kernel", kernel},
                    {"histogram_correlation", corr.value},
                    {"histogram_degenerate", corr.degenerate},
                    {"sobel_gradient", grad},
                    {"ssim", sim},
                    {"ssim_valid", same_dims},
                    {"seam_discrepancy", seam},
                    {"peak_tensor_bytes", result.report.peak_tensor_bytes}});
    if (!c.out_dir.empty()) {
      fs::create_directories(c.out_dir);
      kin::write_image(fs::path(c.out_dir) / (name + ".png"), out);
    }
  }
  write_text(c.output, csv.str());
  if (!c.report.empty()) {
    write_text(c.report, nlohmann::json{{"rows", rows}, {"config", c.to_json()}}.dump(2) + "\n");
  }
  std::cout << csv.str();
  return 0;
}

int cmd_analyze_stats(const RunConfig& c) {
  require_path(c.input, "--input");
  require_path(c.output, "--output");
  const kin::Generator gen = make_generator(c);
  const kin::Image input = kin::read_image(c.input);
  const kin::TileGrid grid = kin::make_grid(input.height(), input.width(),
                                            static_cast<std::size_t>(c.patch),
                                            kin::parse_policy(c.policy));
  kin::StatsSimilarityOptions opts;
  opts.layers = c.layers;
  opts.max_distance_px = c.max_distance;
  opts.include_self_pairs = c.include_self;
  opts.max_pairs = static_cast<std::size_t>(c.max_pairs);
  opts.seed = c.seed.value_or(0);
  const auto records = kin::stats_similarity(gen, input, grid, opts);
  write_text(c.output, kin::stats_similarity_csv(records));
  if (!c.report.empty()) {
    write_text(c.report, nlohmann::json{{"records", records.size()}, {"config", c.to_json()}}.dump(2) + "\n");
  }
  std::cout << "wrote " << records.size() << " records to " << c.output << "\n";
  return 0;
}

int cmd_bench_mem(const RunConfig& c) {
  require_path(c.output, "--output");
  const kin::Generator gen = make_generator(c);
  kin::MemoryBenchOptions opts;
  opts.grids = c.grids;
  opts.full_in_sizes.assign(c.full_in_sizes.begin(), c.full_in_sizes.end());
  opts.modes = {kin::NormKind::PatchIN, kin::NormKind::TIN, kin::NormKind::KIN,
                kin::NormKind::FullIN};
  opts.kernel = kin::build_kernel(kin::parse_kernel_kind(c.kernel), c.kernel_size, c.kernel_sigma);
  opts.flatness_tolerance = c.tolerance;
  opts.full_in_max_pixels = static_cast<std::size_t>(c.full_in_max_pixels);
  const kin::MemoryBenchReport report = kin::run_memory_bench(gen, opts);
  nlohmann::json j = report.to_json();
  j["config"] = c.to_json();
  write_text(c.output, j.dump(2) + "\n");
  for (const auto& check : report.checks) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.measured
              << " (threshold " << check.threshold << ")\n";
  }
  return report.passed() ? 0 : 1;
}

struct SynthArgs {
  std::string output;
  std::string pattern = "gradient";
  std::size_t height = 256;
  std::size_t width = 256;
  std::vector<float> left{-0.8f, -0.2f, 0.6f};
  std::vector<float> right{0.7f, 0.1f, -0.5f};
  std::size_t tile = 64;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  require_path(a.output, "--output");
  if (a.left.size() != 3 || a.right.size() != 3) throw UsageError("--left/--right take 3 values");
  kin::Image img;
  if (a.pattern == "gradient") {
    img = kin::horizontal_gradient(a.height, a.width, std::span<const float, 3>(a.left.data(), 3),
                                   std::span<const float, 3>(a.right.data(), 3));
  } else if (a.pattern == "tiles") {
    // One random tile repeated over the whole image.
    if (a.tile == 0) throw UsageError("--tile must be positive");
    std::mt19937_64 rng(a.seed);
    std::uniform_int_distribution<int> byte(0, 255);
    std::vector<std::uint8_t> tile(a.tile * a.tile * 3);
    for (auto& v : tile) v = static_cast<std::uint8_t>(byte(rng));
    img = kin::Image(3, a.height, a.width);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < a.height; ++y)
        for (std::size_t x = 0; x < a.width; ++x)
          img.at(c, y, x) = kin::from_u8(tile[((y % a.tile) * a.tile + (x % a.tile)) * 3 + c]);
  } else {
    throw UsageError("unknown pattern '" + a.pattern + "' (expected gradient or tiles)");
  }
  kin::write_image(a.output, img);
  return 0;
}

int cmd_init_weights(const RunConfig& c) {
  require_path(c.output, "--output");
  if (!c.seed) throw UsageError("--seed is required");
  kin::write_container(c.output, make_generator(c).export_weights());
  return 0;
}

void add_generator_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--weights", c.weights, "Weight container (.urw)");
  sub->add_option("--seed", c.seed, "Seed for random generator weights");
  sub->add_option("--patch", c.patch, "Patch size P (multiple of 4)");
  sub->add_option("--base-width", c.base_width, "Generator base width (seeded weights)");
  sub->add_option("--resblocks", c.resblocks, "Residual blocks (seeded weights)");
  sub->add_option("--config", "JSON run config; explicit flags take precedence");
}

void add_mode_flags(CLI::App* sub, RunConfig& c, bool with_mode) {
  if (with_mode) {
    sub->add_option("--mode", c.mode, "full-in | patch-in | tin | kin")
        ->check(CLI::IsMember({"full-in", "patch-in", "tin", "kin"}));
  }
  sub->add_option("--kernel", c.kernel, "constant | gaussian | global")
      ->check(CLI::IsMember({"constant", "gaussian", "global"}));
  sub->add_option("--kernel-size", c.kernel_size, "Odd kernel size");
  sub->add_option("--kernel-sigma", c.kernel_sigma, "Gaussian sigma (default size/3)");
  sub->add_option("--policy", c.policy, "pad-reflect | strict-crop")
      ->check(CLI::IsMember({"pad-reflect", "strict-crop"}));
  sub->add_option("--threads", c.threads, "Worker threads")->envname("KINTILE_THREADS");
  sub->add_option("--order", c.order, "row-major | col-major | shuffle")
      ->check(CLI::IsMember({"row-major", "col-major", "shuffle"}));
  sub->add_option("--order-seed", c.order_seed, "Seed for --order shuffle");
  sub->add_option("--full-in-max-pixels", c.full_in_max_pixels, "Pixel budget for full-in");
}

// Fills every option not given on the command line from --config.
void merge_config_file(CLI::App* sub, RunConfig& c) {
  CLI::Option* opt = sub->get_option_no_throw("--config");
  if (!opt || opt->count() == 0) return;
  const std::string path = opt->as<std::string>();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("bad config '" + path + "': " + e.what());
  }
  for (const std::string& key : kintile_cli::config_keys()) {
    CLI::Option* flag = sub->get_option_no_throw("--" + key);
    if (flag && flag->count() > 0) continue;
    try {
      kintile_cli::apply_config_key(c, key, j);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("bad value for '" + key + "' in config: " + e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiled image-to-image translation with kernelized instance normalization"};
  app.require_subcommand(1);
  RunConfig cfg;
  SynthArgs synth;

  CLI::App* translate = app.add_subcommand("translate", "Translate one image patch by patch");
  translate->add_option("--input,-i", cfg.input, "Input image (.png or .rgb)");
  translate->add_option("--output,-o", cfg.output, "Output image");
  translate->add_option("--report", cfg.report, "Report JSON (default <output>.json)");
  translate->add_option("--save-tables", cfg.save_tables, "Persist KIN caching tables");
  translate->add_option("--load-tables", cfg.load_tables, "Reuse persisted KIN caching tables");
  add_generator_flags(translate, cfg);
  add_mode_flags(translate, cfg, true);

  CLI::App* compare = app.add_subcommand("compare", "Run patch-in, tin and kin; tabulate metrics");
  compare->add_option("--input,-i", cfg.input, "Input image");
  compare->add_option("--output,-o", cfg.output, "Metric table CSV");
  compare->add_option("--reference", cfg.reference, "Reference image (default: the input)");
  compare->add_option("--report", cfg.report, "Metric table JSON");
  compare->add_option("--out-dir", cfg.out_dir, "Also write each translated image here");
  add_generator_flags(compare, cfg);
  add_mode_flags(compare, cfg, false);

  CLI::App* analyze = app.add_subcommand("analyze-stats", "Per-layer statistics similarity CSV");
  analyze->add_option("--input,-i", cfg.input, "Input image");
  analyze->add_option("--output,-o", cfg.output, "CSV path");
  analyze->add_option("--report", cfg.report, "Summary JSON");
  analyze->add_option("--policy", cfg.policy, "pad-reflect | strict-crop")
      ->check(CLI::IsMember({"pad-reflect", "strict-crop"}));
  analyze->add_option("--layers", cfg.layers, "Norm layer ids (default all)")->delimiter(',');
  analyze->add_option("--max-distance", cfg.max_distance, "Pair distance cap in pixels");
  analyze->add_option("--max-pairs", cfg.max_pairs, "Sample at most this many pairs (0 = all)");
  analyze->add_flag("--include-self", cfg.include_self, "Include (c, c) pairs");
  add_generator_flags(analyze, cfg);

  CLI::App* bench = app.add_subcommand("bench-mem", "Peak tensor memory versus image size");
  bench->add_option("--output,-o", cfg.output, "Report JSON");
  bench->add_option("--grids", cfg.grids, "Patches per side for tiled modes")->delimiter(',');
  bench->add_option("--full-in-sizes", cfg.full_in_sizes, "Image sides for full-in")->delimiter(',');
  bench->add_option("--tolerance", cfg.tolerance, "Allowed relative peak spread");
  bench->add_option("--kernel", cfg.kernel, "KIN kernel")
      ->check(CLI::IsMember({"constant", "gaussian", "global"}));
  bench->add_option("--kernel-size", cfg.kernel_size, "KIN kernel size");
  bench->add_option("--full-in-max-pixels", cfg.full_in_max_pixels, "Pixel budget for full-in");
  add_generator_flags(bench, cfg);

  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic test image");
  synth_cmd->add_option("--output,-o", synth.output, "Image path");
  synth_cmd->add_option("--pattern", synth.pattern, "gradient | tiles");
  synth_cmd->add_option("--height", synth.height, "Height in pixels");
  synth_cmd->add_option("--width", synth.width, "Width in pixels");
  synth_cmd->add_option("--left", synth.left, "Left colour in [-1, 1]")->delimiter(',');
  synth_cmd->add_option("--right", synth.right, "Right colour in [-1, 1]")->delimiter(',');
  synth_cmd->add_option("--tile", synth.tile, "Tile size for the tiles pattern");
  synth_cmd->add_option("--seed", synth.seed, "Seed for the tiles pattern");

  CLI::App* init = app.add_subcommand("init-weights", "Write seeded random weights to a container");
  init->add_option("--output,-o", cfg.output, "Weight container path");
  add_generator_flags(init, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    cfg.subcommand = sub->get_name();
    if (sub == bench) {
      // Desk-scale defaults; memory flatness does not depend on width or depth.
      if (sub->get_option("--patch")->count() == 0) cfg.patch = 128;
      if (sub->get_option("--base-width")->count() == 0) cfg.base_width = 8;
      if (sub->get_option("--resblocks")->count() == 0) cfg.resblocks = 2;
    }
    merge_config_file(sub, cfg);
    if (sub == translate) return cmd_translate(cfg);
    if (sub == compare) return cmd_compare(cfg);
    if (sub == analyze) return cmd_analyze_stats(cfg);
    if (sub == bench) return cmd_bench_mem(cfg);
    if (sub == synth_cmd) return cmd_synth(synth);
    if (sub == init) return cmd_init_weights(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
