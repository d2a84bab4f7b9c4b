#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kintile_cli {

// Every knob of a CLI run. Keys in the JSON form equal the long flag names.
struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string output;
  std::string report;
  std::string reference;
  std::string out_dir;
  std::string weights;
  std::optional<std::uint64_t> seed;
  std::string mode = "kin";
  std::string kernel = "constant";
  int kernel_size = 3;
  std::optional<double> kernel_sigma;
  int patch = 512;
  std::string policy = "pad-reflect";
  int threads = 1;
  std::string order = "row-major";
  std::uint64_t order_seed = 0;
  int base_width = 64;
  int resblocks = 9;
  std::uint64_t full_in_max_pixels = std::uint64_t{1} << 20;
  std::string save_tables;
  std::string load_tables;
  // analyze-stats
  std::vector<int> layers;
  double max_distance = 5000.0;
  std::uint64_t max_pairs = 0;
  bool include_self = false;
  // bench-mem
  std::vector<int> grids{2, 4, 8};
  std::vector<std::uint64_t> full_in_sizes{256, 512};
  double tolerance = 0.05;

  nlohmann::json to_json() const;
};

// Long flag names a JSON config may set.
const std::vector<std::string>& config_keys();

// Copies `key` from `j` into `cfg` (no-op when absent).
void apply_config_key(RunConfig& cfg, const std::string& key, const nlohmann::json& j);

}  // namespace kintile_cli
