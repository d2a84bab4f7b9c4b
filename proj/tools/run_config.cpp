#include "run_config.hpp"

#include <functional>
#include <map>

namespace kintile_cli {

namespace {

using Json = nlohmann::json;

struct Field {
  std::function<void(const RunConfig&, Json&)> write;
  std::function<void(RunConfig&, const Json&)> read;
};

template <class T>
Field plain(const std::string& key, T RunConfig::*member) {
  return {[key, member](const RunConfig& c, Json& j) { j[key] = c.*member; },
          [member](RunConfig& c, const Json& v) { c.*member = v.get<T>(); }};
}

template <class T>
Field optional(const std::string& key, std::optional<T> RunConfig::*member) {
  return {[key, member](const RunConfig& c, Json& j) {
            j[key] = (c.*member) ? Json(*(c.*member)) : Json(nullptr);
          },
          [member](RunConfig& c, const Json& v) {
            if (v.is_null()) {
              (c.*member).reset();
            } else {
              c.*member = v.get<T>();
            }
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"input", plain("input", &RunConfig::input)},
      {"output", plain("output", &RunConfig::output)},
      {"report", plain("report", &RunConfig::report)},
      {"reference", plain("reference", &RunConfig::reference)},
      {"out-dir", plain("out-dir", &RunConfig::out_dir)},
      {"weights", plain("weights", &RunConfig::weights)},
      {"seed", optional("seed", &RunConfig::seed)},
      {"mode", plain("mode", &RunConfig::mode)},
      {"kernel", plain("kernel", &RunConfig::kernel)},
      {"kernel-size", plain("kernel-size", &RunConfig::kernel_size)},
      {"kernel-sigma", optional("kernel-sigma", &RunConfig::kernel_sigma)},
      {"patch", plain("patch", &RunConfig::patch)},
      {"policy", plain("policy", &RunConfig::policy)},
      {"threads", plain("threads", &RunConfig::threads)},
      {"order", plain("order", &RunConfig::order)},
      {"order-seed", plain("order-seed", &RunConfig::order_seed)},
      {"base-width", plain("base-width", &RunConfig::base_width)},
      {"resblocks", plain("resblocks", &RunConfig::resblocks)},
      {"full-in-max-pixels", plain("full-in-max-pixels", &RunConfig::full_in_max_pixels)},
      {"save-tables", plain("save-tables", &RunConfig::save_tables)},
      {"load-tables", plain("load-tables", &RunConfig::load_tables)},
      {"layers", plain("layers", &RunConfig::layers)},
      {"max-distance", plain("max-distance", &RunConfig::max_distance)},
      {"max-pairs", plain("max-pairs", &RunConfig::max_pairs)},
      {"include-self", plain("include-self", &RunConfig::include_self)},
      {"grids", plain("grids", &RunConfig::grids)},
      {"full-in-sizes", plain("full-in-sizes", &RunConfig::full_in_sizes)},
      {"tolerance", plain("tolerance", &RunConfig::tolerance)},
  };
  return table;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  Json j = {{"subcommand", subcommand}};
  for (const auto& [key, field] : fields()) field.write(*this, j);
  return j;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, _] : fields()) k.push_back(key);
    return k;
  }();
  return keys;
}

void apply_config_key(RunConfig& cfg, const std::string& key, const nlohmann::json& j) {
  auto it = j.find(key);
  if (it == j.end()) return;
  fields().at(key).read(cfg, *it);
}

}  // namespace kintile_cli
