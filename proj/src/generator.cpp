#include "kin/generator.hpp"

#include <random>

namespace kin {

namespace {

using Dims = std::vector<std::uint32_t>;

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

class ModeDispatch final : public NormDispatch {
 public:
  ModeDispatch(std::vector<NormLayerState>& states, const NormMode& mode, std::optional<Coord> at,
               Phase phase)
      : states_(states), mode_(mode), at_(at), phase_(phase) {}

  Tensor normalize(int layer_id, const Tensor& features) override {
    return apply_norm(states_.at(static_cast<std::size_t>(layer_id - 1)), features, at_, mode_,
                      phase_);
  }

 private:
  std::vector<NormLayerState>& states_;
  const NormMode& mode_;
  std::optional<Coord> at_;
  Phase phase_;
};

// Own-statistics normalization that records what a caching pass would store.
class ProbeDispatch final : public NormDispatch {
 public:
  explicit ProbeDispatch(const std::vector<NormLayerState>& states) : states_(states) {}

  Tensor normalize(int layer_id, const Tensor& features) override {
    const NormLayerState& s = states_.at(static_cast<std::size_t>(layer_id - 1));
    ChannelStats stats = channel_stats(features);
    Tensor out = normalize_with_stats(features, stats, s.gamma, s.beta, s.eps);
    records.push_back({layer_id, std::move(stats.mu), std::move(stats.sigma)});
    return out;
  }

  std::vector<LayerStats> records;

 private:
  const std::vector<NormLayerState>& states_;
};

}  // namespace

int GeneratorConfig::norm_channels(int layer_id) const {
  const int w = base_width;
  if (layer_id < 1 || layer_id > norm_site_count()) {
    throw Error("norm site " + std::to_string(layer_id) + " out of range");
  }
  if (layer_id == 1) return w;
  if (layer_id == 2) return 2 * w;
  if (layer_id <= 3 + 2 * n_resblocks) return 4 * w;
  if (layer_id == norm_site_count() - 1) return 2 * w;
  return w;
}

void GeneratorConfig::validate() const {
  if (in_channels < 1 || out_channels < 1) throw Error("generator: channel counts must be >= 1");
  if (base_width < 1) throw Error("generator: base_width must be >= 1");
  if (n_resblocks < 1) throw Error("generator: n_resblocks must be >= 1");
  if (patch_size < 8 || patch_size % 4 != 0) {
    throw Error("generator: patch size must be a multiple of 4 and >= 8, got " +
                std::to_string(patch_size));
  }
}

std::vector<ParamSpec> parameter_specs(const GeneratorConfig& c) {
  const std::uint32_t w = u32(c.base_width);
  std::vector<ParamSpec> specs;
  auto conv = [&](const std::string& prefix, Dims weight, std::uint32_t out) {
    specs.push_back({prefix + ".weight", std::move(weight)});
    specs.push_back({prefix + ".bias", {out}});
  };
  conv("stem.conv", {w, u32(c.in_channels), 7, 7}, w);
  conv("down1.conv", {2 * w, w, 3, 3}, 2 * w);
  conv("down2.conv", {4 * w, 2 * w, 3, 3}, 4 * w);
  for (int n = 1; n <= c.n_resblocks; ++n) {
    conv("res" + std::to_string(n) + ".conv1", {4 * w, 4 * w, 3, 3}, 4 * w);
    conv("res" + std::to_string(n) + ".conv2", {4 * w, 4 * w, 3, 3}, 4 * w);
  }
  conv("up1.conv", {4 * w, 2 * w, 3, 3}, 2 * w);
  conv("up2.conv", {2 * w, w, 3, 3}, w);
  conv("head.conv", {u32(c.out_channels), w, 7, 7}, u32(c.out_channels));
  for (int k = 1; k <= c.norm_site_count(); ++k) {
    const std::uint32_t ch = u32(c.norm_channels(k));
    specs.push_back({"norm" + std::to_string(k) + ".gamma", {ch}});
    specs.push_back({"norm" + std::to_string(k) + ".beta", {ch}});
  }
  return specs;
}

Generator Generator::from_weights(const GeneratorConfig& config, const WeightStore& weights,
                                  bool permissive) {
  config.validate();
  Generator g(config);
  g.load(weights, permissive);
  return g;
}

Generator Generator::from_seed(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 0.02f);
  WeightStore store;
  for (const ParamSpec& spec : parameter_specs(config)) {
    NamedArray a{spec.dims, {}};
    a.values.resize(a.numel());
    const bool is_gamma = spec.name.ends_with(".gamma");
    const bool is_conv_weight = spec.name.ends_with(".weight");
    for (float& v : a.values) v = is_conv_weight ? normal(rng) : (is_gamma ? 1.0f : 0.0f);
    store.emplace(spec.name, std::move(a));
  }
  return from_weights(config, store);
}

void Generator::load(const WeightStore& weights, bool permissive) {
  const auto specs = parameter_specs(config_);
  for (const ParamSpec& spec : specs) {
    auto it = weights.find(spec.name);
    if (it == weights.end()) throw Error("missing parameter '" + spec.name + "'");
    if (it->second.dims != spec.dims) {
      std::string want, got;
      for (auto d : spec.dims) want += std::to_string(d) + " ";
      for (auto d : it->second.dims) got += std::to_string(d) + " ";
      throw Error("parameter '" + spec.name + "' has shape [ " + got + "], expected [ " + want +
                  "]");
    }
  }
  if (!permissive && weights.size() != specs.size()) {
    for (const auto& [name, _] : weights) {
      bool known = false;
      for (const auto& s : specs) known = known || s.name == name;
      if (!known) throw Error("unexpected parameter '" + name + "'");
    }
  }

  auto conv = [&](const std::string& prefix) {
    const NamedArray& w = weights.at(prefix + ".weight");
    Conv c{Tensor(Shape{w.dims[0], w.dims[1], w.dims[2], w.dims[3]}, w.values),
           weights.at(prefix + ".bias").values};
    return c;
  };
  stem_ = conv("stem.conv");
  down1_ = conv("down1.conv");
  down2_ = conv("down2.conv");
  res_conv1_.clear();
  res_conv2_.clear();
  for (int n = 1; n <= config_.n_resblocks; ++n) {
    res_conv1_.push_back(conv("res" + std::to_string(n) + ".conv1"));
    res_conv2_.push_back(conv("res" + std::to_string(n) + ".conv2"));
  }
  up1_ = conv("up1.conv");
  up2_ = conv("up2.conv");
  head_ = conv("head.conv");
  norms_.clear();
  for (int k = 1; k <= config_.norm_site_count(); ++k) {
    norms_.push_back({weights.at("norm" + std::to_string(k) + ".gamma").values,
                      weights.at("norm" + std::to_string(k) + ".beta").values});
  }
}

WeightStore Generator::export_weights() const {
  WeightStore store;
  auto put_conv = [&](const std::string& prefix, const Conv& c) {
    const Shape& s = c.weight.shape();
    store[prefix + ".weight"] =
        NamedArray{{u32(static_cast<int>(s.batch)), u32(static_cast<int>(s.channels)),
                    u32(static_cast<int>(s.height)), u32(static_cast<int>(s.width))},
                   {c.weight.data().begin(), c.weight.data().end()}};
    store[prefix + ".bias"] = NamedArray{{u32(static_cast<int>(c.bias.size()))}, c.bias};
  };
  put_conv("stem.conv", stem_);
  put_conv("down1.conv", down1_);
  put_conv("down2.conv", down2_);
  for (int n = 1; n <= config_.n_resblocks; ++n) {
    put_conv("res" + std::to_string(n) + ".conv1", res_conv1_[static_cast<std::size_t>(n - 1)]);
    put_conv("res" + std::to_string(n) + ".conv2", res_conv2_[static_cast<std::size_t>(n - 1)]);
  }
  put_conv("up1.conv", up1_);
  put_conv("up2.conv", up2_);
  put_conv("head.conv", head_);
  for (std::size_t k = 0; k < norms_.size(); ++k) {
    const auto n = u32(static_cast<int>(norms_[k].gamma.size()));
    store["norm" + std::to_string(k + 1) + ".gamma"] = NamedArray{{n}, norms_[k].gamma};
    store["norm" + std::to_string(k + 1) + ".beta"] = NamedArray{{n}, norms_[k].beta};
  }
  return store;
}

Tensor Generator::run(const Tensor& input, NormDispatch& norm) const {
  const Shape& s = input.shape();
  if (s.batch != 1 || s.channels != static_cast<std::size_t>(config_.in_channels)) {
    throw Error("generator: expected input [1, " + std::to_string(config_.in_channels) +
                ", H, W], got " + s.str());
  }
  if (s.height < 8 || s.width < 8 || s.height % 4 != 0 || s.width % 4 != 0) {
    throw Error("generator: spatial size must be multiples of 4 and >= 8, got " + s.str());
  }

  int site = 0;
  auto norm_relu = [&](const Tensor& x) { return relu(norm.normalize(++site, x)); };

  Tensor x = conv2d(reflection_pad2d(input, 3), stem_.weight, stem_.bias, 1, {});
  x = norm_relu(x);
  x = norm_relu(conv2d(x, down1_.weight, down1_.bias, 2, Padding::uniform(1)));
  x = norm_relu(conv2d(x, down2_.weight, down2_.bias, 2, Padding::uniform(1)));
  for (std::size_t n = 0; n < res_conv1_.size(); ++n) {
    Tensor y = conv2d(reflection_pad2d(x, 1), res_conv1_[n].weight, res_conv1_[n].bias, 1, {});
    y = norm_relu(y);
    y = conv2d(reflection_pad2d(y, 1), res_conv2_[n].weight, res_conv2_[n].bias, 1, {});
    y = norm.normalize(++site, y);
    x = add(x, y);
  }
  x = norm_relu(conv_transpose2d(x, up1_.weight, up1_.bias, 2, 1, 1));
  x = norm_relu(conv_transpose2d(x, up2_.weight, up2_.bias, 2, 1, 1));
  x = conv2d(reflection_pad2d(x, 3), head_.weight, head_.bias, 1, {});
  return tanh(std::move(x));
}

Tensor Generator::forward(const Tensor& patch, std::vector<NormLayerState>& states,
                          const NormMode& mode, std::optional<Coord> at, Phase phase) const {
  const Shape& s = patch.shape();
  const auto p = static_cast<std::size_t>(config_.patch_size);
  // FullIN is the whole-image oracle and accepts any valid extent.
  if (mode.kind != NormKind::FullIN && (s.height != p || s.width != p)) {
    throw Error("generator: patch must be " + std::to_string(p) + "x" + std::to_string(p) +
                ", got " + s.str());
  }
  if (states.size() != static_cast<std::size_t>(config_.norm_site_count())) {
    throw Error("generator: expected " + std::to_string(config_.norm_site_count()) +
                " norm states, got " + std::to_string(states.size()));
  }
  ModeDispatch dispatch(states, mode, at, phase);
  return run(patch, dispatch);
}

std::vector<LayerStats> Generator::stat_probe(const Tensor& patch) const {
  const auto states = make_norm_states(NormMode::patch_in());
  ProbeDispatch probe(states);
  run(patch, probe);
  return std::move(probe.records);
}

std::vector<NormLayerState> Generator::make_norm_states(const NormMode& mode, int rows,
                                                        int cols) const {
  std::vector<NormLayerState> states;
  states.reserve(norms_.size());
  for (std::size_t k = 0; k < norms_.size(); ++k) {
    NormLayerState s;
    s.layer_id = static_cast<int>(k) + 1;
    s.gamma = norms_[k].gamma;
    s.beta = norms_[k].beta;
    if (mode.kind == NormKind::KIN) s.table.emplace(rows, cols, s.gamma.size());
    states.push_back(std::move(s));
  }
  return states;
}

}  // namespace kin
