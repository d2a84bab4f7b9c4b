#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kin/normstrat.hpp"
#include "kin/tensor.hpp"
#include "kin/weight_file.hpp"

namespace kin {

/// ResNet-style image-to-image generator:
///   c7s1-W -> d2W -> d4W -> R4W x n -> u2W -> uW -> c7s1-3, tanh
/// where W is base_width. Every conv but the head is followed by a
/// normalization site; sites are numbered 1..norm_site_count() in forward order.
struct GeneratorConfig {
  int in_channels = 3;
  int out_channels = 3;
  int base_width = 64;
  int n_resblocks = 9;
  int patch_size = 512;

  int norm_site_count() const noexcept { return 3 + 2 * n_resblocks + 2; }
  // Channel count at normalization site `layer_id` (1-based).
  int norm_channels(int layer_id) const;
  void validate() const;
};

struct ParamSpec {
  std::string name;
  std::vector<std::uint32_t> dims;
};

/// Canonical parameter names and shapes, in forward order:
///   stem.conv.{weight,bias}            [W, in, 7, 7], [W]
///   down{1,2}.conv.{weight,bias}        [2W, W, 3, 3] ... (stride 2, zero pad 1)
///   res{n}.conv{1,2}.{weight,bias}      [4W, 4W, 3, 3] (n = 1..n_resblocks)
///   up{1,2}.conv.{weight,bias}          [Cin, Cout, 3, 3] transposed layout
///   head.conv.{weight,bias}             [out, W, 7, 7]
///   norm{k}.{gamma,beta}                [C_k], k = 1..norm_site_count
std::vector<ParamSpec> parameter_specs(const GeneratorConfig& config);

/// Hook invoked at each normalization site during a forward pass.
class NormDispatch {
 public:
  virtual ~NormDispatch() = default;
  virtual Tensor normalize(int layer_id, const Tensor& features) = 0;
};

struct LayerStats {
  int layer_id = 0;
  std::vector<float> mu;
  std::vector<float> sigma;
};

class Generator {
 public:
  static Generator from_weights(const GeneratorConfig& config, const WeightStore& weights,
                                bool permissive = false);
  // Convs ~ N(0, 0.02), biases 0, gamma 1, beta 0.
  static Generator from_seed(const GeneratorConfig& config, std::uint64_t seed);

  const GeneratorConfig& config() const noexcept { return config_; }
  WeightStore export_weights() const;

  /// Runs the network with an arbitrary normalization hook. Accepts any
  /// [1, in, H, W] input with H, W multiples of 4 and >= 8.
  Tensor run(const Tensor& input, NormDispatch& norm) const;

  /// Translates one P x P patch; `states` holds one entry per norm site.
  Tensor forward(const Tensor& patch, std::vector<NormLayerState>& states, const NormMode& mode,
                 std::optional<Coord> at, Phase phase) const;

  /// Statistics every norm site would cache for this patch, without touching any table.
  std::vector<LayerStats> stat_probe(const Tensor& patch) const;

  /// Fresh per-site states for `mode`; KIN allocates rows x cols tables.
  std::vector<NormLayerState> make_norm_states(const NormMode& mode, int rows = 1,
                                               int cols = 1) const;

 private:
  struct Conv {
    Tensor weight;
    std::vector<float> bias;
  };
  struct Affine {
    std::vector<float> gamma;
    std::vector<float> beta;
  };

  explicit Generator(GeneratorConfig config) : config_(config) {}
  void load(const WeightStore& weights, bool permissive);

  GeneratorConfig config_;
  Conv stem_, down1_, down2_, up1_, up2_, head_;
  std::vector<Conv> res_conv1_, res_conv2_;
  std::vector<Affine> norms_;  // index layer_id - 1
};

}  // namespace kin
