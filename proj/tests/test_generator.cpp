#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kin/generator.hpp"
#include "kin/weight_file.hpp"
#include "oracles.hpp"

using kin::Generator;
using kin::GeneratorConfig;

namespace {

GeneratorConfig tiny() {
  GeneratorConfig c;
  c.base_width = 2;
  c.n_resblocks = 2;
  c.patch_size = 8;
  return c;
}

// Straight-line forward pass with the oracle convolutions and instance norm.
struct Reference {
  const kin::WeightStore& w;
  int n_res;

  kin::Tensor weight(const std::string& name) const {
    const auto& a = w.at(name);
    return kin::Tensor({a.dims[0], a.dims[1], a.dims[2], a.dims[3]}, a.values);
  }
  static kin::Tensor from(const std::vector<double>& v, std::size_t c, int h, int wd) {
    kin::Tensor t({1, c, std::size_t(h), std::size_t(wd)});
    for (std::size_t i = 0; i < v.size(); ++i) t.data()[i] = static_cast<float>(v[i]);
    return t;
  }
  kin::Tensor conv(const kin::Tensor& x, const std::string& p, int stride, int pad) const {
    const auto wt = weight(p + ".weight");
    int oh, ow;
    auto out = oracle::conv2d(x, wt, w.at(p + ".bias").values, stride, pad, pad, pad, pad, oh, ow);
    return from(out, wt.shape().batch, oh, ow);
  }
  kin::Tensor up(const kin::Tensor& x, const std::string& p) const {
    const auto wt = weight(p + ".weight");
    int oh, ow;
    auto out = oracle::conv_transpose2d(x, wt, w.at(p + ".bias").values, 2, 1, 1, oh, ow);
    return from(out, wt.shape().channels, oh, ow);
  }
  kin::Tensor norm(const kin::Tensor& x, int k, bool relu) const {
    const auto& g = w.at("norm" + std::to_string(k) + ".gamma").values;
    const auto& b = w.at("norm" + std::to_string(k) + ".beta").values;
    kin::Tensor y = x;
    const auto& s = x.shape();
    for (std::size_t c = 0; c < s.channels; ++c) {
      double sum = 0, sq = 0;
      for (std::size_t i = 0; i < s.plane(); ++i) sum += x.plane(0, c)[i];
      const double mu = sum / s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) sq += std::pow(x.plane(0, c)[i] - mu, 2);
      const double sd = std::sqrt(sq / s.plane());
      for (std::size_t i = 0; i < s.plane(); ++i) {
        double v = g[c] * (x.plane(0, c)[i] - mu) / (sd + 1e-5) + b[c];
        y.plane(0, c)[i] = static_cast<float>(relu ? std::max(v, 0.0) : v);
      }
    }
    return y;
  }
  kin::Tensor run(const kin::Tensor& in) const {
    int k = 0;
    auto x = norm(conv(oracle::reflection_pad2d(in, 3), "stem.conv", 1, 0), ++k, true);
    x = norm(conv(x, "down1.conv", 2, 1), ++k, true);
    x = norm(conv(x, "down2.conv", 2, 1), ++k, true);
    for (int n = 1; n <= n_res; ++n) {
      const std::string p = "res" + std::to_string(n);
      auto y = norm(conv(oracle::reflection_pad2d(x, 1), p + ".conv1", 1, 0), ++k, true);
      y = norm(conv(oracle::reflection_pad2d(y, 1), p + ".conv2", 1, 0), ++k, false);
      for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] += y.data()[i];
    }
    x = norm(up(x, "up1.conv"), ++k, true);
    x = norm(up(x, "up2.conv"), ++k, true);
    x = conv(oracle::reflection_pad2d(x, 3), "head.conv", 1, 0);
    for (float& v : x.data()) v = std::tanh(v);
    return x;
  }
};

}  // namespace

TEST(Generator, ParameterNamesAndShapes) {
  const auto cfg = tiny();
  EXPECT_EQ(cfg.norm_site_count(), 3 + 2 * 2 + 2);
  const auto specs = kin::parameter_specs(cfg);
  auto find = [&](const std::string& n) {
    for (const auto& s : specs)
      if (s.name == n) return s.dims;
    return std::vector<std::uint32_t>{};
  };
  EXPECT_EQ(find("stem.conv.weight"), (std::vector<std::uint32_t>{2, 3, 7, 7}));
  EXPECT_EQ(find("down2.conv.weight"), (std::vector<std::uint32_t>{8, 4, 3, 3}));
  EXPECT_EQ(find("res2.conv1.weight"), (std::vector<std::uint32_t>{8, 8, 3, 3}));
  EXPECT_EQ(find("up1.conv.weight"), (std::vector<std::uint32_t>{8, 4, 3, 3}));
  EXPECT_EQ(find("up2.conv.weight"), (std::vector<std::uint32_t>{4, 2, 3, 3}));
  EXPECT_EQ(find("head.conv.weight"), (std::vector<std::uint32_t>{3, 2, 7, 7}));
  EXPECT_EQ(find("norm9.gamma"), (std::vector<std::uint32_t>{2}));
  EXPECT_EQ(find("norm4.beta"), (std::vector<std::uint32_t>{8}));
  EXPECT_EQ(specs.size(), 2u * (6u + 2u * 2u) + 2u * 9u);
}

TEST(Generator, MatchesReferenceForward) {
  std::mt19937_64 rng(31);
  const auto cfg = tiny();
  auto store = Generator::from_seed(cfg, 5).export_weights();
  // Non-trivial biases and affine parameters.
  std::normal_distribution<float> d(0.0f, 0.3f);
  for (auto& [name, a] : store) {
    if (name.ends_with(".bias") || name.ends_with(".beta")) for (float& v : a.values) v = d(rng);
    if (name.ends_with(".gamma")) for (float& v : a.values) v = 1.0f + d(rng);
    if (name.ends_with(".weight")) for (float& v : a.values) v *= 10.0f;
  }
  const auto gen = Generator::from_weights(cfg, store);
  const Reference ref{store, cfg.n_resblocks};
  for (int trial = 0; trial < 3; ++trial) {
    const auto x = oracle::random_tensor({1, 3, 8, 8}, rng, 0.5f);
    auto states = gen.make_norm_states(kin::NormMode::patch_in());
    const auto got = gen.forward(x, states, kin::NormMode::patch_in(), std::nullopt, kin::Phase::Inference);
    EXPECT_LT(oracle::max_abs_diff(got, ref.run(x)), 1e-4);
  }
}

TEST(Generator, SeededInitIsDeterministic) {
  const auto a = Generator::from_seed(tiny(), 42).export_weights();
  const auto b = Generator::from_seed(tiny(), 42).export_weights();
  const auto c = Generator::from_seed(tiny(), 43).export_weights();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.at("norm1.gamma").values, std::vector<float>(2, 1.0f));
  EXPECT_EQ(a.at("stem.conv.bias").values, std::vector<float>(2, 0.0f));
}

TEST(Generator, WeightsRoundTripThroughContainer) {
  const auto gen = Generator::from_seed(tiny(), 1);
  const auto bytes = kin::encode_container(gen.export_weights());
  const auto again = Generator::from_weights(tiny(), kin::decode_container(bytes));
  EXPECT_EQ(kin::encode_container(again.export_weights()), bytes);
}

TEST(Generator, MissingOrMisshapenParameters) {
  auto store = Generator::from_seed(tiny(), 1).export_weights();
  auto missing = store;
  missing.erase("norm5.gamma");
  try {
    Generator::from_weights(tiny(), missing);
    FAIL();
  } catch (const kin::Error& e) {
    EXPECT_NE(std::string(e.what()).find("norm5.gamma"), std::string::npos);
  }
  auto wrong = store;
  wrong["head.conv.bias"].dims = {4};
  wrong["head.conv.bias"].values.resize(4);
  EXPECT_THROW(Generator::from_weights(tiny(), wrong), kin::Error);
  auto extra = store;
  extra["disc.weight"] = {{1}, {0.0f}};
  EXPECT_THROW(Generator::from_weights(tiny(), extra), kin::Error);
  EXPECT_NO_THROW(Generator::from_weights(tiny(), extra, true));
}

TEST(Generator, OutputShapeAndRange) {
  std::mt19937_64 rng(2);
  auto cfg = tiny();
  cfg.patch_size = 16;
  const auto gen = Generator::from_seed(cfg, 3);
  auto states = gen.make_norm_states(kin::NormMode::patch_in());
  const auto x = oracle::random_tensor({1, 3, 16, 16}, rng);
  const auto y = gen.forward(x, states, kin::NormMode::patch_in(), std::nullopt, kin::Phase::Inference);
  EXPECT_EQ(y.shape(), (kin::Shape{1, 3, 16, 16}));
  for (float v : y.data()) EXPECT_LE(std::abs(v), 1.0f);
  const auto wrong = oracle::random_tensor({1, 3, 12, 12}, rng);
  EXPECT_THROW(gen.forward(wrong, states, kin::NormMode::patch_in(), std::nullopt, kin::Phase::Inference), kin::Error);
}

TEST(Generator, ConfigValidation) {
  auto cfg = tiny();
  cfg.patch_size = 10;
  EXPECT_THROW(cfg.validate(), kin::Error);
  cfg.patch_size = 4;
  EXPECT_THROW(cfg.validate(), kin::Error);
  cfg = tiny();
  cfg.n_resblocks = 0;
  EXPECT_THROW(Generator::from_seed(cfg, 1), kin::Error);
}

TEST(Generator, StatProbeMatchesCachedTables) {
  std::mt19937_64 rng(6);
  const auto gen = Generator::from_seed(tiny(), 9);
  const auto x = oracle::random_tensor({1, 3, 8, 8}, rng);
  const auto probe = gen.stat_probe(x);
  ASSERT_EQ(probe.size(), 9u);
  const auto mode = kin::NormMode::kin(kin::build_kernel(kin::KernelKind::Constant, 1));
  auto states = gen.make_norm_states(mode, 1, 1);
  gen.forward(x, states, mode, kin::Coord{0, 0}, kin::Phase::Caching);
  for (std::size_t k = 0; k < probe.size(); ++k) {
    EXPECT_EQ(probe[k].layer_id, static_cast<int>(k) + 1);
    const auto mu = states[k].table->mu({0, 0});
    EXPECT_EQ(std::vector<float>(mu.begin(), mu.end()), probe[k].mu);
  }
}
