#include <gtest/gtest.h>

#include <filesystem>

#include "kin/pipeline.hpp"
#include "oracles.hpp"

using kin::Coord;
using kin::RemainderPolicy;

namespace {

kin::GeneratorConfig small_config(int patch = 16) {
  kin::GeneratorConfig c;
  c.base_width = 4;
  c.n_resblocks = 2;
  c.patch_size = patch;
  return c;
}

kin::Image colour_gradient(std::size_t h, std::size_t w) {
  const std::array<float, 3> l{-0.8f, -0.2f, 0.6f}, r{0.7f, 0.1f, -0.5f};
  return kin::horizontal_gradient(h, w, l, r);
}

kin::TranslateOptions with_mode(kin::NormMode mode) {
  kin::TranslateOptions o;
  o.mode = std::move(mode);
  return o;
}

kin::NormMode kin_mode(int k) { return kin::NormMode::kin(kin::build_kernel(kin::KernelKind::Constant, k)); }

}  // namespace

TEST(TileGrid, PolicyDimensions) {
  const auto exact = kin::make_grid(1024, 1024, 512, RemainderPolicy::StrictCrop);
  EXPECT_EQ(exact.rows, 2);
  EXPECT_EQ(exact.cols, 2);
  const auto crop = kin::make_grid(1100, 1100, 512, RemainderPolicy::StrictCrop);
  EXPECT_EQ(crop.rows, 2);
  EXPECT_EQ(crop.output_h(), 1024u);
  const auto pad = kin::make_grid(1100, 1100, 512, RemainderPolicy::PadReflect);
  EXPECT_EQ(pad.rows, 3);
  EXPECT_EQ(pad.cols, 3);
  EXPECT_EQ(pad.output_w(), 1100u);
  EXPECT_THROW(kin::make_grid(100, 600, 512, RemainderPolicy::StrictCrop), kin::Error);
  EXPECT_EQ(kin::make_grid(100, 600, 512, RemainderPolicy::PadReflect).patch_count(), 2u);
}

TEST(TileGrid, CoordinateOrders) {
  const auto g = kin::make_grid(32, 48, 16, RemainderPolicy::StrictCrop);
  const auto row = kin::patch_coords(g, kin::PatchOrder::RowMajor);
  const auto col = kin::patch_coords(g, kin::PatchOrder::ColumnMajor);
  const auto shuf = kin::patch_coords(g, kin::PatchOrder::Shuffled, 7);
  EXPECT_EQ(row[1], (Coord{0, 1}));
  EXPECT_EQ(col[1], (Coord{1, 0}));
  auto sorted = shuf;
  std::sort(sorted.begin(), sorted.end(), [](Coord a, Coord b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  EXPECT_EQ(sorted, row);
  EXPECT_EQ(kin::patch_coords(g, kin::PatchOrder::Shuffled, 7), shuf);
}

TEST(TileGrid, ExtractMirrorsPastTheEdge) {
  std::mt19937_64 rng(1);
  const auto img = oracle::random_image(20, 10, rng);
  const auto g = kin::make_grid(20, 10, 16, RemainderPolicy::PadReflect);
  const auto p = kin::extract_patch(img, g, {1, 0});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      EXPECT_EQ(p.at(0, 1, y, x), img.at(1, oracle::reflect(16 + y, 20), oracle::reflect(x, 10)));
}

TEST(Translate, SinglePatchEqualsDirectForwardForAllModes) {
  const auto gen = kin::Generator::from_seed(small_config(), 3);
  std::mt19937_64 rng(2);
  const auto img = oracle::random_image(16, 16, rng);
  auto states = gen.make_norm_states(kin::NormMode::patch_in());
  const auto direct = kin::to_image(gen.forward(kin::to_tensor(img), states, kin::NormMode::patch_in(),
                                                std::nullopt, kin::Phase::Inference));
  for (const auto& mode : {kin::NormMode::full_in(), kin::NormMode::patch_in(), kin::NormMode::tin(),
                           kin_mode(3), kin::NormMode::kin(kin::build_kernel(kin::KernelKind::Global))}) {
    const auto out = kin::translate(img, gen, with_mode(mode)).output;
    EXPECT_LT(oracle::max_abs_diff(out, direct), 1e-5) << mode.describe();
  }
}

TEST(Translate, AssemblyIsExact) {
  const auto gen = kin::Generator::from_seed(small_config(), 4);
  const auto img = colour_gradient(40, 56);
  for (auto policy : {RemainderPolicy::PadReflect, RemainderPolicy::StrictCrop}) {
    auto opts = with_mode(kin::NormMode::patch_in());
    opts.policy = policy;
    const auto result = kin::translate(img, gen, opts);
    const auto& g = result.report.grid;
    EXPECT_EQ(result.output.height(), g.output_h());
    EXPECT_EQ(result.output.width(), g.output_w());
    auto states = gen.make_norm_states(opts.mode);
    for (const Coord at : kin::patch_coords(g)) {
      const auto patch = gen.forward(kin::extract_patch(img, g, at), states, opts.mode, at, kin::Phase::Inference);
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 16; ++y)
          for (std::size_t x = 0; x < 16; ++x) {
            const std::size_t oy = at.row * 16 + y, ox = at.col * 16 + x;
            if (oy < g.output_h() && ox < g.output_w()) {
              ASSERT_EQ(result.output.at(c, oy, ox), patch.at(0, c, y, x));
            }
          }
    }
  }
}

TEST(Translate, KernelOneEqualsPatchIn) {
  const auto gen = kin::Generator::from_seed(small_config(), 5);
  const auto img = colour_gradient(64, 64);
  const auto a = kin::translate(img, gen, with_mode(kin_mode(1))).output;
  const auto b = kin::translate(img, gen, with_mode(kin::NormMode::patch_in())).output;
  EXPECT_LT(oracle::max_abs_diff(a, b), 1e-5);
}

TEST(Translate, OrderAndThreadIndependence) {
  const auto gen = kin::Generator::from_seed(small_config(), 6);
  const auto img = colour_gradient(48, 64);
  for (const auto& mode : {kin_mode(3), kin::NormMode::tin()}) {
    const auto base = kin::translate(img, gen, with_mode(mode)).output;
    for (auto order : {kin::PatchOrder::ColumnMajor, kin::PatchOrder::Shuffled}) {
      for (int threads : {1, 3, 8}) {
        auto opts = with_mode(mode);
        opts.order = order;
        opts.order_seed = 99;
        opts.threads = threads;
        EXPECT_EQ(kin::translate(img, gen, opts).output, base) << threads;
      }
    }
  }
}

TEST(CachePass, FillsEveryCellAndIsThreadIndependent) {
  const auto gen = kin::Generator::from_seed(small_config(), 7);
  const auto img = colour_gradient(48, 32);
  const auto g = kin::make_grid(48, 32, 16, RemainderPolicy::PadReflect);
  auto opts = with_mode(kin_mode(3));
  auto one = gen.make_norm_states(opts.mode, g.rows, g.cols);
  kin::cache_pass(img, gen, g, one, opts);
  opts.threads = 8;
  opts.order = kin::PatchOrder::Shuffled;
  auto many = gen.make_norm_states(opts.mode, g.rows, g.cols);
  kin::cache_pass(img, gen, g, many, opts);
  for (std::size_t k = 0; k < one.size(); ++k) {
    EXPECT_EQ(one[k].table->filled_count(), 6u);
    EXPECT_TRUE(std::ranges::equal(one[k].table->mu_data(), many[k].table->mu_data()));
    EXPECT_TRUE(std::ranges::equal(one[k].table->sigma_data(), many[k].table->sigma_data()));
  }
}

TEST(InferPass, RefusesIncompleteTables) {
  const auto gen = kin::Generator::from_seed(small_config(), 8);
  const auto img = colour_gradient(32, 32);
  const auto g = kin::make_grid(32, 32, 16, RemainderPolicy::PadReflect);
  const auto opts = with_mode(kin_mode(3));
  auto states = gen.make_norm_states(opts.mode, g.rows, g.cols);
  gen.forward(kin::extract_patch(img, g, {0, 0}), states, opts.mode, Coord{0, 0}, kin::Phase::Caching);
  try {
    kin::infer_pass(img, gen, g, states, opts);
    FAIL();
  } catch (const kin::Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(1, 1)"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("(0, 0)"), std::string::npos) << msg;
  }
}

TEST(Tables, PersistedTablesReproduceOutput) {
  const auto gen = kin::Generator::from_seed(small_config(), 9);
  const auto img = colour_gradient(48, 48);
  const auto path = std::filesystem::temp_directory_path() / "kintile_tables_test.urw";
  auto opts = with_mode(kin_mode(3));
  opts.save_tables_path = path;
  const auto first = kin::translate(img, gen, opts);
  opts.save_tables_path.clear();
  opts.load_tables_path = path;
  const auto second = kin::translate(img, gen, opts);
  EXPECT_EQ(first.output, second.output);
  EXPECT_GT(first.report.table_bytes, 0u);

  // A table file for a different grid is rejected.
  const auto bigger = colour_gradient(64, 48);
  EXPECT_THROW(kin::translate(bigger, gen, opts), kin::Error);
  std::filesystem::remove(path);
}

TEST(Translate, FullInBudgetRefusal) {
  const auto gen = kin::Generator::from_seed(small_config(), 10);
  auto opts = with_mode(kin::NormMode::full_in());
  opts.full_in_max_pixels = 32 * 32;
  EXPECT_NO_THROW(kin::translate(colour_gradient(32, 32), gen, opts));
  try {
    kin::translate(colour_gradient(48, 32), gen, opts);
    FAIL();
  } catch (const kin::Error& e) {
    EXPECT_NE(std::string(e.what()).find("budget"), std::string::npos);
  }
}

TEST(Translate, TinUsesThumbnailOfImage) {
  const auto gen = kin::Generator::from_seed(small_config(), 11);
  const auto img = colour_gradient(32, 64);
  const auto g = kin::make_grid(32, 64, 16, RemainderPolicy::PadReflect);
  auto states = gen.make_norm_states(kin::NormMode::tin());
  const auto thumb = kin::bilinear_resize(kin::to_tensor(img), 16, 16);
  const auto probe = gen.stat_probe(thumb);
  kin::thumbnail_pass(img, gen, g, states);
  for (std::size_t k = 0; k < states.size(); ++k) {
    EXPECT_EQ(*states[k].thumbnail_mu, probe[k].mu);
    EXPECT_EQ(*states[k].thumbnail_sigma, probe[k].sigma);
  }
}

TEST(TranslationReport, JsonRoundTrip) {
  const auto gen = kin::Generator::from_seed(small_config(), 12);
  auto report = kin::translate(colour_gradient(32, 32), gen, with_mode(kin_mode(3))).report;
  report.output_path = "x.png";
  const auto back = kin::TranslationReport::from_json(report.to_json());
  EXPECT_EQ(back.to_json(), report.to_json());
  EXPECT_EQ(back.grid.rows, 2);
  EXPECT_EQ(back.kernel, report.kernel);
}

TEST(Translate, PeakMemoryIndependentOfGrid) {
  const auto gen = kin::Generator::from_seed(small_config(), 13);
  std::size_t peaks[2];
  int i = 0;
  for (std::size_t side : {32u, 96u}) {
    peaks[i++] = kin::translate(colour_gradient(side, side), gen, with_mode(kin_mode(3))).report.peak_tensor_bytes;
  }
  EXPECT_EQ(peaks[0], peaks[1]);
}
