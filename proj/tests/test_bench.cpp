#include <gtest/gtest.h>

#include "kin/bench.hpp"

namespace {

kin::Generator bench_generator() {
  kin::GeneratorConfig cfg;
  cfg.base_width = 8;
  cfg.n_resblocks = 1;
  cfg.patch_size = 16;
  return kin::Generator::from_seed(cfg, 1);
}

}  // namespace

TEST(MemoryBench, FlatTiledPeaksAndGrowingFullIn) {
  kin::MemoryBenchOptions opts;
  opts.grids = {2, 6};
  opts.full_in_sizes = {128, 256};
  opts.modes = {kin::NormKind::PatchIN, kin::NormKind::TIN, kin::NormKind::KIN, kin::NormKind::FullIN};
  const auto report = kin::run_memory_bench(bench_generator(), opts);
  ASSERT_EQ(report.checks.size(), 4u);
  for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.measured;
  EXPECT_EQ(report.rows.size(), 8u);
  // KIN table bytes grow with the grid; tensor peaks do not.
  const auto& k2 = report.rows[4];
  const auto& k6 = report.rows[5];
  EXPECT_EQ(k2.mode, "kin");
  EXPECT_EQ(k6.table_bytes, k2.table_bytes * 9);
  EXPECT_EQ(k6.peak_tensor_bytes, k2.peak_tensor_bytes);
}

TEST(MemoryBench, ReportRoundTripsThroughJson) {
  kin::MemoryBenchOptions opts;
  opts.grids = {1, 2};
  opts.modes = {kin::NormKind::KIN};
  const auto report = kin::run_memory_bench(bench_generator(), opts);
  EXPECT_EQ(kin::MemoryBenchReport::from_json(report.to_json()), report);
  EXPECT_EQ(report.to_json().at("passed").get<bool>(), report.passed());
}
