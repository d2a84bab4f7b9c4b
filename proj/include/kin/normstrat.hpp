#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kin/tensor.hpp"

namespace kin {

/// Patch position in the tile grid.
struct Coord {
  int row = 0;
  int col = 0;
  bool operator==(const Coord&) const = default;
};

enum class KernelKind { Constant, Gaussian, Global };

/// Spatial weights convolved over the statistics tables.
///
/// Constant and Gaussian kernels are odd-sized and normalized to sum to one.
/// Global is a sentinel for "uniform average over every table cell" and has no
/// materialized weights.
class KinKernel {
 public:
  KernelKind kind() const noexcept { return kind_; }
  int size() const noexcept { return size_; }
  int radius() const noexcept { return size_ / 2; }
  double gaussian_sigma() const noexcept { return sigma_; }
  // Row-major size x size weights; empty for Global.
  std::span<const double> weights() const noexcept { return weights_; }
  double weight(int row, int col) const { return weights_.at(row * size_ + col); }

  std::string describe() const;

  friend KinKernel build_kernel(KernelKind, int, std::optional<double>);

 private:
  KernelKind kind_ = KernelKind::Constant;
  int size_ = 1;
  double sigma_ = 0.0;
  std::vector<double> weights_{1.0};
};

/// Builds a kernel. `size` must be odd and >= 1 for Constant and Gaussian and is
/// ignored for Global. Gaussian sigma defaults to size / 3.
KinKernel build_kernel(KernelKind kind, int size = 1, std::optional<double> gaussian_sigma = {});

KernelKind parse_kernel_kind(const std::string& name);
std::string to_string(KernelKind kind);

/// Per-layer caching tables of patch mean / std, one C-vector per grid cell.
/// Cells are write-once; writes to distinct cells may race freely.
class StatTable {
 public:
  StatTable(int rows, int cols, std::size_t channels);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t channels() const noexcept { return channels_; }

  void write(Coord at, std::span<const float> mu, std::span<const float> sigma);
  bool filled(Coord at) const;
  std::size_t filled_count() const;
  std::vector<Coord> unfilled_cells() const;
  bool complete() const { return filled_count() == static_cast<std::size_t>(rows_ * cols_); }

  std::span<const float> mu(Coord at) const;
  std::span<const float> sigma(Coord at) const;
  std::span<const float> mu_data() const noexcept { return mu_; }
  std::span<const float> sigma_data() const noexcept { return sigma_; }

  // Bytes held by the two value grids.
  std::size_t bytes() const noexcept { return (mu_.size() + sigma_.size()) * sizeof(float); }

 private:
  std::size_t offset(Coord at) const;
  void check_bounds(Coord at) const;

  int rows_;
  int cols_;
  std::size_t channels_;
  std::vector<float> mu_;
  std::vector<float> sigma_;
  std::unique_ptr<std::atomic<bool>[]> filled_;
};

enum class NormKind { FullIN, PatchIN, TIN, KIN };

/// Which statistics every normalization site uses during a translation.
struct NormMode {
  NormKind kind = NormKind::PatchIN;
  std::optional<KinKernel> kernel;  // present iff kind == KIN

  static NormMode full_in() { return {NormKind::FullIN, std::nullopt}; }
  static NormMode patch_in() { return {NormKind::PatchIN, std::nullopt}; }
  static NormMode tin() { return {NormKind::TIN, std::nullopt}; }
  static NormMode kin(KinKernel k) { return {NormKind::KIN, std::move(k)}; }

  std::string describe() const;
};

NormKind parse_norm_kind(const std::string& name);
std::string to_string(NormKind kind);

enum class Phase { Caching, Inference };

struct NormLayerState {
  int layer_id = 0;
  std::vector<float> gamma;
  std::vector<float> beta;
  float eps = 1e-5f;
  std::optional<StatTable> table;                  // KIN only
  std::optional<std::vector<float>> thumbnail_mu;  // TIN only
  std::optional<std::vector<float>> thumbnail_sigma;

  std::size_t channels() const noexcept { return gamma.size(); }
};

/// Records the patch's own statistics at `at`. Fails on a second write to the
/// same cell, an out-of-range coordinate or a missing table.
void cache_stats(NormLayerState& state, const Tensor& features, Coord at);

/// Kernel-weighted statistics around `at`, clamping indices to the table
/// (edge-value padding). Footprint cells are visited row-major and products
/// accumulated in double. Global averages every cell. Requires a complete table.
ChannelStats kin_stats(const NormLayerState& state, Coord at, const KinKernel& kernel);

void tin_capture(NormLayerState& state, const Tensor& thumbnail_features);

Tensor apply_norm(NormLayerState& state, const Tensor& features, std::optional<Coord> at,
                  const NormMode& mode, Phase phase);

}  // namespace kin
