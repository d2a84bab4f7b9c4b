#include "kin/normstrat.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kin {

namespace {

std::string coord_str(Coord at) {
  return "(" + std::to_string(at.row) + ", " + std::to_string(at.col) + ")";
}

void require_single(const Tensor& features, const char* what) {
  if (features.shape().batch != 1) {
    throw Error(std::string(what) + ": expected a single patch, got batch " +
                std::to_string(features.shape().batch));
  }
}

void require_channels(const NormLayerState& state, const Tensor& features) {
  if (features.shape().channels != state.channels()) {
    throw Error("norm layer " + std::to_string(state.layer_id) + ": features have " +
                std::to_string(features.shape().channels) + " channels, layer expects " +
                std::to_string(state.channels()));
  }
}

ChannelStats single_stats(std::vector<float> mu, std::vector<float> sigma) {
  const std::size_t c = mu.size();
  return ChannelStats{1, c, std::move(mu), std::move(sigma)};
}

}  // namespace

KinKernel build_kernel(KernelKind kind, int size, std::optional<double> gaussian_sigma) {
  KinKernel k;
  k.kind_ = kind;
  if (kind == KernelKind::Global) {
    k.size_ = 0;
    k.weights_.clear();
    return k;
  }
  if (size < 1 || size % 2 == 0) {
    throw Error("kernel size must be odd and >= 1, got " + std::to_string(size));
  }
  k.size_ = size;
  const auto n = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
  if (kind == KernelKind::Constant) {
    k.weights_.assign(n, 1.0 / static_cast<double>(n));
    return k;
  }
  const double sigma = gaussian_sigma.value_or(static_cast<double>(size) / 3.0);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error("gaussian kernel sigma must be positive and finite");
  }
  k.sigma_ = sigma;
  k.weights_.resize(n);
  const int q = size / 2;
  double total = 0.0;
  for (int u = -q; u <= q; ++u) {
    for (int v = -q; v <= q; ++v) {
      const double w = std::exp(-static_cast<double>(u * u + v * v) / (2.0 * sigma * sigma));
      k.weights_[static_cast<std::size_t>((u + q) * size + (v + q))] = w;
      total += w;
    }
  }
  for (double& w : k.weights_) w /= total;
  return k;
}

std::string KinKernel::describe() const {
  std::ostringstream os;
  os << to_string(kind_);
  if (kind_ == KernelKind::Global) return os.str();
  os << '-' << size_;
  if (kind_ == KernelKind::Gaussian) os << "(sigma=" << sigma_ << ')';
  return os.str();
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "constant") return KernelKind::Constant;
  if (name == "gaussian") return KernelKind::Gaussian;
  if (name == "global" || name == "inf") return KernelKind::Global;
  throw Error("unknown kernel kind '" + name + "' (expected constant, gaussian or global)");
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Constant: return "constant";
    case KernelKind::Gaussian: return "gaussian";
    case KernelKind::Global: return "global";
  }
  return "?";
}

NormKind parse_norm_kind(const std::string& name) {
  if (name == "full-in") return NormKind::FullIN;
  if (name == "patch-in") return NormKind::PatchIN;
  if (name == "tin") return NormKind::TIN;
  if (name == "kin") return NormKind::KIN;
  throw Error("unknown mode '" + name + "' (expected full-in, patch-in, tin or kin)");
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::FullIN: return "full-in";
    case NormKind::PatchIN: return "patch-in";
    case NormKind::TIN: return "tin";
    case NormKind::KIN: return "kin";
  }
  return "?";
}

std::string NormMode::describe() const {
  if (kind == NormKind::KIN && kernel) return "kin[" + kernel->describe() + "]";
  return to_string(kind);
}

// --- StatTable ---------------------------------------------------------------

StatTable::StatTable(int rows, int cols, std::size_t channels)
    : rows_(rows), cols_(cols), channels_(channels) {
  if (rows < 1 || cols < 1 || channels < 1) {
    throw Error("stat table needs positive dimensions, got " + std::to_string(rows) + "x" +
                std::to_string(cols) + "x" + std::to_string(channels));
  }
  const auto cells = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  mu_.assign(cells * channels, 0.0f);
  sigma_.assign(cells * channels, 0.0f);
  filled_ = std::make_unique<std::atomic<bool>[]>(cells);
  for (std::size_t i = 0; i < cells; ++i) filled_[i].store(false, std::memory_order_relaxed);
}

void StatTable::check_bounds(Coord at) const {
  if (at.row < 0 || at.row >= rows_ || at.col < 0 || at.col >= cols_) {
    throw Error("stat table: coordinate " + coord_str(at) + " outside " + std::to_string(rows_) +
                "x" + std::to_string(cols_) + " grid");
  }
}

std::size_t StatTable::offset(Coord at) const {
  return static_cast<std::size_t>(at.row) * static_cast<std::size_t>(cols_) +
         static_cast<std::size_t>(at.col);
}

void StatTable::write(Coord at, std::span<const float> mu, std::span<const float> sigma) {
  check_bounds(at);
  if (mu.size() != channels_ || sigma.size() != channels_) {
    throw Error("stat table: expected " + std::to_string(channels_) + " channels per cell");
  }
  const std::size_t cell = offset(at);
  if (filled_[cell].exchange(true, std::memory_order_acq_rel)) {
    throw Error("stat table: cell " + coord_str(at) + " already cached");
  }
  std::copy(mu.begin(), mu.end(), mu_.begin() + static_cast<std::ptrdiff_t>(cell * channels_));
  std::copy(sigma.begin(), sigma.end(),
            sigma_.begin() + static_cast<std::ptrdiff_t>(cell * channels_));
}

bool StatTable::filled(Coord at) const {
  check_bounds(at);
  return filled_[offset(at)].load(std::memory_order_acquire);
}

std::size_t StatTable::filled_count() const {
  const auto cells = static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_);
  std::size_t n = 0;
  for (std::size_t i = 0; i < cells; ++i) n += filled_[i].load(std::memory_order_acquire) ? 1 : 0;
  return n;
}

std::vector<Coord> StatTable::unfilled_cells() const {
  std::vector<Coord> missing;
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c)
      if (!filled({r, c})) missing.push_back({r, c});
  return missing;
}

std::span<const float> StatTable::mu(Coord at) const {
  check_bounds(at);
  return std::span<const float>(mu_).subspan(offset(at) * channels_, channels_);
}

std::span<const float> StatTable::sigma(Coord at) const {
  check_bounds(at);
  return std::span<const float>(sigma_).subspan(offset(at) * channels_, channels_);
}

// --- statistics strategies -----------------------------------------------------

void cache_stats(NormLayerState& state, const Tensor& features, Coord at) {
  if (!state.table) {
    throw Error("norm layer " + std::to_string(state.layer_id) + ": no caching table (mode is not KIN)");
  }
  require_single(features, "cache_stats");
  require_channels(state, features);
  const ChannelStats own = channel_stats(features);
  state.table->write(at, own.mu, own.sigma);
}

ChannelStats kin_stats(const NormLayerState& state, Coord at, const KinKernel& kernel) {
  if (!state.table) {
    throw Error("norm layer " + std::to_string(state.layer_id) + ": no caching table (mode is not KIN)");
  }
  const StatTable& table = *state.table;
  if (!table.complete()) {
    std::string cells;
    for (Coord c : table.unfilled_cells()) cells += " " + coord_str(c);
    throw Error("norm layer " + std::to_string(state.layer_id) +
                ": caching phase incomplete, unfilled cells:" + cells);
  }
  const std::size_t channels = table.channels();
  std::vector<double> mu(channels, 0.0);
  std::vector<double> sigma(channels, 0.0);

  if (kernel.kind() == KernelKind::Global) {
    for (int r = 0; r < table.rows(); ++r) {
      for (int c = 0; c < table.cols(); ++c) {
        const auto m = table.mu({r, c});
        const auto s = table.sigma({r, c});
        for (std::size_t ch = 0; ch < channels; ++ch) {
          mu[ch] += m[ch];
          sigma[ch] += s[ch];
        }
      }
    }
    const double cells = static_cast<double>(table.rows()) * static_cast<double>(table.cols());
    for (std::size_t ch = 0; ch < channels; ++ch) {
      mu[ch] /= cells;
      sigma[ch] /= cells;
    }
  } else {
    if (at.row < 0 || at.row >= table.rows() || at.col < 0 || at.col >= table.cols()) {
      throw Error("kin_stats: coordinate " + coord_str(at) + " outside table");
    }
    const int q = kernel.radius();
    for (int u = -q; u <= q; ++u) {
      const int r = std::clamp(at.row + u, 0, table.rows() - 1);
      for (int v = -q; v <= q; ++v) {
        const int c = std::clamp(at.col + v, 0, table.cols() - 1);
        const double w = kernel.weight(q + u, q + v);
        const auto m = table.mu({r, c});
        const auto s = table.sigma({r, c});
        for (std::size_t ch = 0; ch < channels; ++ch) {
          mu[ch] += static_cast<double>(m[ch]) * w;
          sigma[ch] += static_cast<double>(s[ch]) * w;
        }
      }
    }
  }

  std::vector<float> out_mu(channels);
  std::vector<float> out_sigma(channels);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    out_mu[ch] = static_cast<float>(mu[ch]);
    out_sigma[ch] = static_cast<float>(sigma[ch]);
  }
  return single_stats(std::move(out_mu), std::move(out_sigma));
}

void tin_capture(NormLayerState& state, const Tensor& thumbnail_features) {
  require_single(thumbnail_features, "tin_capture");
  require_channels(state, thumbnail_features);
  ChannelStats s = channel_stats(thumbnail_features);
  state.thumbnail_mu = std::move(s.mu);
  state.thumbnail_sigma = std::move(s.sigma);
}

Tensor apply_norm(NormLayerState& state, const Tensor& features, std::optional<Coord> at,
                  const NormMode& mode, Phase phase) {
  require_channels(state, features);
  switch (mode.kind) {
    case NormKind::FullIN:
    case NormKind::PatchIN:
      return normalize_with_stats(features, channel_stats(features), state.gamma, state.beta,
                                  state.eps);

    case NormKind::TIN: {
      if (phase == Phase::Caching) {
        tin_capture(state, features);
        return normalize_with_stats(features,
                                    single_stats(*state.thumbnail_mu, *state.thumbnail_sigma),
                                    state.gamma, state.beta, state.eps);
      }
      if (!state.thumbnail_mu || !state.thumbnail_sigma) {
        throw Error("norm layer " + std::to_string(state.layer_id) +
                    ": TIN inference requires the thumbnail capture phase to run first");
      }
      require_single(features, "TIN inference");
      return normalize_with_stats(features,
                                  single_stats(*state.thumbnail_mu, *state.thumbnail_sigma),
                                  state.gamma, state.beta, state.eps);
    }

    case NormKind::KIN: {
      if (!mode.kernel) throw Error("KIN mode requires a kernel");
      if (!at) {
        throw Error("norm layer " + std::to_string(state.layer_id) +
                    ": KIN requires the patch coordinate");
      }
      if (phase == Phase::Caching) {
        cache_stats(state, features, *at);
        const StatTable& t = *state.table;
        return normalize_with_stats(
            features, single_stats({t.mu(*at).begin(), t.mu(*at).end()},
                                   {t.sigma(*at).begin(), t.sigma(*at).end()}),
            state.gamma, state.beta, state.eps);
      }
      require_single(features, "KIN inference");
      return normalize_with_stats(features, kin_stats(state, *at, *mode.kernel), state.gamma,
                                  state.beta, state.eps);
    }
  }
  throw Error("unknown normalization mode");
}

}  // namespace kin
