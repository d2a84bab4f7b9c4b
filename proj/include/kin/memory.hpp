#pragma once

#include <atomic>
#include <cstddef>
#include <limits>
#include <new>

namespace kin {

/// Process-wide accounting of live tensor buffer bytes.
///
/// Every Tensor allocates through TrackingAllocator, which reports here, so
/// `peak_bytes()` is the high-water mark of simultaneously live activations,
/// weights and workspace buffers since the last `reset_peak()`.
class MemoryMeter {
 public:
  static MemoryMeter& global();

  void on_alloc(std::size_t bytes) noexcept;
  void on_free(std::size_t bytes) noexcept;

  std::size_t current_bytes() const noexcept { return current_.load(std::memory_order_relaxed); }
  std::size_t peak_bytes() const noexcept { return peak_.load(std::memory_order_relaxed); }

  // Drops the high-water mark to the current level.
  void reset_peak() noexcept;

 private:
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

/// Measures the peak above the level live at construction.
class PeakScope {
 public:
  PeakScope();
  std::size_t baseline_bytes() const noexcept { return baseline_; }
  std::size_t peak_above_baseline() const noexcept;

 private:
  std::size_t baseline_;
};

template <class T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n > std::numeric_limits<std::size_t>::max() / sizeof(T)) throw std::bad_array_new_length();
    auto* p = static_cast<T*>(::operator new(n * sizeof(T)));
    MemoryMeter::global().on_alloc(n * sizeof(T));
    return p;
  }

  void deallocate(T* p, std::size_t n) noexcept {
    MemoryMeter::global().on_free(n * sizeof(T));
    ::operator delete(p);
  }

  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

}  // namespace kin
