#include "kin/memory.hpp"

namespace kin {

MemoryMeter& MemoryMeter::global() {
  static MemoryMeter meter;
  return meter;
}

void MemoryMeter::on_alloc(std::size_t bytes) noexcept {
  const std::size_t now = current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t seen = peak_.load(std::memory_order_relaxed);
  while (now > seen && !peak_.compare_exchange_weak(seen, now, std::memory_order_relaxed)) {
  }
}

void MemoryMeter::on_free(std::size_t bytes) noexcept {
  current_.fetch_sub(bytes, std::memory_order_relaxed);
}

void MemoryMeter::reset_peak() noexcept {
  peak_.store(current_.load(std::memory_order_relaxed), std::memory_order_relaxed);
}

PeakScope::PeakScope() : baseline_(MemoryMeter::global().current_bytes()) {
  MemoryMeter::global().reset_peak();
}

std::size_t PeakScope::peak_above_baseline() const noexcept {
  const std::size_t peak = MemoryMeter::global().peak_bytes();
  return peak > baseline_ ? peak - baseline_ : 0;
}

}  // namespace kin
