#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace kin {

/// One named float32 array of arbitrary rank.
struct NamedArray {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t numel() const;
  bool operator==(const NamedArray&) const = default;
};

/// Name -> array map; std::map keeps the byte-wise sorted order the container requires.
using WeightStore = std::map<std::string, NamedArray>;

// Container layout (all integers little-endian):
//   "URW1" | u32 version (=1) | u32 entry count
//   per entry, sorted by name: u16 name length | UTF-8 name | u8 rank |
//                              u32 dims[rank] | float32 values[prod(dims)]
inline constexpr std::uint32_t kContainerVersion = 1;

std::vector<std::uint8_t> encode_container(const WeightStore& store);
WeightStore decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const WeightStore& store);
WeightStore read_container(const std::filesystem::path& path);

}  // namespace kin
