#include "kin/weight_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "kin/tensor.hpp"

namespace kin {

std::size_t NamedArray::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n, "entry name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(std::string("weight container truncated while reading ") + what + " at byte " +
                  std::to_string(pos_));
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_container(const WeightStore& store) {
  std::vector<std::uint8_t> out{'U', 'R', 'W', '1'};
  put_le<std::uint32_t>(out, kContainerVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, array] : store) {
    if (name.empty() || name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error("weight container: invalid entry name length for '" + name + "'");
    }
    if (array.dims.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw Error("weight container: rank too large for '" + name + "'");
    }
    if (array.numel() != array.values.size()) {
      throw Error("weight container: '" + name + "' has " + std::to_string(array.values.size()) +
                  " values for dims totalling " + std::to_string(array.numel()));
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(array.dims.size()));
    for (auto d : array.dims) put_le<std::uint32_t>(out, d);
    for (float v : array.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

WeightStore decode_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "URW1", 4) != 0) {
    throw Error("not a URW1 weight container (bad magic)");
  }
  Reader in(bytes);
  in.get_string(4);
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw Error("unsupported weight container version " + std::to_string(version));
  }
  const auto count = in.get_le<std::uint32_t>("entry count");
  WeightStore store;
  std::string previous;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = in.get_le<std::uint16_t>("name length");
    std::string name = in.get_string(len);
    if (e > 0 && !(previous < name)) {
      throw Error("weight container: entries not in sorted order or duplicated at '" + name + "'");
    }
    NamedArray array;
    const auto rank = in.get_le<std::uint8_t>("rank");
    std::size_t numel = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      array.dims.push_back(in.get_le<std::uint32_t>("dims"));
      numel *= array.dims.back();
    }
    if (numel > (bytes.size() - in.position()) / 4) {
      throw Error("weight container truncated in values of '" + name + "'");
    }
    array.values.resize(numel);
    for (float& v : array.values) v = std::bit_cast<float>(in.get_le<std::uint32_t>("values"));
    previous = name;
    store.emplace(std::move(name), std::move(array));
  }
  if (!in.done()) {
    throw Error("weight container has " + std::to_string(bytes.size() - in.position()) +
                " trailing bytes");
  }
  return store;
}

void write_container(const std::filesystem::path& path, const WeightStore& store) {
  const auto bytes = encode_container(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

WeightStore read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open weight file '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace kin
