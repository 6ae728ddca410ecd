#include "autocas/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace autocas {

namespace {

constexpr std::array<char, 4> kMagic{'A', 'C', 'K', 'P'};
constexpr std::uint32_t kMaxNameLength = 1u << 16;

template <typename U>
void put(std::ostream& out, U value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  U value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(U))) throw ParseError("checkpoint: truncated file", 0);
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& t : tensors) {
    if (static_cast<Eigen::Index>(t.values.size()) != t.rows * t.cols) {
      throw ShapeError("checkpoint: tensor '" + t.name + "' value count does not match its shape");
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols));
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(out, tensors);
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw ParseError("checkpoint: bad magic", 0);
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ParseError(detail::concat("checkpoint: unsupported version ", version), 0);
  }
  const auto count = get<std::uint64_t>(in);
  std::vector<NamedTensor> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_length = get<std::uint32_t>(in);
    if (name_length > kMaxNameLength) throw ParseError("checkpoint: implausible tensor name length", 0);
    t.name.resize(name_length);
    if (!in.read(t.name.data(), name_length)) throw ParseError("checkpoint: truncated file", 0);
    const auto rank = get<std::uint32_t>(in);
    if (rank != 2) throw ParseError(detail::concat("checkpoint: tensor '", t.name, "' has rank ", rank), 0);
    t.rows = static_cast<Eigen::Index>(get<std::uint64_t>(in));
    t.cols = static_cast<Eigen::Index>(get<std::uint64_t>(in));
    t.values.resize(static_cast<std::size_t>(t.rows * t.cols));
    if (!in.read(reinterpret_cast<char*>(t.values.data()),
                 static_cast<std::streamsize>(t.values.size() * sizeof(float)))) {
      throw ParseError("checkpoint: truncated file", 0);
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t checksum(const std::vector<NamedTensor>& tensors) {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tensors) {
    h = fnv1a(t.name.data(), t.name.size(), h);
    const std::int64_t shape[2] = {t.rows, t.cols};
    h = fnv1a(shape, sizeof(shape), h);
    h = fnv1a(t.values.data(), t.values.size() * sizeof(float), h);
  }
  return h;
}

}  // namespace autocas
