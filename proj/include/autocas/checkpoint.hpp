#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "autocas/autograd.hpp"

namespace autocas {

/// Checkpoint layout (little endian):
///   "ACKP", u32 version, u64 tensor count, then per tensor
///   u32 name length, name bytes, u32 rank, u64 extents[rank], f32 values (row-major).
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<float> values;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors);
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

/// FNV-1a, 64-bit; pass a previous result as `hash` to continue a stream.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash = kFnvOffset);

/// FNV-1a over names, shapes and value bytes.
std::uint64_t checksum(const std::vector<NamedTensor>& tensors);

template <typename T>
NamedTensor snapshot(const ag::Tensor<T>& t) {
  NamedTensor out{t.name(), t.rows(), t.cols(), {}};
  out.values.resize(static_cast<std::size_t>(t.size()));
  const auto& v = t.value();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.values[static_cast<std::size_t>(i)] = static_cast<float>(v.data()[i]);
  return out;
}

template <typename T>
std::vector<NamedTensor> snapshot(const std::vector<ag::Tensor<T>>& tensors) {
  std::vector<NamedTensor> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(snapshot(t));
  return out;
}

/// Copies stored values into `targets`, matched by name. Every target must be
/// present with the same shape.
template <typename T>
void restore(std::vector<ag::Tensor<T>>& targets, const std::vector<NamedTensor>& stored) {
  for (auto& t : targets) {
    const NamedTensor* found = nullptr;
    for (const auto& s : stored) {
      if (s.name == t.name()) {
        found = &s;
        break;
      }
    }
    if (!found) throw ValidationError("checkpoint: missing tensor '" + t.name() + "'");
    if (found->rows != t.rows() || found->cols != t.cols()) {
      throw ShapeError("checkpoint: tensor '" + t.name() + "' is " + std::to_string(found->rows) + "x" +
                       std::to_string(found->cols) + ", model expects " + t.shape());
    }
    auto& v = t.value_mut();
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<T>(found->values[static_cast<std::size_t>(i)]);
  }
}

}  // namespace autocas
