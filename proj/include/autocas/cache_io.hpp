#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "autocas/sparse.hpp"
#include "autocas/trainer.hpp"

namespace autocas {

/// Embedding cache: "ACEM", u32 version, u64 n, u64 d, then n*d f32 row-major.
inline constexpr std::uint32_t kEmbeddingCacheVersion = 1;
/// Token cache: "ACTK", u32 version, u64 N, u64 S, u64 count, then count*N*S
/// f32 row-major. The index CSV holds cascade_id,position,popularity.
inline constexpr std::uint32_t kTokenCacheVersion = 1;

void write_embedding_cache(const std::filesystem::path& path, const DenseMatrix& rows);
DenseMatrix read_embedding_cache(const std::filesystem::path& path);
void write_embedding_csv(const std::filesystem::path& path, const std::vector<std::string>& keys,
                         const DenseMatrix& rows);

void write_token_cache(const std::filesystem::path& bin, const std::filesystem::path& index, const TokenDataset& data);
TokenDataset read_token_cache(const std::filesystem::path& bin, const std::filesystem::path& index);

}  // namespace autocas
