#include "autocas/cache_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace autocas {

namespace {

constexpr std::array<char, 4> kEmbeddingMagic{'A', 'C', 'E', 'M'};
constexpr std::array<char, 4> kTokenMagic{'A', 'C', 'T', 'K'};

template <typename U>
void put(std::ostream& out, U value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U get(std::istream& in, const char* what) {
  U value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(U))) throw ParseError(std::string(what) + ": truncated file", 0);
  return value;
}

void expect_header(std::istream& in, const std::array<char, 4>& magic, std::uint32_t version, const char* what) {
  std::array<char, 4> seen{};
  if (!in.read(seen.data(), seen.size()) || seen != magic) throw ParseError(std::string(what) + ": bad magic", 0);
  const auto v = get<std::uint32_t>(in, what);
  if (v != version) throw ParseError(detail::concat(what, ": unsupported version ", v), 0);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

void write_embedding_cache(const std::filesystem::path& path, const DenseMatrix& rows) {
  auto out = open_out(path);
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  put<std::uint32_t>(out, kEmbeddingCacheVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(rows.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(rows.cols()));
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values = rows.cast<float>();
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DenseMatrix read_embedding_cache(const std::filesystem::path& path) {
  auto in = open_in(path);
  expect_header(in, kEmbeddingMagic, kEmbeddingCacheVersion, "embedding cache");
  const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(in, "embedding cache"));
  const auto d = static_cast<Eigen::Index>(get<std::uint64_t>(in, "embedding cache"));
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values(n, d);
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)))) {
    throw ParseError("embedding cache: truncated file", 0);
  }
  return values.cast<double>();
}

void write_embedding_csv(const std::filesystem::path& path, const std::vector<std::string>& keys,
                         const DenseMatrix& rows) {
  if (static_cast<Eigen::Index>(keys.size()) != rows.rows()) throw ShapeError("embedding csv: key count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "key";
  for (Eigen::Index c = 0; c < rows.cols(); ++c) out << ",e" << c;
  out << '\n' << std::setprecision(9);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out << keys[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out << ',' << rows(r, c);
    out << '\n';
  }
}

void write_token_cache(const std::filesystem::path& bin, const std::filesystem::path& index, const TokenDataset& data) {
  data.validate();
  auto out = open_out(bin);
  out.write(kTokenMagic.data(), kTokenMagic.size());
  put<std::uint32_t>(out, kTokenCacheVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(data.seq_len));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(data.token_dim()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(data.size()));
  out.write(reinterpret_cast<const char*>(data.tokens.data()),
            static_cast<std::streamsize>(data.tokens.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + bin.string());

  std::ofstream idx(index);
  if (!idx) throw std::runtime_error("cannot open " + index.string() + " for writing");
  idx << "cascade_id,position,popularity\n" << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    idx << (data.ids.empty() ? std::to_string(i) : data.ids[i]) << ',' << i << ',' << data.popularity[i] << '\n';
  }
}

TokenDataset read_token_cache(const std::filesystem::path& bin, const std::filesystem::path& index) {
  auto in = open_in(bin);
  expect_header(in, kTokenMagic, kTokenCacheVersion, "token cache");
  TokenDataset data;
  data.seq_len = static_cast<Eigen::Index>(get<std::uint64_t>(in, "token cache"));
  const auto s = static_cast<Eigen::Index>(get<std::uint64_t>(in, "token cache"));
  const auto count = static_cast<Eigen::Index>(get<std::uint64_t>(in, "token cache"));
  data.tokens.resize(count * data.seq_len, s);
  if (!in.read(reinterpret_cast<char*>(data.tokens.data()),
               static_cast<std::streamsize>(data.tokens.size() * sizeof(float)))) {
    throw ParseError("token cache: truncated file", 0);
  }

  std::ifstream idx(index);
  if (!idx) throw std::runtime_error("cannot open " + index.string());
  std::string line;
  std::size_t line_no = 1;
  std::getline(idx, line);
  data.ids.resize(static_cast<std::size_t>(count));
  data.popularity.resize(static_cast<std::size_t>(count));
  std::vector<bool> seen(static_cast<std::size_t>(count), false);
  while (std::getline(idx, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, position, popularity;
    if (!std::getline(fields, id, ',') || !std::getline(fields, position, ',') || !std::getline(fields, popularity)) {
      throw ParseError("token index: expected cascade_id,position,popularity", line_no);
    }
    std::size_t pos = 0;
    double pop = 0.0;
    const auto r1 = std::from_chars(position.data(), position.data() + position.size(), pos);
    const auto r2 = std::from_chars(popularity.data(), popularity.data() + popularity.size(), pop);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || pos >= seen.size() || seen[pos]) {
      throw ParseError("token index: bad or duplicate entry", line_no);
    }
    seen[pos] = true;
    data.ids[pos] = id;
    data.popularity[pos] = pop;
  }
  for (const bool s_ : seen) {
    if (!s_) throw ParseError("token index: missing entries for some cached sequences", line_no);
  }
  return data;
}

}  // namespace autocas
