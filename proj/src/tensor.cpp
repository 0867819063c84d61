#include "claimcheck/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "claimcheck/error.hpp"

namespace claimcheck {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'E', 'M'};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T read(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string read_string(std::size_t n) {
    need(n, "unit id");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw Error(ErrorCode::kShapeMismatch,
                  std::string("truncated header while reading ") + what);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto v = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

}  // namespace

EmbeddingTensor EmbeddingTensor::sentence(std::vector<std::string> unit_ids,
                                          std::size_t dim,
                                          std::vector<float> values) {
  EmbeddingTensor t;
  t.kind_ = TensorKind::sentence;
  t.layers_ = 1;
  t.dim_ = dim;
  t.unit_ids_ = std::move(unit_ids);
  t.values_ = std::move(values);
  t.validate();
  t.build_index();
  return t;
}

EmbeddingTensor EmbeddingTensor::token_layers(
    std::vector<std::string> unit_ids, std::size_t layers, std::size_t dim,
    std::vector<std::uint32_t> token_counts, std::vector<float> values) {
  EmbeddingTensor t;
  t.kind_ = TensorKind::token_layers;
  t.layers_ = layers;
  t.dim_ = dim;
  t.unit_ids_ = std::move(unit_ids);
  t.token_counts_ = std::move(token_counts);
  t.values_ = std::move(values);
  t.validate();
  t.build_index();
  return t;
}

void EmbeddingTensor::validate() const {
  if (dim_ == 0) throw Error(ErrorCode::kShapeMismatch, "dim must be >= 1");
  if (layers_ == 0) {
    throw Error(ErrorCode::kShapeMismatch, "layer count must be >= 1");
  }
  if (kind_ == TensorKind::sentence && layers_ != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "sentence tensors carry exactly one layer");
  }
  std::size_t expected = 0;
  if (kind_ == TensorKind::sentence) {
    expected = unit_ids_.size() * dim_;
  } else {
    if (token_counts_.size() != unit_ids_.size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "token count list does not match unit count");
    }
    for (std::uint32_t n : token_counts_) expected += layers_ * n * dim_;
  }
  if (values_.size() != expected) {
    throw Error(ErrorCode::kShapeMismatch,
                "payload holds " + std::to_string(values_.size()) +
                    " floats, header declares " + std::to_string(expected));
  }
  std::size_t unit = 0;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (kind_ == TensorKind::sentence) {
      unit = i / dim_;
    } else {
      while (i >= offset + layers_ * token_counts_[unit] * dim_) {
        offset += layers_ * token_counts_[unit] * dim_;
        ++unit;
      }
    }
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kNonFinite,
                  "unit " + std::to_string(unit) + " ('" + unit_ids_[unit] +
                      "') contains a non-finite value");
    }
  }
}

void EmbeddingTensor::build_index() {
  index_.clear();
  offsets_.assign(unit_ids_.size() + 1, 0);
  for (std::size_t u = 0; u < unit_ids_.size(); ++u) {
    if (unit_ids_[u].empty() || unit_ids_[u].size() > 0xFFFF) {
      throw Error(ErrorCode::kValidation,
                  "unit id length out of range at unit " + std::to_string(u));
    }
    if (!index_.emplace(unit_ids_[u], u).second) {
      throw Error(ErrorCode::kValidation,
                  "duplicate unit id '" + unit_ids_[u] + "'");
    }
    const std::size_t size = kind_ == TensorKind::sentence
                                 ? dim_
                                 : layers_ * token_counts_[u] * dim_;
    offsets_[u + 1] = offsets_[u] + size;
  }
}

std::size_t EmbeddingTensor::find(const std::string& unit_id) const {
  auto it = index_.find(unit_id);
  return it == index_.end() ? npos : it->second;
}

std::span<const float> EmbeddingTensor::row(std::size_t unit) const {
  if (kind_ != TensorKind::sentence) {
    throw Error(ErrorCode::kInvalidArgument,
                "row() requires a sentence tensor");
  }
  return std::span<const float>(values_).subspan(offsets_[unit], dim_);
}

std::span<const float> EmbeddingTensor::unit_block(std::size_t unit) const {
  return std::span<const float>(values_).subspan(
      offsets_[unit], offsets_[unit + 1] - offsets_[unit]);
}

std::size_t EmbeddingTensor::tokens(std::size_t unit) const {
  return kind_ == TensorKind::sentence ? 1 : token_counts_[unit];
}

bool EmbeddingTensor::operator==(const EmbeddingTensor& other) const {
  return kind_ == other.kind_ && layers_ == other.layers_ &&
         dim_ == other.dim_ && unit_ids_ == other.unit_ids_ &&
         token_counts_ == other.token_counts_ && values_ == other.values_;
}

EmbeddingTensor decode_embeddings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kMagicMismatch, "missing CKEM magic");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.read<std::uint16_t>("version");
  if (version != kTensorVersion) {
    throw Error(ErrorCode::kParse,
                "unsupported tensor version " + std::to_string(version));
  }
  const auto kind_byte = r.read<std::uint8_t>("kind");
  if (kind_byte > 1) {
    throw Error(ErrorCode::kParse,
                "unknown tensor kind " + std::to_string(kind_byte));
  }
  const auto kind = static_cast<TensorKind>(kind_byte);
  const auto layers = r.read<std::uint16_t>("layers");
  const auto dim = r.read<std::uint32_t>("dim");
  const auto units = r.read<std::uint32_t>("unit count");

  std::vector<std::string> ids;
  std::vector<std::uint32_t> counts;
  ids.reserve(units);
  for (std::uint32_t u = 0; u < units; ++u) {
    const auto len = r.read<std::uint16_t>("unit id length");
    ids.push_back(r.read_string(len));
    if (kind == TensorKind::token_layers) {
      counts.push_back(r.read<std::uint32_t>("token count"));
    }
  }

  std::size_t expected = 0;
  if (kind == TensorKind::sentence) {
    expected = static_cast<std::size_t>(units) * dim;
  } else {
    for (std::uint32_t n : counts) {
      expected += static_cast<std::size_t>(layers) * n * dim;
    }
  }
  if (r.remaining() != expected * sizeof(float)) {
    throw Error(ErrorCode::kShapeMismatch,
                "payload is " + std::to_string(r.remaining()) +
                    " bytes, header declares " +
                    std::to_string(expected * sizeof(float)));
  }

  std::vector<float> values(expected);
  const auto payload = r.rest();
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
    }
    values[i] = std::bit_cast<float>(bits);
  }

  if (kind == TensorKind::sentence) {
    if (layers != 1) {
      throw Error(ErrorCode::kShapeMismatch,
                  "sentence tensors carry exactly one layer");
    }
    return EmbeddingTensor::sentence(std::move(ids), dim, std::move(values));
  }
  return EmbeddingTensor::token_layers(std::move(ids), layers, dim,
                                       std::move(counts), std::move(values));
}

EmbeddingTensor load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_embeddings(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingTensor& tensor) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint16_t>(out, kTensorVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.kind()));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(tensor.layers()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.unit_count()));
  for (std::size_t u = 0; u < tensor.unit_count(); ++u) {
    const std::string& id = tensor.unit_ids()[u];
    put<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
    if (tensor.kind() == TensorKind::token_layers) {
      put<std::uint32_t>(out, tensor.token_counts()[u]);
    }
  }
  out.reserve(out.size() + tensor.values().size() * 4);
  for (float v : tensor.values()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingTensor& tensor) {
  const auto bytes = encode_embeddings(tensor);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace claimcheck
