#pragma once

// Binary float tensor container ("CKEM").
//
// Layout, all integers little-endian:
//   magic "CKEM" | version u16 | kind u8 (0=sentence, 1=token_layers)
//   | layers u16 | dim u32 | unit count u32
//   | per unit: id length u16, UTF-8 id bytes, token count u32 (token_layers only)
//   | payload of little-endian f32, row-major
//
// Payload shape is (units x dim) for sentence tensors. For token_layers each
// unit contributes (layers x tokens_u x dim) values, layer-major.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace claimcheck {

enum class TensorKind : std::uint8_t { sentence = 0, token_layers = 1 };

inline constexpr std::uint16_t kTensorVersion = 1;

class EmbeddingTensor {
 public:
  EmbeddingTensor() = default;

  static EmbeddingTensor sentence(std::vector<std::string> unit_ids,
                                  std::size_t dim, std::vector<float> values);
  static EmbeddingTensor token_layers(std::vector<std::string> unit_ids,
                                      std::size_t layers, std::size_t dim,
                                      std::vector<std::uint32_t> token_counts,
                                      std::vector<float> values);

  TensorKind kind() const { return kind_; }
  std::size_t layers() const { return layers_; }
  std::size_t dim() const { return dim_; }
  std::size_t unit_count() const { return unit_ids_.size(); }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::uint32_t>& token_counts() const { return token_counts_; }
  const std::vector<float>& values() const { return values_; }

  // Index of a unit id, or npos.
  std::size_t find(const std::string& unit_id) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Sentence kind: the unit's D values.
  std::span<const float> row(std::size_t unit) const;

  // Token-layer kind: the unit's (layers x tokens x dim) block.
  std::span<const float> unit_block(std::size_t unit) const;
  std::size_t tokens(std::size_t unit) const;

  bool operator==(const EmbeddingTensor& other) const;

 private:
  void build_index();
  void validate() const;

  TensorKind kind_ = TensorKind::sentence;
  std::size_t layers_ = 1;
  std::size_t dim_ = 0;
  std::vector<std::string> unit_ids_;
  std::vector<std::uint32_t> token_counts_;
  std::vector<std::size_t> offsets_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingTensor load_embeddings(const std::filesystem::path& path);
EmbeddingTensor decode_embeddings(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_embeddings(const EmbeddingTensor& tensor);
void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingTensor& tensor);

}  // namespace claimcheck
