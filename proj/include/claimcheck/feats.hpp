#pragma once

// Per-tweet feature encoding: syntactic histograms (POS, named entities,
// dependency arcs) fused with a pooled sentence embedding.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "claimcheck/tensor.hpp"

namespace claimcheck {

enum class DepMode { pair, triplet };

enum class Pooling {
  concat_last4,
  avg_last4,
  last,
  second_last,
  cls,
  avg_word,
  // Precomputed sentence embedding (kind=sentence tensor), used as is.
  sentence,
};

std::string_view pooling_name(Pooling p);
Pooling parse_pooling(std::string_view name);
std::string_view dep_mode_name(DepMode m);
DepMode parse_dep_mode(std::string_view name);

struct FeatureConfig {
  Language language = Language::en;
  bool use_stopwords = true;
  bool use_pos = true;
  bool use_ne = true;
  bool use_dep = true;
  bool use_embedding = true;
  DepMode dep_mode = DepMode::pair;
  Pooling pooling = Pooling::concat_last4;
  std::vector<Upos> pos_tagset;
  std::vector<NeType> ne_typeset;

  // Defaults for a language, with its fixed tag and entity orderings.
  static FeatureConfig for_language(Language lang);

  // Throws if the tag sets deviate from the language's fixed orderings.
  void validate() const;
};

std::vector<Upos> default_pos_tagset(Language lang);
std::vector<NeType> default_ne_typeset(Language lang);

// Node POS tags allowed on both ends of a counted dependency arc.
bool is_dependency_content_pos(Upos tag);

struct DepKey {
  std::string child_pos;
  std::string dep_rel;
  std::string parent_pos;  // empty in pair mode

  auto operator<=>(const DepKey&) const = default;
};

class DepVocab {
 public:
  DepVocab() = default;
  DepVocab(DepMode mode, std::vector<DepKey> sorted_unique_keys);

  DepMode mode() const { return mode_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<DepKey>& entries() const { return entries_; }
  std::optional<std::size_t> index_of(const DepKey& key) const;

 private:
  DepMode mode_ = DepMode::pair;
  std::vector<DepKey> entries_;
  std::map<DepKey, std::size_t> index_;
};

// Qualifying arcs of a tweet in token order, after stopword filtering.
std::vector<DepKey> dependency_keys(const AnnotatedTweet& tweet, DepMode mode,
                                    bool use_stopwords);

// Histogram result; `degenerate` marks an empty or fully filtered input.
struct Encoded {
  std::vector<double> values;
  bool degenerate = false;
};

std::vector<double> max_normalize(std::span<const double> v);
std::vector<double> l2_normalize(std::span<const double> v);

Encoded encode_pos_histogram(const AnnotatedTweet& tweet,
                             const FeatureConfig& cfg);
Encoded encode_ne_histogram(const AnnotatedTweet& tweet,
                            const FeatureConfig& cfg);
DepVocab build_dep_vocab(std::span<const AnnotatedTweet> training,
                         DepMode mode, bool use_stopwords = true);
Encoded encode_dep_pairs(const AnnotatedTweet& tweet, const DepVocab& vocab,
                         const FeatureConfig& cfg);

class WordTable {
 public:
  WordTable() = default;
  explicit WordTable(std::size_t dim) : dim_(dim) {}
  // Builds from a sentence tensor whose unit ids are the words.
  static WordTable from_tensor(const EmbeddingTensor& tensor);

  void add(const std::string& word, std::vector<double> vec);
  std::size_t dim() const { return dim_; }
  const std::vector<double>* find(const std::string& word) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

Encoded average_word_embeddings(const AnnotatedTweet& tweet,
                                const WordTable& table,
                                const FeatureConfig& cfg);

// `block` is one unit of a token_layers tensor: (layers x tokens x dim).
Encoded pool_transformer_layers(std::span<const float> block,
                                std::size_t layers, std::size_t tokens,
                                std::size_t dim, Pooling strategy);

// Where the embedding segment comes from. Exactly one source is consulted,
// selected by FeatureConfig::pooling.
struct EmbeddingSource {
  const EmbeddingTensor* tensor = nullptr;  // token_layers or sentence
  const WordTable* words = nullptr;         // avg_word
};

struct FeatureVector {
  std::vector<std::pair<std::string, std::vector<double>>> segments;
  std::size_t total_dim = 0;
  bool degenerate = false;

  std::vector<double> flatten() const;
};

FeatureVector fuse_features(const AnnotatedTweet& tweet,
                            const FeatureConfig& cfg, const DepVocab& vocab,
                            const EmbeddingSource& embeddings);

// Segment names and lengths implied by a configuration, independent of any
// tweet. `embedding_dim` is the pooled embedding width.
std::vector<std::pair<std::string, std::size_t>> segment_layout(
    const FeatureConfig& cfg, const DepVocab& vocab, std::size_t embedding_dim);

std::size_t pooled_dim(Pooling strategy, std::size_t dim);

}  // namespace claimcheck
