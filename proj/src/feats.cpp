#include "claimcheck/feats.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "claimcheck/error.hpp"

namespace claimcheck {

namespace {

bool keep_token(const TokenAnnotation& tok, const FeatureConfig& cfg) {
  return cfg.use_stopwords || !tok.is_stopword;
}

Encoded normalized(std::vector<double> counts, bool degenerate) {
  return Encoded{max_normalize(counts), degenerate};
}

std::size_t layers_required(Pooling strategy) {
  switch (strategy) {
    case Pooling::concat_last4:
    case Pooling::avg_last4:
      return 4;
    case Pooling::second_last:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::concat_last4: return "concat_last4";
    case Pooling::avg_last4: return "avg_last4";
    case Pooling::last: return "last";
    case Pooling::second_last: return "second_last";
    case Pooling::cls: return "cls";
    case Pooling::avg_word: return "avg_word";
    case Pooling::sentence: return "sentence";
  }
  return "?";
}

Pooling parse_pooling(std::string_view name) {
  for (Pooling p : {Pooling::concat_last4, Pooling::avg_last4, Pooling::last,
                    Pooling::second_last, Pooling::cls, Pooling::avg_word,
                    Pooling::sentence}) {
    if (pooling_name(p) == name) return p;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown pooling strategy '" + std::string(name) + "'");
}

std::string_view dep_mode_name(DepMode m) {
  return m == DepMode::pair ? "pair" : "triplet";
}

DepMode parse_dep_mode(std::string_view name) {
  if (name == "pair") return DepMode::pair;
  if (name == "triplet") return DepMode::triplet;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown dependency mode '" + std::string(name) + "'");
}

std::vector<Upos> default_pos_tagset(Language lang) {
  std::vector<Upos> tags = {Upos::NOUN, Upos::VERB, Upos::PROPN, Upos::ADJ,
                            Upos::ADV,  Upos::NUM,  Upos::ADP,   Upos::PRON};
  if (lang == Language::ar) {
    tags.insert(tags.end(), {Upos::DET, Upos::INTJ, Upos::AUX, Upos::PART});
  }
  return tags;
}

std::vector<NeType> default_ne_typeset(Language lang) {
  if (lang == Language::ar) {
    return {NeType::LOC, NeType::PER, NeType::ORG, NeType::MISC};
  }
  return {NeType::GPE,      NeType::PERSON, NeType::ORG,  NeType::NORP,
          NeType::LOC,      NeType::DATE,   NeType::CARDINAL, NeType::TIME,
          NeType::ORDINAL,  NeType::FAC,    NeType::MONEY};
}

FeatureConfig FeatureConfig::for_language(Language lang) {
  FeatureConfig cfg;
  cfg.language = lang;
  cfg.pos_tagset = default_pos_tagset(lang);
  cfg.ne_typeset = default_ne_typeset(lang);
  return cfg;
}

void FeatureConfig::validate() const {
  if (pos_tagset != default_pos_tagset(language)) {
    throw Error(ErrorCode::kInvalidArgument,
                "POS tag set does not match the fixed ordering for '" +
                    std::string(language_name(language)) + "'");
  }
  if (ne_typeset != default_ne_typeset(language)) {
    throw Error(ErrorCode::kInvalidArgument,
                "entity type set does not match the fixed ordering for '" +
                    std::string(language_name(language)) + "'");
  }
}

bool is_dependency_content_pos(Upos tag) {
  switch (tag) {
    case Upos::ADJ:
    case Upos::ADV:
    case Upos::NOUN:
    case Upos::PROPN:
    case Upos::VERB:
    case Upos::NUM:
      return true;
    default:
      return false;
  }
}

DepVocab::DepVocab(DepMode mode, std::vector<DepKey> sorted_unique_keys)
    : mode_(mode), entries_(std::move(sorted_unique_keys)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i], i).second) {
      throw Error(ErrorCode::kValidation, "duplicate dependency key");
    }
  }
}

std::optional<std::size_t> DepVocab::index_of(const DepKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<DepKey> dependency_keys(const AnnotatedTweet& tweet, DepMode mode,
                                    bool use_stopwords) {
  std::vector<DepKey> keys;
  for (const TokenAnnotation& child : tweet.tokens) {
    if (child.head < 0) continue;
    const TokenAnnotation& parent =
        tweet.tokens[static_cast<std::size_t>(child.head)];
    if (!use_stopwords && (child.is_stopword || parent.is_stopword)) continue;
    if (!is_dependency_content_pos(child.upos) ||
        !is_dependency_content_pos(parent.upos)) {
      continue;
    }
    DepKey key{std::string(upos_name(child.upos)), child.dep_rel, {}};
    if (mode == DepMode::triplet) key.parent_pos = upos_name(parent.upos);
    keys.push_back(std::move(key));
  }
  return keys;
}

std::vector<double> max_normalize(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  if (peak > 0.0) {
    for (double& x : out) x /= peak;
  }
  return out;
}

std::vector<double> l2_normalize(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  double sq = 0.0;
  for (double x : out) sq += x * x;
  if (sq > 0.0) {
    const double norm = std::sqrt(sq);
    for (double& x : out) x /= norm;
  }
  return out;
}

Encoded encode_pos_histogram(const AnnotatedTweet& tweet,
                             const FeatureConfig& cfg) {
  std::vector<double> counts(cfg.pos_tagset.size(), 0.0);
  for (const TokenAnnotation& tok : tweet.tokens) {
    if (!keep_token(tok, cfg)) continue;
    auto it = std::find(cfg.pos_tagset.begin(), cfg.pos_tagset.end(), tok.upos);
    if (it != cfg.pos_tagset.end()) {
      counts[static_cast<std::size_t>(it - cfg.pos_tagset.begin())] += 1.0;
    }
  }
  return normalized(std::move(counts), tweet.tokens.empty());
}

Encoded encode_ne_histogram(const AnnotatedTweet& tweet,
                            const FeatureConfig& cfg) {
  std::vector<double> counts(cfg.ne_typeset.size(), 0.0);
  for (const TokenAnnotation& tok : tweet.tokens) {
    if (!tok.ne_type || *tok.ne_type == NeType::OTHER) continue;
    if (!keep_token(tok, cfg)) continue;
    auto it = std::find(cfg.ne_typeset.begin(), cfg.ne_typeset.end(),
                        *tok.ne_type);
    if (it != cfg.ne_typeset.end()) {
      counts[static_cast<std::size_t>(it - cfg.ne_typeset.begin())] += 1.0;
    }
  }
  return normalized(std::move(counts), tweet.tokens.empty());
}

DepVocab build_dep_vocab(std::span<const AnnotatedTweet> training,
                         DepMode mode, bool use_stopwords) {
  if (training.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "dependency vocabulary needs a non-empty training split");
  }
  std::set<DepKey> keys;
  for (const AnnotatedTweet& tweet : training) {
    for (DepKey& key : dependency_keys(tweet, mode, use_stopwords)) {
      keys.insert(std::move(key));
    }
  }
  if (keys.empty()) {
    throw Error(ErrorCode::kValidation,
                "no qualifying dependency arcs in the training split");
  }
  return DepVocab(mode, std::vector<DepKey>(keys.begin(), keys.end()));
}

Encoded encode_dep_pairs(const AnnotatedTweet& tweet, const DepVocab& vocab,
                         const FeatureConfig& cfg) {
  std::vector<double> counts(vocab.size(), 0.0);
  for (const DepKey& key :
       dependency_keys(tweet, vocab.mode(), cfg.use_stopwords)) {
    if (auto idx = vocab.index_of(key)) counts[*idx] += 1.0;
  }
  return normalized(std::move(counts), tweet.tokens.empty());
}

WordTable WordTable::from_tensor(const EmbeddingTensor& tensor) {
  if (tensor.kind() != TensorKind::sentence) {
    throw Error(ErrorCode::kInvalidArgument,
                "word tables are stored as sentence tensors");
  }
  WordTable table(tensor.dim());
  for (std::size_t u = 0; u < tensor.unit_count(); ++u) {
    const auto row = tensor.row(u);
    table.add(tensor.unit_ids()[u], std::vector<double>(row.begin(), row.end()));
  }
  return table;
}

void WordTable::add(const std::string& word, std::vector<double> vec) {
  if (table_.empty() && dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "word vector for '" + word + "' has dim " +
                    std::to_string(vec.size()) + ", table dim is " +
                    std::to_string(dim_));
  }
  table_[word] = std::move(vec);
}

const std::vector<double>* WordTable::find(const std::string& word) const {
  auto it = table_.find(word);
  return it == table_.end() ? nullptr : &it->second;
}

Encoded average_word_embeddings(const AnnotatedTweet& tweet,
                                const WordTable& table,
                                const FeatureConfig& cfg) {
  std::vector<double> sum(table.dim(), 0.0);
  std::size_t found = 0;
  for (const TokenAnnotation& tok : tweet.tokens) {
    if (!keep_token(tok, cfg)) continue;
    const std::vector<double>* vec = table.find(tok.surface);
    if (vec == nullptr) continue;
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += (*vec)[d];
    ++found;
  }
  if (found == 0) return Encoded{std::move(sum), true};
  for (double& x : sum) x /= static_cast<double>(found);
  return Encoded{std::move(sum), false};
}

std::size_t pooled_dim(Pooling strategy, std::size_t dim) {
  return strategy == Pooling::concat_last4 ? 4 * dim : dim;
}

Encoded pool_transformer_layers(std::span<const float> block,
                                std::size_t layers, std::size_t tokens,
                                std::size_t dim, Pooling strategy) {
  if (strategy == Pooling::avg_word || strategy == Pooling::sentence) {
    throw Error(ErrorCode::kInvalidArgument,
                "pooling '" + std::string(pooling_name(strategy)) +
                    "' does not operate on transformer layers");
  }
  const std::size_t needed = layers_required(strategy);
  if (layers < needed) {
    throw Error(ErrorCode::kInvalidArgument,
                "pooling '" + std::string(pooling_name(strategy)) + "' needs " +
                    std::to_string(needed) + " layers, tensor has " +
                    std::to_string(layers));
  }
  if (block.size() != layers * tokens * dim) {
    throw Error(ErrorCode::kShapeMismatch, "token-layer block size mismatch");
  }
  const std::size_t out_dim = pooled_dim(strategy, dim);
  std::vector<double> pooled(out_dim, 0.0);
  if (tokens == 0) return Encoded{std::move(pooled), true};

  auto at = [&](std::size_t layer, std::size_t token, std::size_t d) {
    return static_cast<double>(block[(layer * tokens + token) * dim + d]);
  };
  const std::size_t last = layers - 1;

  switch (strategy) {
    case Pooling::cls:
      for (std::size_t d = 0; d < dim; ++d) pooled[d] = at(last, 0, d);
      break;
    case Pooling::concat_last4:
      // Layer order within the concatenation: last, second last, ...
      for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t k = 0; k < 4; ++k) {
          for (std::size_t d = 0; d < dim; ++d) {
            pooled[k * dim + d] += at(last - k, t, d);
          }
        }
      }
      break;
    case Pooling::avg_last4:
      for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t d = 0; d < dim; ++d) {
          double s = 0.0;
          for (std::size_t k = 0; k < 4; ++k) s += at(last - k, t, d);
          pooled[d] += s / 4.0;
        }
      }
      break;
    case Pooling::last:
    case Pooling::second_last: {
      const std::size_t layer = strategy == Pooling::last ? last : last - 1;
      for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t d = 0; d < dim; ++d) pooled[d] += at(layer, t, d);
      }
      break;
    }
    default:
      break;
  }
  if (strategy != Pooling::cls) {
    for (double& x : pooled) x /= static_cast<double>(tokens);
  }
  return Encoded{l2_normalize(pooled), false};
}

std::vector<double> FeatureVector::flatten() const {
  std::vector<double> out;
  out.reserve(total_dim);
  for (const auto& [name, values] : segments) {
    out.insert(out.end(), values.begin(), values.end());
  }
  return out;
}

namespace {

Encoded embedding_segment(const AnnotatedTweet& tweet, const FeatureConfig& cfg,
                          const EmbeddingSource& src) {
  if (cfg.pooling == Pooling::avg_word) {
    if (src.words == nullptr) {
      throw Error(ErrorCode::kInvalidArgument,
                  "avg_word pooling requires a word table");
    }
    return average_word_embeddings(tweet, *src.words, cfg);
  }
  if (src.tensor == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding segment requires an embedding tensor");
  }
  const EmbeddingTensor& t = *src.tensor;
  const std::size_t unit = t.find(tweet.tweet_id);
  if (unit == EmbeddingTensor::npos) {
    throw Error(ErrorCode::kValidation,
                "no embedding for tweet '" + tweet.tweet_id + "'");
  }
  if (cfg.pooling == Pooling::sentence) {
    if (t.kind() != TensorKind::sentence) {
      throw Error(ErrorCode::kInvalidArgument,
                  "sentence pooling requires a sentence tensor");
    }
    const auto row = t.row(unit);
    std::vector<double> v(row.begin(), row.end());
    const bool zero =
        std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    return Encoded{l2_normalize(v), zero};
  }
  if (t.kind() != TensorKind::token_layers) {
    throw Error(ErrorCode::kInvalidArgument,
                "pooling '" + std::string(pooling_name(cfg.pooling)) +
                    "' requires a token_layers tensor");
  }
  return pool_transformer_layers(t.unit_block(unit), t.layers(),
                                 t.tokens(unit), t.dim(), cfg.pooling);
}

}  // namespace

FeatureVector fuse_features(const AnnotatedTweet& tweet,
                            const FeatureConfig& cfg, const DepVocab& vocab,
                            const EmbeddingSource& embeddings) {
  FeatureVector fv;
  fv.degenerate = tweet.tokens.empty();
  auto add = [&](const char* name, Encoded enc) {
    fv.total_dim += enc.values.size();
    fv.segments.emplace_back(name, std::move(enc.values));
  };
  if (cfg.use_pos) add("pos", encode_pos_histogram(tweet, cfg));
  if (cfg.use_ne) add("ne", encode_ne_histogram(tweet, cfg));
  if (cfg.use_dep) add("dep", encode_dep_pairs(tweet, vocab, cfg));
  if (cfg.use_embedding) {
    Encoded emb = embedding_segment(tweet, cfg, embeddings);
    fv.degenerate = fv.degenerate || emb.degenerate;
    add("embedding", std::move(emb));
  }
  return fv;
}

std::vector<std::pair<std::string, std::size_t>> segment_layout(
    const FeatureConfig& cfg, const DepVocab& vocab,
    std::size_t embedding_dim) {
  std::vector<std::pair<std::string, std::size_t>> layout;
  if (cfg.use_pos) layout.emplace_back("pos", cfg.pos_tagset.size());
  if (cfg.use_ne) layout.emplace_back("ne", cfg.ne_typeset.size());
  if (cfg.use_dep) layout.emplace_back("dep", vocab.size());
  if (cfg.use_embedding) layout.emplace_back("embedding", embedding_dim);
  return layout;
}

}  // namespace claimcheck
