#pragma once

// Interchange data model: tweets, token annotations, verified claims and
// relevance judgments. Records travel as UTF-8 JSON Lines, judgments as TSV.
// Every loader validates fully and either returns a consistent corpus or
// throws; nothing partially valid is ever handed back.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace claimcheck {

enum class Language { en, ar };

std::string_view language_name(Language lang);
Language parse_language(std::string_view name);

struct TweetRecord {
  std::string id;
  std::string topic_id;
  std::string text;
  std::optional<int> claim_label;
  std::optional<int> checkworthy_label;
  Language language = Language::en;
};

// Universal POS tag set (17 tags), alphabetical.
enum class Upos {
  ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM,
  PART, PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X,
};
inline constexpr std::size_t kUposCount = 17;

std::string_view upos_name(Upos tag);
std::optional<Upos> parse_upos(std::string_view name);

enum class NeType {
  GPE, PERSON, ORG, NORP, LOC, DATE, CARDINAL, TIME, ORDINAL,
  FAC, MONEY, PER, MISC, OTHER,
};

std::string_view ne_type_name(NeType type);
std::optional<NeType> parse_ne_type(std::string_view name);

struct TokenAnnotation {
  std::string surface;
  std::string lemma;
  Upos upos = Upos::X;
  std::optional<NeType> ne_type;
  int head = -1;  // index into the tweet's token list, -1 for a sentence root
  std::string dep_rel;
  bool is_stopword = false;
  // Sentence index within the tweet. Each sentence carries exactly one root.
  int sentence = 0;

  bool operator==(const TokenAnnotation&) const = default;
};

struct AnnotatedTweet {
  std::string tweet_id;
  std::vector<TokenAnnotation> tokens;
  bool degenerate = false;

  bool operator==(const AnnotatedTweet&) const = default;
};

struct AnnotationSet {
  std::vector<AnnotatedTweet> tweets;
  // Number of ne_type strings outside the known set that were mapped to OTHER.
  std::size_t unknown_ne_count = 0;
};

struct ClaimRecord {
  std::string claim_id;
  std::string text;
  std::string title;
};

struct Qrels {
  std::map<std::string, std::set<std::string>> pairs;

  const std::set<std::string>* find(const std::string& query_id) const;
  std::size_t pair_count() const;
};

std::vector<TweetRecord> load_tweets(const std::filesystem::path& path,
                                     Language language);

std::string normalize_text(std::string_view raw);

// Throws on any token-level invariant violation.
void validate_annotated_tweet(const AnnotatedTweet& tweet);

AnnotationSet load_annotations(const std::filesystem::path& path);
std::string serialize_annotation(const AnnotatedTweet& tweet);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotatedTweet>& tweets);

// Cross-reference check: every annotation must name a known tweet.
void validate_annotations_against(const AnnotationSet& annotations,
                                  const std::vector<TweetRecord>& tweets);

std::vector<ClaimRecord> load_claims(const std::filesystem::path& path);

// Qrels TSV: "tweet_id<TAB>claim_id" per line.
Qrels load_qrels(const std::filesystem::path& path);
Qrels load_qrels(const std::filesystem::path& path,
                 const std::vector<TweetRecord>& tweets,
                 const std::vector<ClaimRecord>& claims);

}  // namespace claimcheck
