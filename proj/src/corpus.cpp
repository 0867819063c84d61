#include "claimcheck/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "claimcheck/error.hpp"
#include "json.hpp"

namespace claimcheck {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kUposCount> kUposNames = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
};

constexpr std::array<std::string_view, 14> kNeNames = {
    "GPE", "PERSON", "ORG", "NORP", "LOC", "DATE", "CARDINAL", "TIME",
    "ORDINAL", "FAC", "MONEY", "PER", "MISC", "OTHER",
};

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

// Calls fn(json, line_number) for each non-blank line of a JSON Lines file.
template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, where(path, line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::kParse,
                  where(path, line_no) + ": expected a JSON object");
    }
    try {
      fn(obj, line_no);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, where(path, line_no) + ": " + e.what());
    }
  }
}

std::string required_string(const json& obj, const char* key,
                            const std::filesystem::path& path,
                            std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw Error(ErrorCode::kParse, where(path, line_no) +
                                       ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

std::optional<int> optional_label(const json& obj, const char* key,
                                  const std::filesystem::path& path,
                                  std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) {
    throw Error(ErrorCode::kValidation,
                where(path, line_no) + ": label '" + key + "' must be 0 or 1");
  }
  const int value = it->get<int>();
  if (value != 0 && value != 1) {
    throw Error(ErrorCode::kValidation,
                where(path, line_no) + ": label '" + key + "' must be 0 or 1");
  }
  return value;
}

}  // namespace

std::string_view language_name(Language lang) {
  return lang == Language::en ? "en" : "ar";
}

Language parse_language(std::string_view name) {
  if (name == "en") return Language::en;
  if (name == "ar") return Language::ar;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown language '" + std::string(name) + "'");
}

std::string_view upos_name(Upos tag) {
  return kUposNames[static_cast<std::size_t>(tag)];
}

std::optional<Upos> parse_upos(std::string_view name) {
  for (std::size_t i = 0; i < kUposNames.size(); ++i) {
    if (kUposNames[i] == name) return static_cast<Upos>(i);
  }
  return std::nullopt;
}

std::string_view ne_type_name(NeType type) {
  return kNeNames[static_cast<std::size_t>(type)];
}

std::optional<NeType> parse_ne_type(std::string_view name) {
  for (std::size_t i = 0; i < kNeNames.size(); ++i) {
    if (kNeNames[i] == name) return static_cast<NeType>(i);
  }
  return std::nullopt;
}

const std::set<std::string>* Qrels::find(const std::string& query_id) const {
  auto it = pairs.find(query_id);
  return it == pairs.end() ? nullptr : &it->second;
}

std::size_t Qrels::pair_count() const {
  std::size_t n = 0;
  for (const auto& [query, docs] : pairs) n += docs.size();
  return n;
}

std::vector<TweetRecord> load_tweets(const std::filesystem::path& path,
                                     Language language) {
  std::vector<TweetRecord> records;
  std::unordered_set<std::string> seen;
  for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
    TweetRecord rec;
    rec.id = required_string(obj, "id", path, line_no);
    rec.text = required_string(obj, "text", path, line_no);
    if (auto it = obj.find("topic_id"); it != obj.end() && !it->is_null()) {
      rec.topic_id = it->get<std::string>();
    }
    rec.claim_label = optional_label(obj, "claim_label", path, line_no);
    rec.checkworthy_label =
        optional_label(obj, "checkworthy_label", path, line_no);
    rec.language = language;
    if (auto it = obj.find("language"); it != obj.end()) {
      if (parse_language(it->get<std::string>()) != language) {
        throw Error(ErrorCode::kValidation,
                    where(path, line_no) + ": language mismatch for tweet '" +
                        rec.id + "'");
      }
    }
    if (rec.id.empty()) {
      throw Error(ErrorCode::kValidation, where(path, line_no) + ": empty id");
    }
    if (rec.text.empty()) {
      throw Error(ErrorCode::kValidation,
                  where(path, line_no) + ": empty text for tweet '" + rec.id +
                      "'");
    }
    if (!seen.insert(rec.id).second) {
      throw Error(ErrorCode::kValidation,
                  where(path, line_no) + ": duplicate tweet id '" + rec.id +
                      "'");
    }
    records.push_back(std::move(rec));
  });
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, path.string() + " has no tweets");
  }
  return records;
}

void validate_annotated_tweet(const AnnotatedTweet& tweet) {
  const std::string ctx = "tweet '" + tweet.tweet_id + "'";
  if (tweet.tweet_id.empty()) {
    throw Error(ErrorCode::kValidation, "annotation with empty tweet_id");
  }
  if (tweet.tokens.empty() && !tweet.degenerate) {
    throw Error(ErrorCode::kValidation,
                ctx + ": empty token list must be flagged degenerate");
  }
  const auto n = static_cast<int>(tweet.tokens.size());
  std::map<int, int> roots_per_sentence;
  for (int i = 0; i < n; ++i) {
    const TokenAnnotation& tok = tweet.tokens[static_cast<std::size_t>(i)];
    if (tok.sentence < 0) {
      throw Error(ErrorCode::kValidation,
                  ctx + ": negative sentence index at token " +
                      std::to_string(i));
    }
    roots_per_sentence.try_emplace(tok.sentence, 0);
    if (tok.head == -1) {
      ++roots_per_sentence[tok.sentence];
      continue;
    }
    if (tok.head < -1 || tok.head >= n || tok.head == i) {
      throw Error(ErrorCode::kValidation,
                  ctx + ": dangling head " + std::to_string(tok.head) +
                      " at token " + std::to_string(i) + " of " +
                      std::to_string(n));
    }
    if (tweet.tokens[static_cast<std::size_t>(tok.head)].sentence !=
        tok.sentence) {
      throw Error(ErrorCode::kValidation,
                  ctx + ": head of token " + std::to_string(i) +
                      " crosses a sentence boundary");
    }
  }
  for (const auto& [sentence, roots] : roots_per_sentence) {
    if (roots != 1) {
      throw Error(ErrorCode::kValidation,
                  ctx + ": sentence " + std::to_string(sentence) + " has " +
                      std::to_string(roots) + " roots");
    }
  }
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  AnnotationSet out;
  std::unordered_set<std::string> seen;
  for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
    AnnotatedTweet tweet;
    tweet.tweet_id = required_string(obj, "tweet_id", path, line_no);
    tweet.degenerate = obj.value("degenerate", false);
    const auto tokens = obj.find("tokens");
    if (tokens == obj.end() || !tokens->is_array()) {
      throw Error(ErrorCode::kParse,
                  where(path, line_no) + ": missing token array");
    }
    for (const json& t : *tokens) {
      TokenAnnotation tok;
      tok.surface = t.value("surface", "");
      tok.lemma = t.value("lemma", "");
      const std::string upos = t.at("upos").get<std::string>();
      const auto tag = parse_upos(upos);
      if (!tag) {
        throw Error(ErrorCode::kValidation,
                    where(path, line_no) + ": unknown upos '" + upos + "'");
      }
      tok.upos = *tag;
      if (auto ne = t.find("ne_type"); ne != t.end() && !ne->is_null()) {
        const std::string name = ne->get<std::string>();
        if (!name.empty()) {
          if (auto type = parse_ne_type(name)) {
            tok.ne_type = *type;
          } else {
            tok.ne_type = NeType::OTHER;
            ++out.unknown_ne_count;
          }
        }
      }
      tok.head = t.at("head").get<int>();
      tok.dep_rel = t.value("dep_rel", "");
      tok.is_stopword = t.value("is_stopword", false);
      tok.sentence = t.value("sentence", 0);
      tweet.tokens.push_back(std::move(tok));
    }
    try {
      validate_annotated_tweet(tweet);
    } catch (const Error& e) {
      throw Error(e.code(), where(path, line_no) + ": " + e.what());
    }
    if (!seen.insert(tweet.tweet_id).second) {
      throw Error(ErrorCode::kValidation,
                  where(path, line_no) + ": duplicate annotation for '" +
                      tweet.tweet_id + "'");
    }
    out.tweets.push_back(std::move(tweet));
  });
  return out;
}

std::string serialize_annotation(const AnnotatedTweet& tweet) {
  json tokens = json::array();
  for (const TokenAnnotation& tok : tweet.tokens) {
    json t = {
        {"surface", tok.surface},
        {"lemma", tok.lemma},
        {"upos", upos_name(tok.upos)},
        {"head", tok.head},
        {"dep_rel", tok.dep_rel},
        {"is_stopword", tok.is_stopword},
        {"sentence", tok.sentence},
    };
    if (tok.ne_type) t["ne_type"] = ne_type_name(*tok.ne_type);
    tokens.push_back(std::move(t));
  }
  json obj = {{"tweet_id", tweet.tweet_id}, {"tokens", std::move(tokens)}};
  if (tweet.degenerate) obj["degenerate"] = true;
  return obj.dump();
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotatedTweet>& tweets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const AnnotatedTweet& t : tweets) out << serialize_annotation(t) << '\n';
}

void validate_annotations_against(const AnnotationSet& annotations,
                                  const std::vector<TweetRecord>& tweets) {
  std::unordered_set<std::string> ids;
  for (const TweetRecord& t : tweets) ids.insert(t.id);
  for (const AnnotatedTweet& a : annotations.tweets) {
    if (!ids.count(a.tweet_id)) {
      throw Error(ErrorCode::kValidation,
                  "annotation references unknown tweet '" + a.tweet_id + "'");
    }
  }
}

std::vector<ClaimRecord> load_claims(const std::filesystem::path& path) {
  std::vector<ClaimRecord> claims;
  std::unordered_set<std::string> seen;
  for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
    ClaimRecord c;
    c.claim_id = required_string(obj, "claim_id", path, line_no);
    c.text = obj.value("text", "");
    c.title = obj.value("title", "");
    if (c.claim_id.empty()) {
      throw Error(ErrorCode::kValidation,
                  where(path, line_no) + ": empty claim_id");
    }
    if (c.text.empty() && c.title.empty()) {
      throw Error(ErrorCode::kValidation, where(path, line_no) + ": claim '" +
                                              c.claim_id +
                                              "' has neither text nor title");
    }
    if (!seen.insert(c.claim_id).second) {
      throw Error(ErrorCode::kValidation,
                  where(path, line_no) + ": duplicate claim id '" +
                      c.claim_id + "'");
    }
    claims.push_back(std::move(c));
  });
  if (claims.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, path.string() + " has no claims");
  }
  return claims;
}

Qrels load_qrels(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorCode::kParse, where(path, line_no) +
                                         ": expected 'tweet_id<TAB>claim_id'");
    }
    qrels.pairs[line.substr(0, tab)].insert(line.substr(tab + 1));
  }
  if (qrels.pairs.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, path.string() + " has no judgments");
  }
  return qrels;
}

Qrels load_qrels(const std::filesystem::path& path,
                 const std::vector<TweetRecord>& tweets,
                 const std::vector<ClaimRecord>& claims) {
  Qrels qrels = load_qrels(path);
  std::unordered_set<std::string> tweet_ids;
  std::unordered_set<std::string> claim_ids;
  for (const TweetRecord& t : tweets) tweet_ids.insert(t.id);
  for (const ClaimRecord& c : claims) claim_ids.insert(c.claim_id);
  for (const auto& [tweet, docs] : qrels.pairs) {
    if (!tweet_ids.count(tweet)) {
      throw Error(ErrorCode::kValidation,
                  "qrels reference unknown tweet '" + tweet + "'");
    }
    for (const std::string& claim : docs) {
      if (!claim_ids.count(claim)) {
        throw Error(ErrorCode::kValidation,
                    "qrels reference unknown claim '" + claim + "'");
      }
    }
  }
  return qrels;
}

}  // namespace claimcheck
