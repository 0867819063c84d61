#include "synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "claimcheck/error.hpp"
#include "json.hpp"

namespace synth {

namespace fs = std::filesystem;
using claimcheck::AnnotatedTweet;
using claimcheck::NeType;
using claimcheck::TokenAnnotation;
using claimcheck::TweetRecord;
using claimcheck::Upos;

namespace {

struct TagWeight {
  Upos tag;
  double base;
  double checkworthy;
};

constexpr TagWeight kTagWeights[] = {
    {Upos::NOUN, 5, 5},  {Upos::VERB, 4, 4},  {Upos::PROPN, 1, 4},
    {Upos::ADJ, 2, 2},   {Upos::ADV, 2, 1},   {Upos::NUM, 0.5, 3},
    {Upos::ADP, 3, 3},   {Upos::PRON, 3, 1},  {Upos::DET, 3, 3},
    {Upos::PUNCT, 2, 2}, {Upos::AUX, 1, 1},   {Upos::CCONJ, 1, 1},
    {Upos::INTJ, 0.5, 0.1},
};

std::string dep_rel_for(Upos tag, std::mt19937_64& rng) {
  switch (tag) {
    case Upos::NOUN: return rng() % 2 ? "nsubj" : "obj";
    case Upos::VERB: return rng() % 2 ? "conj" : "ccomp";
    case Upos::PROPN: return rng() % 2 ? "compound" : "flat";
    case Upos::ADJ: return "amod";
    case Upos::ADV: return "advmod";
    case Upos::NUM: return "nummod";
    case Upos::ADP: return "case";
    case Upos::DET: return "det";
    case Upos::PRON: return "nsubj";
    case Upos::PUNCT: return "punct";
    case Upos::AUX: return "aux";
    case Upos::CCONJ: return "cc";
    default: return "dep";
  }
}

bool stopword_tag(Upos tag) {
  return tag == Upos::ADP || tag == Upos::DET || tag == Upos::PRON ||
         tag == Upos::AUX || tag == Upos::CCONJ;
}

AnnotatedTweet make_annotation(const std::string& id, bool positive,
                               std::mt19937_64& rng) {
  std::vector<double> weights;
  for (const auto& w : kTagWeights) weights.push_back(positive ? w.checkworthy : w.base);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uniform_int_distribution<int> len(8, 16);

  AnnotatedTweet tweet;
  tweet.tweet_id = id;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    TokenAnnotation tok;
    tok.upos = i == 0 ? Upos::VERB : kTagWeights[pick(rng)].tag;
    tok.surface = tok.upos == Upos::NUM ? std::to_string(rng() % 1000)
                                        : "w" + std::to_string(rng() % 500);
    tok.lemma = tok.surface;
    tok.head = i == 0 ? -1 : static_cast<int>(rng() % static_cast<unsigned>(i));
    tok.dep_rel = i == 0 ? "root" : dep_rel_for(tok.upos, rng);
    tok.is_stopword = stopword_tag(tok.upos);
    if (tok.upos == Upos::PROPN) {
      constexpr NeType kinds[] = {NeType::PERSON, NeType::ORG, NeType::GPE};
      tok.ne_type = kinds[rng() % 3];
    } else if (tok.upos == Upos::NUM) {
      constexpr NeType kinds[] = {NeType::CARDINAL, NeType::DATE, NeType::MONEY};
      tok.ne_type = kinds[rng() % 3];
    }
    tweet.tokens.push_back(std::move(tok));
  }
  return tweet;
}

std::string join_surfaces(const AnnotatedTweet& t) {
  std::string s;
  for (const auto& tok : t.tokens) s += (s.empty() ? "" : " ") + tok.surface;
  return s;
}

Eigen::VectorXd random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
  return v.normalized();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw claimcheck::Error(claimcheck::ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::vector<float> flatten_rows(const std::vector<Eigen::VectorXd>& rows) {
  std::vector<float> out;
  for (const auto& r : rows) {
    for (Eigen::Index i = 0; i < r.size(); ++i) out.push_back(static_cast<float>(r(i)));
  }
  return out;
}

}  // namespace

CheckworthyCorpus make_checkworthy(const CheckworthyOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::bernoulli_distribution positive(opts.positive_rate);
  std::normal_distribution<double> noise(0.0, opts.token_noise);
  const Eigen::VectorXd direction = random_unit(opts.dim, rng);

  CheckworthyCorpus corpus;
  std::vector<std::string> unit_ids;
  std::vector<std::uint32_t> token_counts;
  std::vector<float> values;

  auto fill = [&](const std::string& split, std::size_t count,
                  std::vector<TweetRecord>& out) {
    for (std::size_t i = 0; i < count; ++i) {
      char id[48];
      std::snprintf(id, sizeof(id), "%s-%04zu", split.c_str(), i);
      const bool pos = positive(rng);
      AnnotatedTweet ann = make_annotation(id, pos, rng);

      TweetRecord tw;
      tw.id = id;
      tw.topic_id = split + "-topic-" + std::to_string(i % opts.topics_per_split);
      tw.text = join_surfaces(ann);
      tw.checkworthy_label = pos ? 1 : 0;
      tw.claim_label = pos ? 1 : static_cast<int>(rng() % 2);
      out.push_back(tw);

      // (layer, token, dim) block; every token sits around its class centre.
      const std::size_t T = ann.tokens.size();
      for (std::size_t l = 0; l < opts.layers; ++l) {
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t d = 0; d < opts.dim; ++d) {
            const double centre = pos ? opts.embedding_shift * direction(static_cast<Eigen::Index>(d)) : 0.0;
            values.push_back(static_cast<float>(centre + noise(rng)));
          }
        }
      }
      unit_ids.push_back(id);
      token_counts.push_back(static_cast<std::uint32_t>(T));
      corpus.annotations.push_back(std::move(ann));
    }
  };
  fill("train", opts.train, corpus.train);
  fill("dev", opts.dev, corpus.dev);
  fill("test", opts.test, corpus.test);
  corpus.embeddings = claimcheck::EmbeddingTensor::token_layers(
      std::move(unit_ids), opts.layers, opts.dim, std::move(token_counts), std::move(values));
  return corpus;
}

RetrievalCorpus make_retrieval(const RetrievalOptions& opts) {
  if (opts.train_queries + opts.test_queries > opts.claims) {
    throw claimcheck::Error(claimcheck::ErrorCode::kInvalidArgument,
                            "more queries than claims");
  }
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> g(0.0, opts.noise);
  auto perturb = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = v;
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += g(rng);
    return out.normalized();
  };

  RetrievalCorpus c;
  std::vector<std::string> claim_ids;
  std::vector<Eigen::VectorXd> text(opts.claims), title(opts.claims);
  for (std::size_t i = 0; i < opts.claims; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "vclaim-%05zu", i);
    claim_ids.push_back(id);
    c.claims.push_back({id, "verified claim " + std::to_string(i),
                        "claim title " + std::to_string(i)});
    text[i] = random_unit(opts.dim, rng);
    title[i] = perturb(text[i]);
  }

  std::vector<std::size_t> order(opts.claims);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::string> query_ids;
  std::vector<Eigen::VectorXd> query_vecs;
  auto fill = [&](const std::string& split, std::size_t count, std::size_t offset,
                  std::vector<TweetRecord>& tweets, claimcheck::Qrels& qrels) {
    for (std::size_t i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s-q%04zu", split.c_str(), i);
      const std::size_t target = order[offset + i];
      const Eigen::VectorXd q = random_unit(opts.dim, rng);
      text[target] = perturb(q);
      title[target] = perturb(q);
      TweetRecord tw;
      tw.id = id;
      tw.topic_id = split;
      tw.text = "tweet about claim " + std::to_string(target);
      tweets.push_back(tw);
      qrels.pairs[id].insert(claim_ids[target]);
      query_ids.push_back(id);
      query_vecs.push_back(q);
    }
  };
  fill("train", opts.train_queries, 0, c.train, c.train_qrels);
  fill("test", opts.test_queries, opts.train_queries, c.test, c.test_qrels);

  c.claim_text = claimcheck::EmbeddingTensor::sentence(claim_ids, opts.dim, flatten_rows(text));
  c.claim_title = claimcheck::EmbeddingTensor::sentence(claim_ids, opts.dim, flatten_rows(title));
  c.queries = claimcheck::EmbeddingTensor::sentence(query_ids, opts.dim, flatten_rows(query_vecs));
  return c;
}

void write_tweets(const fs::path& path, const std::vector<TweetRecord>& tweets) {
  std::string out;
  for (const auto& t : tweets) {
    nlohmann::json j = {{"id", t.id}, {"text", t.text}, {"topic_id", t.topic_id},
                        {"language", claimcheck::language_name(t.language)}};
    j["claim_label"] = t.claim_label ? nlohmann::json(*t.claim_label) : nlohmann::json();
    j["checkworthy_label"] =
        t.checkworthy_label ? nlohmann::json(*t.checkworthy_label) : nlohmann::json();
    out += j.dump() + "\n";
  }
  write_text(path, out);
}

void write_claims(const fs::path& path, const std::vector<claimcheck::ClaimRecord>& claims) {
  std::string out;
  for (const auto& c : claims) {
    nlohmann::json j = {{"claim_id", c.claim_id}};
    if (!c.text.empty()) j["text"] = c.text;
    if (!c.title.empty()) j["title"] = c.title;
    out += j.dump() + "\n";
  }
  write_text(path, out);
}

void write_checkworthy(const fs::path& dir, const CheckworthyCorpus& c) {
  fs::create_directories(dir);
  write_tweets(dir / "train.jsonl", c.train);
  write_tweets(dir / "dev.jsonl", c.dev);
  write_tweets(dir / "test.jsonl", c.test);
  claimcheck::write_annotations(dir / "annotations.jsonl", c.annotations);
  claimcheck::write_embeddings(dir / "embeddings.ckem", c.embeddings);
  write_text(dir / "config.toml",
             "run_id = \"synthetic\"\n"
             "seed = 42\n"
             "language = \"en\"\n"
             "output_dir = \"out\"\n"
             "\n[data]\n"
             "train_tweets = \"train.jsonl\"\n"
             "dev_tweets = \"dev.jsonl\"\n"
             "test_tweets = \"test.jsonl\"\n"
             "annotations = \"annotations.jsonl\"\n"
             "embeddings = \"embeddings.ckem\"\n"
             "\n[features]\n"
             "pooling = \"concat_last4\"\n"
             "\n[grid]\n"
             "energies = [100, 99, 98]\n"
             "c_min_exp = -1\n"
             "c_max_exp = 2\n"
             "c_steps = 5\n"
             "gamma_min_exp = -2\n"
             "gamma_max_exp = 1\n"
             "gamma_steps = 5\n"
             "\n[svm]\n"
             "ensemble_size = 3\n");
}

void write_retrieval(const fs::path& dir, const RetrievalCorpus& c) {
  fs::create_directories(dir);
  write_claims(dir / "claims.jsonl", c.claims);
  write_tweets(dir / "train.jsonl", c.train);
  write_tweets(dir / "test.jsonl", c.test);
  auto qrels_text = [](const claimcheck::Qrels& q) {
    std::string s;
    for (const auto& [tweet, claims] : q.pairs) {
      for (const auto& claim : claims) s += tweet + "\t" + claim + "\n";
    }
    return s;
  };
  write_text(dir / "train_qrels.tsv", qrels_text(c.train_qrels));
  write_text(dir / "test_qrels.tsv", qrels_text(c.test_qrels));
  claimcheck::write_embeddings(dir / "claim_text.ckem", c.claim_text);
  claimcheck::write_embeddings(dir / "claim_title.ckem", c.claim_title);
  claimcheck::write_embeddings(dir / "queries.ckem", c.queries);
  write_text(dir / "config.toml",
             "run_id = \"synthetic-retrieval\"\n"
             "seed = 42\n"
             "output_dir = \"out\"\n"
             "\n[data]\n"
             "claims = \"claims.jsonl\"\n"
             "claim_text_embeddings = \"claim_text.ckem\"\n"
             "claim_title_embeddings = \"claim_title.ckem\"\n"
             "query_embeddings = \"queries.ckem\"\n"
             "retrieval_train_tweets = \"train.jsonl\"\n"
             "retrieval_test_tweets = \"test.jsonl\"\n"
             "train_qrels = \"train_qrels.tsv\"\n"
             "test_qrels = \"test_qrels.tsv\"\n"
             "\n[projection]\n"
             "batch_size = 8\n"
             "epochs = 2\n"
             "learning_rate = 0.001\n"
             "margin = 1.0\n"
             "\n[retrieval]\n"
             "k = 1000\n"
             "negatives = 3\n");
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("claimcheck-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace synth
