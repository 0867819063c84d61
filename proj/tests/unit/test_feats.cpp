#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "claimcheck/error.hpp"
#include "claimcheck/feats.hpp"
#include "claimcheck/tensor.hpp"
#include "synthetic.hpp"

using namespace claimcheck;

namespace {

const std::filesystem::path kFixtures = CLAIMCHECK_FIXTURES;

TokenAnnotation token(Upos upos, int head, std::string rel = "dep",
                      std::optional<NeType> ne = std::nullopt, bool stop = false,
                      std::string surface = "w") {
  return {surface, surface, upos, ne, head, std::move(rel), stop, 0};
}

AnnotatedTweet tweet_of(std::vector<TokenAnnotation> toks) {
  return {"t", std::move(toks), false};
}

const FeatureConfig kEn = FeatureConfig::for_language(Language::en);

}  // namespace

TEST_CASE("pos histogram worked example") {
  const auto t = tweet_of({token(Upos::NOUN, -1), token(Upos::VERB, 0),
                           token(Upos::NOUN, 0), token(Upos::ADJ, 0)});
  const Encoded e = encode_pos_histogram(t, kEn);
  CHECK(e.values == std::vector<double>{1, 0.5, 0, 0.5, 0, 0, 0, 0});
  CHECK_FALSE(e.degenerate);
}

TEST_CASE("empty tweet gives a zero histogram and a degenerate flag") {
  AnnotatedTweet empty{"t", {}, true};
  const Encoded e = encode_pos_histogram(empty, kEn);
  CHECK(e.values == std::vector<double>(8, 0.0));
  CHECK(e.degenerate);
}

TEST_CASE("stopword tokens drop out when stopwords are disabled") {
  FeatureConfig cfg = kEn;
  cfg.use_stopwords = false;
  const auto t = tweet_of({token(Upos::NOUN, -1), token(Upos::ADP, 0, "case", {}, true),
                           token(Upos::ADP, 0, "case", {}, true)});
  CHECK(encode_pos_histogram(t, kEn).values[6] == 1.0);
  CHECK(encode_pos_histogram(t, cfg).values[6] == 0.0);
}

TEST_CASE("entity histogram") {
  const auto t = tweet_of({token(Upos::PROPN, -1, "root", NeType::PERSON),
                           token(Upos::PROPN, 0, "flat", NeType::ORG),
                           token(Upos::PROPN, 0, "flat", NeType::PERSON),
                           token(Upos::X, 0, "dep", NeType::OTHER)});
  const Encoded e = encode_ne_histogram(t, kEn);
  REQUIRE(e.values.size() == 11);
  CHECK(e.values[1] == 1.0);
  CHECK(e.values[2] == 0.5);
  CHECK(std::count(e.values.begin(), e.values.end(), 0.0) == 9);
  CHECK(encode_ne_histogram(tweet_of({token(Upos::NOUN, -1)}), kEn).values ==
        std::vector<double>(11, 0.0));
  const FeatureConfig ar = FeatureConfig::for_language(Language::ar);
  CHECK(encode_ne_histogram(t, ar).values.size() == 4);
  CHECK(encode_pos_histogram(t, ar).values.size() == 12);
}

TEST_CASE("tag sets must keep the fixed order") {
  FeatureConfig cfg = kEn;
  std::swap(cfg.pos_tagset[0], cfg.pos_tagset[1]);
  CHECK_THROWS_AS(cfg.validate(), Error);
  kEn.validate();
  FeatureConfig::for_language(Language::ar).validate();
}

TEST_CASE("dependency vocabulary") {
  // NOUN <-amod- ADJ
  const auto t = tweet_of({token(Upos::NOUN, -1, "root"), token(Upos::ADJ, 0, "amod")});
  const std::vector<AnnotatedTweet> train{t};
  const DepVocab pair = build_dep_vocab(train, DepMode::pair);
  REQUIRE(pair.size() == 1);
  CHECK(pair.entries()[0] == DepKey{"ADJ", "amod", ""});
  const DepVocab triplet = build_dep_vocab(train, DepMode::triplet);
  CHECK(triplet.entries()[0] == DepKey{"ADJ", "amod", "NOUN"});

  const std::vector<AnnotatedTweet> none{tweet_of({token(Upos::PRON, -1, "root"),
                                                   token(Upos::NOUN, 0, "nsubj")})};
  CHECK_THROWS_AS(build_dep_vocab(none, DepMode::pair), Error);
  CHECK_THROWS_AS(build_dep_vocab(std::vector<AnnotatedTweet>{}, DepMode::pair), Error);
}

TEST_CASE("dependency pair encoding") {
  const auto train = std::vector<AnnotatedTweet>{tweet_of(
      {token(Upos::NOUN, -1, "root"), token(Upos::ADJ, 0, "amod"), token(Upos::NUM, 0, "nummod")})};
  const DepVocab vocab = build_dep_vocab(train, DepMode::pair);
  REQUIRE(vocab.index_of({"ADJ", "amod", ""}) == 0u);
  const auto t = tweet_of({token(Upos::NOUN, -1, "root"), token(Upos::ADJ, 0, "amod"),
                           token(Upos::ADJ, 0, "amod"), token(Upos::PRON, 0, "nsubj"),
                           token(Upos::ADV, 0, "advmod")});
  const Encoded e = encode_dep_pairs(t, vocab, kEn);
  CHECK(e.values.size() == vocab.size());
  CHECK(e.values[0] == 1.0);
  CHECK(e.values[1] == 0.0);
}

TEST_CASE("max and l2 normalisation") {
  CHECK(max_normalize(std::vector<double>{2, 1, 0, 1}) == std::vector<double>{1, 0.5, 0, 0.5});
  CHECK(max_normalize(std::vector<double>{0, 0, 0}) == std::vector<double>{0, 0, 0});
  CHECK(l2_normalize(std::vector<double>{3, 4}) == std::vector<double>{0.6, 0.8});
  CHECK(l2_normalize(std::vector<double>{0, 0}) == std::vector<double>{0, 0});

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(1 + i % 17), w(v.size());
    for (auto& x : v) x = u(rng);
    for (auto& x : w) x = g(rng);
    const auto m = max_normalize(v);
    CHECK(*std::max_element(m.begin(), m.end()) == 1.0);
    CHECK(*std::min_element(m.begin(), m.end()) >= 0.0);
    const auto n = l2_normalize(w);
    double s = 0;
    for (double x : n) s += x * x;
    CHECK(std::abs(std::sqrt(s) - 1.0) <= 1e-6);
  }
}

TEST_CASE("average word embeddings") {
  WordTable table(2);
  table.add("a", {1, 0});
  table.add("b", {0, 1});
  CHECK_THROWS_AS(table.add("c", {1, 2, 3}), Error);
  auto t = tweet_of({token(Upos::NOUN, -1, "root", {}, false, "a"),
                     token(Upos::NOUN, 0, "dep", {}, false, "b")});
  CHECK(average_word_embeddings(t, table, kEn).values == std::vector<double>{0.5, 0.5});
  const auto oov = tweet_of({token(Upos::NOUN, -1, "root", {}, false, "zz")});
  const Encoded e = average_word_embeddings(oov, table, kEn);
  CHECK(e.values == std::vector<double>{0, 0});
  CHECK(e.degenerate);
}

TEST_CASE("average word embeddings without stopwords, 5 tokens by hand") {
  WordTable table(3);
  table.add("the", {9, 9, 9});
  table.add("virus", {1, 2, 3});
  table.add("spreads", {3, 2, 1});
  table.add("in", {7, 7, 7});
  table.add("cities", {2, 2, 8});
  auto t = tweet_of({token(Upos::DET, 1, "det", {}, true, "the"),
                     token(Upos::NOUN, 2, "nsubj", {}, false, "virus"),
                     token(Upos::VERB, -1, "root", {}, false, "spreads"),
                     token(Upos::ADP, 4, "case", {}, true, "in"),
                     token(Upos::NOUN, 2, "obl", {}, false, "cities")});
  FeatureConfig cfg = kEn;
  cfg.use_stopwords = false;
  CHECK(average_word_embeddings(t, table, cfg).values == std::vector<double>{2, 2, 4});
  CHECK(average_word_embeddings(t, table, kEn).values ==
        std::vector<double>{22.0 / 5, 22.0 / 5, 28.0 / 5});
}

TEST_CASE("transformer pooling") {
  // 4 identical layers of one token [1, 0]
  const std::vector<float> same{1, 0, 1, 0, 1, 0, 1, 0};
  CHECK(pool_transformer_layers(same, 4, 1, 2, Pooling::avg_last4).values ==
        std::vector<double>{1, 0});
  CHECK(pool_transformer_layers(same, 4, 1, 2, Pooling::concat_last4).values.size() == 8);

  // one layer, tokens [2, 0] and [0, 2] -> mean [1, 1] -> normalised
  const std::vector<float> two{2, 0, 0, 2};
  const auto v = pool_transformer_layers(two, 1, 2, 2, Pooling::last).values;
  CHECK(v[0] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(v[1] == doctest::Approx(1 / std::sqrt(2.0)));

  // cls reads token 0 of the final layer only
  const std::vector<float> cls{0, 5, 0, 5, 3, 0, 0, 4};  // 2 layers x 2 tokens x 2
  CHECK(pool_transformer_layers(cls, 2, 2, 2, Pooling::cls).values == std::vector<double>{1, 0});
  CHECK(pool_transformer_layers(cls, 2, 2, 2, Pooling::second_last).values ==
        std::vector<double>{0, 1});

  CHECK_THROWS_AS(pool_transformer_layers(two, 1, 2, 2, Pooling::avg_last4), Error);
  const Encoded empty = pool_transformer_layers({}, 4, 0, 2, Pooling::avg_last4);
  CHECK(empty.degenerate);
  CHECK(empty.values == std::vector<double>{0, 0});
}

TEST_CASE("concat order is last layer first") {
  // 4 layers, 1 token, dim 1: layer l holds value l + 1
  const std::vector<float> block{1, 2, 3, 4};
  const auto v = pool_transformer_layers(block, 4, 1, 1, Pooling::concat_last4).values;
  const double n = std::sqrt(1.0 + 4 + 9 + 16);
  CHECK(v == std::vector<double>{4 / n, 3 / n, 2 / n, 1 / n});
}

TEST_CASE("fused layout") {
  FeatureConfig cfg = kEn;
  cfg.use_ne = false;
  cfg.use_dep = false;
  cfg.pooling = Pooling::sentence;
  const auto tensor = EmbeddingTensor::sentence({"t"}, 8, {1, 0, 0, 0, 0, 0, 0, 0});
  const auto t = tweet_of({token(Upos::NOUN, -1)});
  const FeatureVector fv = fuse_features(t, cfg, DepVocab{}, {&tensor, nullptr});
  CHECK(fv.total_dim == 16);
  REQUIRE(fv.segments.size() == 2);
  CHECK(fv.segments[0].first == "pos");
  CHECK(fv.segments[1].first == "embedding");

  cfg.use_ne = true;
  const FeatureVector with_ne = fuse_features(t, cfg, DepVocab{}, {&tensor, nullptr});
  CHECK(with_ne.total_dim - fv.total_dim == 11);
  CHECK(with_ne.segments[1].first == "ne");
}

TEST_CASE("fixture corpus: histograms match an independent counter") {
  synth::CheckworthyOptions opts;
  opts.layers = 4;
  opts.dim = 4;
  const auto corpus = synth::make_checkworthy(opts);
  const std::vector<std::string> tags{"NOUN", "VERB", "PROPN", "ADJ", "ADV", "NUM", "ADP", "PRON"};
  const std::set<std::string> content{"ADJ", "ADV", "NOUN", "PROPN", "VERB", "NUM"};

  std::vector<AnnotatedTweet> train(corpus.annotations.begin(),
                                    corpus.annotations.begin() + 672);
  std::set<std::pair<std::string, std::string>> oracle_vocab;
  for (const auto& t : train) {
    for (const auto& tok : t.tokens) {
      if (tok.head < 0) continue;
      const std::string c(upos_name(tok.upos));
      const std::string p(upos_name(t.tokens[tok.head].upos));
      if (content.count(c) && content.count(p)) oracle_vocab.insert({c, tok.dep_rel});
    }
  }
  const DepVocab vocab = build_dep_vocab(train, DepMode::pair);
  REQUIRE(vocab.size() == oracle_vocab.size());
  std::size_t i = 0;
  for (const auto& [c, r] : oracle_vocab) {
    CHECK(vocab.entries()[i].child_pos == c);
    CHECK(vocab.entries()[i].dep_rel == r);
    ++i;
  }

  for (const auto& t : train) {
    std::vector<double> counts(tags.size(), 0.0);
    for (const auto& tok : t.tokens) {
      for (std::size_t k = 0; k < tags.size(); ++k) {
        if (upos_name(tok.upos) == tags[k]) counts[k] += 1;
      }
    }
    const double peak = *std::max_element(counts.begin(), counts.end());
    for (auto& x : counts) x = peak > 0 ? x / peak : x;
    CHECK(encode_pos_histogram(t, kEn).values == counts);
  }
}

TEST_CASE("fused vectors are stable and bounded") {
  synth::CheckworthyOptions opts;
  opts.train = 40;
  opts.dev = 0;
  opts.test = 0;
  const auto corpus = synth::make_checkworthy(opts);
  const DepVocab vocab = build_dep_vocab(corpus.annotations, DepMode::pair);
  const EmbeddingSource src{&corpus.embeddings, nullptr};
  for (const auto& t : corpus.annotations) {
    const FeatureVector a = fuse_features(t, kEn, vocab, src);
    const FeatureVector b = fuse_features(t, kEn, vocab, src);
    CHECK(a.flatten() == b.flatten());
    std::size_t total = 0;
    for (const auto& [name, values] : a.segments) {
      total += values.size();
      for (double x : values) CHECK(std::isfinite(x));
      if (name != "embedding") {
        for (double x : values) CHECK((x >= 0.0 && x <= 1.0));
      }
    }
    CHECK(total == a.total_dim);
  }
}
