#include <doctest.h>

#include <random>

#include "claimcheck/error.hpp"
#include "claimcheck/retrieval.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace claimcheck;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TripletExample triplet(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                       const Eigen::VectorXd& n) {
  return TripletExample{"q", "p", "n", ClaimField::text, a, p, n};
}

Eigen::VectorXd gaussian(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = g(rng);
  return v;
}

}  // namespace

TEST_CASE("loss worked values") {
  const ProjectionModel id = ProjectionModel::identity(2, 1.0);
  const std::vector<TripletExample> a{triplet(vec({0, 0}), vec({0, 0}), vec({2, 0}))};
  CHECK(triplet_loss(a, id) == 0.0);
  const std::vector<TripletExample> b{triplet(vec({0, 0}), vec({1, 0}), vec({0, 0}))};
  CHECK(triplet_loss(b, id) == 2.0);
}

TEST_CASE("loss and gradient agree with the naive oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index d = 3 + trial % 4;
    ProjectionModel m = ProjectionModel::identity(static_cast<std::size_t>(d), 0.5 + trial);
    m.W += 0.3 * Eigen::MatrixXd::Random(d, d);
    std::vector<TripletExample> batch;
    std::vector<oracle::Triplet> naive;
    for (int t = 0; t < 6; ++t) {
      auto x = triplet(gaussian(rng, d), gaussian(rng, d), gaussian(rng, d));
      naive.push_back({x.anchor, x.positive, x.negative});
      batch.push_back(std::move(x));
    }
    CHECK(triplet_loss(batch, m) ==
          doctest::Approx(oracle::triplet_loss_naive(naive, m.W, m.margin)).epsilon(1e-12));
    const Eigen::MatrixXd g = triplet_loss_gradient(batch, m);
    const Eigen::MatrixXd fd = oracle::triplet_loss_fd_gradient(naive, m.W, m.margin);
    CHECK((g - fd).cwiseAbs().maxCoeff() <= 1e-4 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("training leaves W alone when nothing moves it") {
  std::vector<TripletExample> inactive{triplet(vec({0, 0}), vec({0, 0}), vec({5, 0})),
                                       triplet(vec({1, 1}), vec({1, 1}), vec({1, -4}))};
  TrainConfig cfg;
  cfg.epochs = 3;
  const TrainResult r = train_projection(inactive, cfg);
  CHECK(r.model.W == Eigen::MatrixXd::Identity(2, 2));
  for (double l : r.epoch_mean_loss) CHECK(l == 0.0);

  std::vector<TripletExample> active{triplet(vec({0, 0}), vec({1, 0}), vec({0, 0}))};
  cfg.learning_rate = 0.0;
  CHECK(train_projection(active, cfg).model.W == Eigen::MatrixXd::Identity(2, 2));
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(train_projection(active, cfg), Error);
  cfg.learning_rate = 1e-3;
  CHECK_THROWS_AS(train_projection({}, cfg), Error);
}

TEST_CASE("training is reproducible and reduces loss on separable triplets") {
  std::mt19937_64 rng(12);
  std::vector<TripletExample> ts;
  for (int i = 0; i < 64; ++i) {
    const Eigen::VectorXd a = gaussian(rng, 6);
    ts.push_back(triplet(a, a + 0.6 * gaussian(rng, 6), a + 0.8 * gaussian(rng, 6)));
  }
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 5e-3;
  const TrainResult r1 = train_projection(ts, cfg);
  const TrainResult r2 = train_projection(ts, cfg);
  CHECK(r1.model.W == r2.model.W);
  for (std::size_t e = 1; e < r1.epoch_mean_loss.size(); ++e) {
    CHECK(r1.epoch_mean_loss[e] < r1.epoch_mean_loss[e - 1]);
  }
}

TEST_CASE("embed claim averages fields and falls back") {
  const Eigen::VectorXd t = vec({2, 0});
  const Eigen::VectorXd h = vec({0, 2});
  CHECK(embed_claim(&t, &h) == vec({1, 1}));
  CHECK(embed_claim(&t, nullptr) == t);
  CHECK(embed_claim(nullptr, &h) == h);
  CHECK_THROWS_AS(embed_claim(nullptr, nullptr), Error);
}

TEST_CASE("negative mining") {
  const VectorMap text{{"A", vec({1, 0})}, {"B", vec({0.9, 0.1})}, {"C", vec({0, 1})}};
  const ClaimStore store = ClaimStore::from_fields(text, {});
  const auto neg = mine_negatives(vec({1, 0}), store, {"A"}, 2);
  CHECK(neg == std::vector<std::string>{"B", "C"});
  CHECK_THROWS_AS(mine_negatives(vec({1, 0}), store, {"A"}, 3), Error);

  const VectorMap same{{"z", vec({1, 1})}, {"b", vec({1, 1})}, {"m", vec({1, 1})}, {"a", vec({1, 1})}};
  const ClaimStore flat = ClaimStore::from_fields(same, {});
  CHECK(mine_negatives(vec({1, 1}), flat, {}, 3) == std::vector<std::string>{"a", "b", "m"});
}

TEST_CASE("triplet construction counts") {
  VectorMap tweets{{"t1", vec({1, 0})}};
  VectorMap text{{"c1", vec({1, 0})}, {"n1", vec({0, 1})}, {"n2", vec({0, 1})}, {"n3", vec({1, 1})}};
  VectorMap title = text;
  Qrels q;
  q.pairs["t1"] = {"c1"};
  std::map<std::string, std::vector<std::string>> neg{{"t1", {"n1", "n2", "n3"}}};
  CHECK(build_triplets(q, tweets, text, title, neg).triplets.size() == 6);

  title.erase("c1");
  const TripletSet partial = build_triplets(q, tweets, text, title, neg);
  CHECK(partial.triplets.size() == 3);
  CHECK(partial.skipped == 3);
  for (const auto& t : partial.triplets) CHECK(t.field == ClaimField::text);

  // 800 pairs with 3 negatives each
  VectorMap many_tweets;
  Qrels many;
  std::map<std::string, std::vector<std::string>> many_neg;
  for (int i = 0; i < 800; ++i) {
    const std::string id = "t" + std::to_string(i);
    many_tweets[id] = vec({1, 0});
    many.pairs[id] = {"c1"};
    many_neg[id] = {"n1", "n2", "n3"};
  }
  CHECK(build_triplets(many, many_tweets, text, text, many_neg).triplets.size() == 4800);
}

TEST_CASE("cosine ranking") {
  const VectorMap text{{"same", vec({2, 0})}, {"orth", vec({0, 3})}, {"mid", vec({1, 1})}};
  const ClaimStore store = ClaimStore::from_fields(text, {});
  const Ranking r = cosine_rank(vec({1, 0}), store, 10);
  REQUIRE(r.size() == 3);
  CHECK(r[0].id == "same");
  CHECK(r[2].id == "orth");
  CHECK(r[2].score == 0.0);
  CHECK_THROWS_AS(cosine_rank(vec({0, 0}), store, 1), Error);

  std::mt19937_64 rng(4);
  VectorMap rnd;
  for (int i = 0; i < 200; ++i) rnd["c" + std::to_string(1000 + i)] = gaussian(rng, 5);
  const ClaimStore big = ClaimStore::from_fields(rnd, {});
  const Eigen::VectorXd q = gaussian(rng, 5);
  std::vector<std::pair<double, std::string>> all;
  for (const auto& [id, v] : rnd) all.emplace_back(-q.dot(v) / (q.norm() * v.norm()), id);
  std::sort(all.begin(), all.end());
  const Ranking top = cosine_rank(q, big, 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(top[i].id == all[i].second);
}

TEST_CASE("KD search equals cosine ranking on unit vectors") {
  std::mt19937_64 rng(21);
  VectorMap rnd;
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd v = gaussian(rng, 8);
    rnd["c" + std::to_string(10000 + i)] = v.normalized();
  }
  const ClaimStore store = ClaimStore::from_fields(rnd, {});
  const ClaimIndex index(store, 8);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd q = gaussian(rng, 8).normalized();
    const Ranking a = cosine_rank(q, store, 30);
    const Ranking b = index.query(q, 30);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
  }
  const Ranking self = index.query(store.vectors.row(17).transpose(), 1);
  CHECK(self[0].id == store.ids[17]);
  CHECK(self[0].score == 0.0);
}

TEST_CASE("projection save and load") {
  ProjectionModel m = ProjectionModel::identity(3, 0.7);
  m.W(0, 1) = 0.25;
  m.trained_epochs = 4;
  const auto dir = synth::scratch_dir("projection-io");
  save_projection(m, dir / "proj");
  const ProjectionModel back = load_projection(dir / "proj");
  CHECK((back.W - m.W).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(back.margin == doctest::Approx(0.7));
  CHECK(back.trained_epochs == 4);
  std::filesystem::remove_all(dir);
}
