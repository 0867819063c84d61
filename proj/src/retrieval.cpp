#include "claimcheck/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "claimcheck/error.hpp"
#include "claimcheck/tensor.hpp"
#include "json.hpp"

namespace claimcheck {

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine: dim mismatch");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Eigen::VectorXd embed_claim(const Eigen::VectorXd* text,
                            const Eigen::VectorXd* title) {
  if (text == nullptr && title == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "claim has neither a text nor a title embedding");
  }
  if (text == nullptr) return *title;
  if (title == nullptr) return *text;
  if (text->size() != title->size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "claim text and title embeddings differ in width");
  }
  return 0.5 * (*text + *title);
}

ClaimStore ClaimStore::from_fields(const VectorMap& text,
                                   const VectorMap& title) {
  std::set<std::string> ids;
  for (const auto& [id, v] : text) ids.insert(id);
  for (const auto& [id, v] : title) ids.insert(id);
  if (ids.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "claim store is empty");
  }
  ClaimStore store;
  store.ids.assign(ids.begin(), ids.end());
  Eigen::Index dim = -1;
  for (std::size_t i = 0; i < store.ids.size(); ++i) {
    auto t = text.find(store.ids[i]);
    auto h = title.find(store.ids[i]);
    const Eigen::VectorXd v = embed_claim(t == text.end() ? nullptr : &t->second,
                                          h == title.end() ? nullptr : &h->second);
    if (dim < 0) {
      dim = v.size();
      store.vectors.resize(static_cast<Eigen::Index>(store.ids.size()), dim);
    } else if (v.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "claim '" + store.ids[i] + "' has a different width");
    }
    store.vectors.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return store;
}

std::vector<std::string> mine_negatives(const Eigen::VectorXd& anchor,
                                        const ClaimStore& claims,
                                        const std::set<std::string>& true_claims,
                                        std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    if (true_claims.count(claims.ids[i])) continue;
    scored.emplace_back(
        cosine_similarity(anchor, claims.vectors.row(static_cast<Eigen::Index>(i)).transpose()),
        i);
  }
  if (scored.size() < k) {
    throw Error(ErrorCode::kInvalidArgument,
                "only " + std::to_string(scored.size()) +
                    " negative candidates for k=" + std::to_string(k));
  }
  // Store rows are in ascending id order, so index order is id order.
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(claims.ids[scored[i].second]);
  return out;
}

TripletSet build_triplets(
    const Qrels& qrels, const VectorMap& tweets, const VectorMap& claim_text,
    const VectorMap& claim_title,
    const std::map<std::string, std::vector<std::string>>& negatives) {
  TripletSet out;
  for (const auto& [tweet_id, positives] : qrels.pairs) {
    auto anchor = tweets.find(tweet_id);
    if (anchor == tweets.end()) {
      throw Error(ErrorCode::kValidation,
                  "no embedding for tweet '" + tweet_id + "'");
    }
    auto neg = negatives.find(tweet_id);
    if (neg == negatives.end()) {
      throw Error(ErrorCode::kValidation,
                  "no mined negatives for tweet '" + tweet_id + "'");
    }
    for (const std::string& pos_id : positives) {
      for (const std::string& neg_id : neg->second) {
        for (ClaimField field : {ClaimField::text, ClaimField::title}) {
          const VectorMap& vecs = field == ClaimField::text ? claim_text : claim_title;
          auto p = vecs.find(pos_id);
          auto n = vecs.find(neg_id);
          if (p == vecs.end() || n == vecs.end()) {
            ++out.skipped;
            continue;
          }
          out.triplets.push_back(TripletExample{tweet_id, pos_id, neg_id, field,
                                                anchor->second, p->second,
                                                n->second});
        }
      }
    }
  }
  return out;
}

ProjectionModel ProjectionModel::identity(std::size_t dim, double margin) {
  ProjectionModel m;
  m.W = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                  static_cast<Eigen::Index>(dim));
  m.margin = margin;
  return m;
}

namespace {

void check_triplet(const TripletExample& t, Eigen::Index dim) {
  if (t.anchor.size() != dim || t.positive.size() != dim ||
      t.negative.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "triplet for '" + t.anchor_id + "' does not match projection width");
  }
}

}  // namespace

double triplet_loss(std::span<const TripletExample> batch,
                    const ProjectionModel& model) {
  double loss = 0.0;
  for (const TripletExample& t : batch) {
    check_triplet(t, model.W.cols());
    const double dp = (model.W * (t.anchor - t.positive)).squaredNorm();
    const double dn = (model.W * (t.anchor - t.negative)).squaredNorm();
    loss += std::max(0.0, dp - dn + model.margin);
  }
  return loss;
}

Eigen::MatrixXd triplet_loss_gradient(std::span<const TripletExample> batch,
                                      const ProjectionModel& model) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(model.W.rows(), model.W.cols());
  for (const TripletExample& t : batch) {
    check_triplet(t, model.W.cols());
    const Eigen::VectorXd u = t.anchor - t.positive;
    const Eigen::VectorXd v = t.anchor - t.negative;
    const Eigen::VectorXd Wu = model.W * u;
    const Eigen::VectorXd Wv = model.W * v;
    if (Wu.squaredNorm() - Wv.squaredNorm() + model.margin <= 0.0) continue;
    // d/dW |Wx|^2 = 2 (Wx) x'
    grad.noalias() += 2.0 * (Wu * u.transpose() - Wv * v.transpose());
  }
  return grad;
}

TrainResult train_projection(const std::vector<TripletExample>& triplets,
                             const TrainConfig& cfg) {
  if (triplets.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no triplets to train on");
  }
  if (cfg.batch_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  }
  if (cfg.learning_rate < 0.0 || !std::isfinite(cfg.learning_rate)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be >= 0");
  }
  if (!(cfg.margin > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "margin must be positive");
  }
  TrainResult result;
  result.model = ProjectionModel::identity(
      static_cast<std::size_t>(triplets.front().anchor.size()), cfg.margin);

  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::vector<TripletExample> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(triplets[order[i]]);
      const double loss = triplet_loss(batch, result.model);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kNonFinite,
                    "triplet loss diverged at epoch " + std::to_string(epoch + 1) +
                        ", batch starting at " + std::to_string(start) +
                        "; lower the learning rate");
      }
      epoch_loss += loss;
      if (loss > 0.0 && cfg.learning_rate > 0.0) {
        result.model.W -= cfg.learning_rate * triplet_loss_gradient(batch, result.model);
      }
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(triplets.size()));
    result.model.trained_epochs = epoch + 1;
  }
  if (!result.model.W.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "projection weights diverged");
  }
  return result;
}

Ranking cosine_rank(const Eigen::VectorXd& query, const ClaimStore& claims,
                    std::size_t k) {
  if (query.size() != claims.vectors.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "query width mismatch");
  }
  if (query.norm() == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "zero-norm query");
  }
  std::vector<std::pair<double, std::size_t>> scored(claims.size());
  for (std::size_t i = 0; i < claims.size(); ++i) {
    scored[i] = {cosine_similarity(
                     query, claims.vectors.row(static_cast<Eigen::Index>(i)).transpose()),
                 i};
  }
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  Ranking out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({claims.ids[scored[i].second], scored[i].first});
  }
  return out;
}

namespace {

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  std::size_t p = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[p++] = m(r, c);
  }
  return out;
}

}  // namespace

ClaimIndex::ClaimIndex(const ClaimStore& claims, std::size_t leaf_size)
    : ids_(claims.ids),
      tree_(KdTree::build(row_major(claims.vectors), claims.dim(), leaf_size)) {}

Ranking ClaimIndex::query(const Eigen::VectorXd& q, std::size_t k) const {
  const auto hits = tree_.query(
      std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), k);
  Ranking out;
  out.reserve(hits.size());
  for (const Neighbor& n : hits) {
    out.push_back({ids_[n.index], -std::sqrt(n.sq_distance)});
  }
  return out;
}

void save_projection(const ProjectionModel& model,
                     const std::filesystem::path& stem) {
  const auto d = static_cast<std::size_t>(model.W.cols());
  std::vector<std::string> ids;
  for (Eigen::Index r = 0; r < model.W.rows(); ++r) {
    ids.push_back("w" + std::to_string(r));
  }
  std::vector<float> values;
  for (double v : row_major(model.W)) values.push_back(static_cast<float>(v));
  write_embeddings(stem.string() + ".ckem",
                   EmbeddingTensor::sentence(std::move(ids), d, std::move(values)));
  nlohmann::json header = {
      {"margin", model.margin},
      {"trained_epochs", model.trained_epochs},
      {"rows", model.W.rows()},
      {"cols", model.W.cols()},
  };
  std::ofstream out(stem.string() + ".json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + stem.string() + ".json");
  out << header.dump(2) << '\n';
}

ProjectionModel load_projection(const std::filesystem::path& stem) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + stem.string() + ".json");
  const auto header = nlohmann::json::parse(in, nullptr, false);
  if (header.is_discarded()) {
    throw Error(ErrorCode::kParse, stem.string() + ".json is not valid JSON");
  }
  const EmbeddingTensor t = load_embeddings(stem.string() + ".ckem");
  ProjectionModel m;
  m.margin = header.at("margin").get<double>();
  m.trained_epochs = header.at("trained_epochs").get<std::size_t>();
  m.W.resize(static_cast<Eigen::Index>(t.unit_count()),
             static_cast<Eigen::Index>(t.dim()));
  for (std::size_t r = 0; r < t.unit_count(); ++r) {
    const auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      m.W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return m;
}

}  // namespace claimcheck
