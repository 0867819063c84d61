#pragma once

// Verified-claim retrieval: hard-negative mining, triplet construction,
// triplet-loss training of a linear projection over frozen sentence
// embeddings, and exact nearest-claim search.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "claimcheck/eval.hpp"
#include "claimcheck/kdtree.hpp"

namespace claimcheck {

using VectorMap = std::map<std::string, Eigen::VectorXd>;

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Element-wise mean of text and title embeddings; either may be absent.
Eigen::VectorXd embed_claim(const Eigen::VectorXd* text,
                            const Eigen::VectorXd* title);

// Claims in ascending id order with one search vector each.
struct ClaimStore {
  std::vector<std::string> ids;
  Eigen::MatrixXd vectors;  // rows follow ids

  static ClaimStore from_fields(const VectorMap& text, const VectorMap& title);
  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
};

// k claims most cosine-similar to the anchor, never from `true_claims`.
// Ties resolve to the smaller claim id.
std::vector<std::string> mine_negatives(const Eigen::VectorXd& anchor,
                                        const ClaimStore& claims,
                                        const std::set<std::string>& true_claims,
                                        std::size_t k = 3);

enum class ClaimField { text, title };

struct TripletExample {
  std::string anchor_id;
  std::string positive_id;
  std::string negative_id;
  ClaimField field = ClaimField::text;
  Eigen::VectorXd anchor;
  Eigen::VectorXd positive;
  Eigen::VectorXd negative;
};

struct TripletSet {
  std::vector<TripletExample> triplets;
  std::size_t skipped = 0;  // field triplets dropped for a missing embedding
};

// For each (tweet, true claim, negative) emits a text triplet and a title
// triplet. Tweets are visited in qrels order, negatives in mined order.
TripletSet build_triplets(const Qrels& qrels, const VectorMap& tweets,
                          const VectorMap& claim_text,
                          const VectorMap& claim_title,
                          const std::map<std::string, std::vector<std::string>>&
                              negatives);

struct ProjectionModel {
  Eigen::MatrixXd W;
  double margin = 1.0;
  std::size_t trained_epochs = 0;

  static ProjectionModel identity(std::size_t dim, double margin = 1.0);
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return W * x; }
};

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t epochs = 2;
  double learning_rate = 1e-3;
  double margin = 1.0;
  std::uint64_t seed = 42;
};

// Sum over the batch of [ |W(a-p)|^2 - |W(a-n)|^2 + m ]_+
double triplet_loss(std::span<const TripletExample> batch,
                    const ProjectionModel& model);

// Gradient of triplet_loss with respect to W.
Eigen::MatrixXd triplet_loss_gradient(std::span<const TripletExample> batch,
                                      const ProjectionModel& model);

struct TrainResult {
  ProjectionModel model;
  std::vector<double> epoch_mean_loss;
};

// Minibatch gradient descent from W = I; triplet order is reshuffled every
// epoch from `seed`.
TrainResult train_projection(const std::vector<TripletExample>& triplets,
                             const TrainConfig& cfg);

// Top-k claims by cosine similarity, ties by id.
Ranking cosine_rank(const Eigen::VectorXd& query, const ClaimStore& claims,
                    std::size_t k);

// Top-k claims by Euclidean distance through a KD-tree over the store.
// Score is the negated distance.
class ClaimIndex {
 public:
  explicit ClaimIndex(const ClaimStore& claims, std::size_t leaf_size = 16);
  Ranking query(const Eigen::VectorXd& q, std::size_t k) const;
  const KdTree& tree() const { return tree_; }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  KdTree tree_;
};

void save_projection(const ProjectionModel& model,
                     const std::filesystem::path& stem);
ProjectionModel load_projection(const std::filesystem::path& stem);

}  // namespace claimcheck
