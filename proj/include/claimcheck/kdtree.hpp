#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace claimcheck {

struct Neighbor {
  std::size_t index = 0;
  double sq_distance = 0.0;

  bool operator<(const Neighbor& other) const {
    return sq_distance != other.sq_distance ? sq_distance < other.sq_distance
                                            : index < other.index;
  }
  bool operator==(const Neighbor&) const = default;
};

// Exact k-nearest-neighbour index under squared Euclidean distance.
//
// Nodes split at the median of the dimension with the largest spread. Points
// equal to the split value may land on either side, so the search only prunes
// a subtree whose lower bound strictly exceeds the current k-th distance.
// Results are ordered by (distance, point index).
class KdTree {
 public:
  struct Node {
    std::int32_t split_dim = -1;  // -1 marks a leaf
    double split_value = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;  // leaf range into point_order()
    std::uint32_t end = 0;
  };

  KdTree() = default;

  // points: row-major M x dim.
  static KdTree build(std::vector<double> points, std::size_t dim,
                      std::size_t leaf_size = 16);

  // k is clamped to size().
  std::vector<Neighbor> query(std::span<const double> q, std::size_t k) const;

  std::size_t size() const { return dim_ == 0 ? 0 : points_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::size_t leaf_size() const { return leaf_size_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& point_order() const { return order_; }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(points_).subspan(i * dim_, dim_);
  }

 private:
  std::int32_t build_node(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, std::span<const double> q, std::size_t k,
              std::vector<Neighbor>& heap) const;
  double sq_dist(std::span<const double> q, std::size_t i) const;

  std::size_t dim_ = 0;
  std::size_t leaf_size_ = 16;
  std::vector<double> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

// Brute-force reference with the same ordering contract.
std::vector<Neighbor> linear_scan(std::span<const double> points,
                                  std::size_t dim, std::span<const double> q,
                                  std::size_t k);

// Points go to <stem>.ckem (unit ids as given), node array to <stem>.json.
void save_kdtree(const KdTree& tree, const std::vector<std::string>& ids,
                 const std::filesystem::path& stem);
KdTree load_kdtree(const std::filesystem::path& stem,
                   std::vector<std::string>* ids = nullptr);

}  // namespace claimcheck
