#include "claimcheck/kdtree.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "claimcheck/error.hpp"
#include "claimcheck/tensor.hpp"
#include "json.hpp"

namespace claimcheck {

namespace {

// Keeps the k best (smallest) neighbours as a max-heap on (distance, index).
void offer(std::vector<Neighbor>& heap, std::size_t k, Neighbor n) {
  if (heap.size() < k) {
    heap.push_back(n);
    std::push_heap(heap.begin(), heap.end());
  } else if (n < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = n;
    std::push_heap(heap.begin(), heap.end());
  }
}

}  // namespace

KdTree KdTree::build(std::vector<double> points, std::size_t dim,
                     std::size_t leaf_size) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "KD-tree dim must be >= 1");
  if (points.size() % dim != 0) {
    throw Error(ErrorCode::kShapeMismatch, "point buffer is not a multiple of dim");
  }
  if (points.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "KD-tree needs at least one point");
  }
  KdTree tree;
  tree.dim_ = dim;
  tree.leaf_size_ = std::max<std::size_t>(1, leaf_size);
  tree.points_ = std::move(points);
  tree.order_.resize(tree.size());
  std::iota(tree.order_.begin(), tree.order_.end(), 0u);
  tree.build_node(0, static_cast<std::uint32_t>(tree.size()));
  return tree;
}

std::int32_t KdTree::build_node(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= leaf_size_) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  std::size_t best_dim = 0;
  double best_spread = -1.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    double lo = points_[order_[begin] * dim_ + d];
    double hi = lo;
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      const double v = points_[order_[i] * dim_ + d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  auto key_less = [&](std::uint32_t a, std::uint32_t b) {
    const double va = points_[a * dim_ + best_dim];
    const double vb = points_[b * dim_ + best_dim];
    return va != vb ? va < vb : a < b;
  };
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, key_less);

  const double split = points_[order_[mid] * dim_ + best_dim];
  const std::int32_t left = build_node(begin, mid);
  const std::int32_t right = build_node(mid, end);
  Node& node = nodes_[id];
  node.split_dim = static_cast<std::int32_t>(best_dim);
  node.split_value = split;
  node.left = left;
  node.right = right;
  node.begin = begin;
  node.end = end;
  return id;
}

double KdTree::sq_dist(std::span<const double> q, std::size_t i) const {
  const double* p = points_.data() + i * dim_;
  double s = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    const double diff = q[d] - p[d];
    s += diff * diff;
  }
  return s;
}

void KdTree::search(std::int32_t node_id, std::span<const double> q,
                    std::size_t k, std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.split_dim < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      offer(heap, k, Neighbor{order_[i], sq_dist(q, order_[i])});
    }
    return;
  }
  const double diff = q[static_cast<std::size_t>(node.split_dim)] - node.split_value;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search(near, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().sq_distance) {
    search(far, q, k, heap);
  }
}

std::vector<Neighbor> KdTree::query(std::span<const double> q,
                                    std::size_t k) const {
  if (q.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query dim " + std::to_string(q.size()) + ", tree dim " +
                    std::to_string(dim_));
  }
  k = std::min(k, size());
  std::vector<Neighbor> heap;
  if (k == 0) return heap;
  heap.reserve(k);
  search(0, q, k, heap);
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

std::vector<Neighbor> linear_scan(std::span<const double> points,
                                  std::size_t dim, std::span<const double> q,
                                  std::size_t k) {
  if (q.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, "query dim mismatch");
  }
  const std::size_t m = points.size() / dim;
  std::vector<Neighbor> all(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = q[d] - points[i * dim + d];
      s += diff * diff;
    }
    all[i] = Neighbor{i, s};
  }
  k = std::min(k, m);
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                    all.end());
  all.resize(k);
  return all;
}

void save_kdtree(const KdTree& tree, const std::vector<std::string>& ids,
                 const std::filesystem::path& stem) {
  if (ids.size() != tree.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one id per tree point required");
  }
  std::vector<float> values;
  values.reserve(tree.size() * tree.dim());
  for (std::size_t i = 0; i < tree.size(); ++i) {
    for (double v : tree.point(i)) values.push_back(static_cast<float>(v));
  }
  write_embeddings(stem.string() + ".ckem",
                   EmbeddingTensor::sentence(ids, tree.dim(), std::move(values)));
  nlohmann::json header = {
      {"dim", tree.dim()},
      {"size", tree.size()},
      {"leaf_size", tree.leaf_size()},
      {"node_count", tree.nodes().size()},
  };
  std::ofstream out(stem.string() + ".json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + stem.string() + ".json");
  out << header.dump(2) << '\n';
}

KdTree load_kdtree(const std::filesystem::path& stem,
                   std::vector<std::string>* ids) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + stem.string() + ".json");
  const auto header = nlohmann::json::parse(in, nullptr, false);
  if (header.is_discarded()) {
    throw Error(ErrorCode::kParse, stem.string() + ".json is not valid JSON");
  }
  const EmbeddingTensor t = load_embeddings(stem.string() + ".ckem");
  std::vector<double> points(t.values().begin(), t.values().end());
  // Nodes are rebuilt from the stored (f32) points so split values agree
  // exactly with the coordinates being searched.
  KdTree tree = KdTree::build(std::move(points), t.dim(),
                              header.at("leaf_size").get<std::size_t>());
  if (tree.nodes().size() != header.at("node_count").get<std::size_t>()) {
    throw Error(ErrorCode::kShapeMismatch, "rebuilt tree shape differs");
  }
  if (ids != nullptr) *ids = t.unit_ids();
  return tree;
}

}  // namespace claimcheck
