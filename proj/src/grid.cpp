#include "claimcheck/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "claimcheck/error.hpp"

namespace claimcheck {

std::vector<double> log_space(double lo_exp, double hi_exp, std::size_t steps) {
  std::vector<double> out;
  if (steps == 0) return out;
  if (steps == 1) return {std::pow(10.0, lo_exp)};
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double e = lo_exp + (hi_exp - lo_exp) * static_cast<double>(i) /
                                  static_cast<double>(steps - 1);
    out.push_back(std::pow(10.0, e));
  }
  return out;
}

GridSpace GridSpace::full() {
  GridSpace g;
  for (int e = 100; e >= 95; --e) g.energies.push_back(e);
  g.Cs = log_space(-3.0, 3.0, 30);
  g.gammas = log_space(-3.0, 3.0, 30);
  return g;
}

LabeledSet LabeledSet::concat(const LabeledSet& other) const {
  if (X.cols() != other.X.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature widths differ");
  }
  LabeledSet out;
  out.X.resize(X.rows() + other.X.rows(), X.cols());
  out.X << X, other.X;
  out.labels = labels;
  out.labels.insert(out.labels.end(), other.labels.begin(), other.labels.end());
  out.ids = ids;
  out.ids.insert(out.ids.end(), other.ids.begin(), other.ids.end());
  out.topics = topics;
  out.topics.insert(out.topics.end(), other.topics.begin(), other.topics.end());
  return out;
}

bool cell_precedes(const GridCell& a, const GridCell& b) {
  if (a.error.has_value() != b.error.has_value()) return !a.error.has_value();
  if (a.dev_metric != b.dev_metric) return a.dev_metric > b.dev_metric;
  if (a.C != b.C) return a.C < b.C;
  if (a.gamma != b.gamma) return a.gamma < b.gamma;
  if (a.energy != b.energy) return a.energy > b.energy;
  return a.index < b.index;
}

double selection_score(const LabeledSet& set, std::span<const double> scores,
                       SelectionMetric metric) {
  RankedRun run;
  Qrels qrels;
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<double>>>
      by_topic;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto& [ids, sc] = by_topic[set.topics[i]];
    ids.push_back(set.ids[i]);
    sc.push_back(scores[i]);
    auto& rel = qrels.pairs[set.topics[i]];
    if (set.labels[i] == 1) rel.insert(set.ids[i]);
  }
  for (auto& [topic, entry] : by_topic) {
    run.queries[topic] = rank_by_score(entry.first, entry.second);
  }
  return metric == SelectionMetric::map ? mean_average_precision(run, qrels)
                                        : mean_precision_at_k(run, qrels, 30);
}

namespace {

double accuracy(std::span<const int> labels, const Eigen::VectorXd& f) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int pred = f(static_cast<Eigen::Index>(i)) > 0.0 ? 1 : 0;
    correct += pred == labels[i];
  }
  return labels.empty() ? 0.0
                        : static_cast<double>(correct) /
                              static_cast<double>(labels.size());
}

struct EnergyStage {
  std::optional<std::string> error;
  std::size_t dim = 0;
  Eigen::MatrixXd train_z;
  Eigen::MatrixXd dev_z;
  Eigen::MatrixXd sq_dist;
};

template <typename Task>
std::size_t run_pool(std::size_t tasks, std::size_t workers, Task&& task) {
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, tasks));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) task(t);
  };
  if (n == 1) {
    worker();
    return 1;
  }
  std::vector<std::jthread> threads;
  threads.reserve(n);
  for (std::size_t w = 0; w < n; ++w) threads.emplace_back(worker);
  return n;
}

}  // namespace

GridResult grid_search(const LabeledSet& train, const LabeledSet& dev,
                       const GridSpace& space, const GridOptions& options) {
  if (train.size() == 0 || dev.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid search needs non-empty train and dev sets");
  }
  if (space.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty grid");
  }
  const std::vector<int> y = to_signed_labels(train.labels);
  if (std::find(y.begin(), y.end(), 1) == y.end() ||
      std::find(y.begin(), y.end(), -1) == y.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "training split must contain both classes");
  }

  const LabeledSet pca_input = options.fit_pca_on_dev ? train.concat(dev) : train;
  std::vector<EnergyStage> stages(space.energies.size());
  for (std::size_t e = 0; e < space.energies.size(); ++e) {
    try {
      const PcaModel pca = fit_pca(pca_input.X, space.energies[e]);
      stages[e].dim = static_cast<std::size_t>(pca.output_dim());
      stages[e].train_z = transform_pca(pca, train.X);
      stages[e].dev_z = transform_pca(pca, dev.X);
      stages[e].sq_dist = squared_distances(stages[e].train_z);
    } catch (const Error& err) {
      stages[e].error = err.what();
    }
  }

  GridResult result;
  result.seed = options.seed;
  result.cells.resize(space.size());
  const std::size_t nc = space.Cs.size();
  const std::size_t ng = space.gammas.size();
  for (std::size_t e = 0; e < space.energies.size(); ++e) {
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t g = 0; g < ng; ++g) {
        GridCell& cell = result.cells[(e * nc + c) * ng + g];
        cell.index = (e * nc + c) * ng + g;
        cell.energy = space.energies[e];
        cell.C = space.Cs[c];
        cell.gamma = space.gammas[g];
        cell.pca_dim = stages[e].dim;
        cell.error = stages[e].error;
      }
    }
  }

  // One task per (energy, gamma): the kernel matrix is shared across C.
  const std::size_t tasks = space.energies.size() * ng;
  result.workers_used = run_pool(tasks, options.workers, [&](std::size_t t) {
    const std::size_t e = t / ng;
    const std::size_t g = t % ng;
    const EnergyStage& stage = stages[e];
    if (stage.error) return;
    const Eigen::MatrixXd K =
        (-space.gammas[g] * stage.sq_dist.array()).exp().matrix();
    for (std::size_t c = 0; c < nc; ++c) {
      GridCell& cell = result.cells[(e * nc + c) * ng + g];
      try {
        SvmParams p = options.base;
        p.C = cell.C;
        p.gamma = cell.gamma;
        const SmoResult fit = train_smo(stage.train_z, y, p, K);
        const Eigen::VectorXd f = decision_values(fit.model, stage.dev_z);
        cell.dev_metric = selection_score(
            dev, std::span<const double>(f.data(), static_cast<std::size_t>(f.size())),
            options.metric);
        cell.dev_accuracy = accuracy(dev.labels, f);
        cell.support_count = fit.support_indices.size();
      } catch (const Error& err) {
        cell.error = err.what();
      }
    }
  });

  for (const GridCell& cell : result.cells) {
    if (cell.error) continue;
    if (!result.best || cell_precedes(cell, result.cells[*result.best])) {
      result.best = cell.index;
    }
  }
  return result;
}

std::vector<std::size_t> top_cells(const GridResult& result, std::size_t n) {
  std::vector<std::size_t> order;
  for (const GridCell& cell : result.cells) {
    if (!cell.error) order.push_back(cell.index);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cell_precedes(result.cells[a], result.cells[b]);
  });
  if (order.size() > n) order.resize(n);
  return order;
}

double Classifier::decision_value(const Eigen::VectorXd& raw) const {
  return claimcheck::decision_value(svm, transform_pca(pca, raw));
}

Eigen::VectorXd Classifier::decision_values(const Eigen::MatrixXd& raw) const {
  return claimcheck::decision_values(svm, transform_pca(pca, raw));
}

Classifier train_classifier(const LabeledSet& train, int energy, double C,
                            double gamma, const SvmParams& base,
                            const LabeledSet* pca_extra) {
  Classifier model;
  model.pca = fit_pca(pca_extra ? train.concat(*pca_extra).X : train.X, energy);
  SvmParams p = base;
  p.C = C;
  p.gamma = gamma;
  const std::vector<int> y = to_signed_labels(train.labels);
  model.svm = train_smo(transform_pca(model.pca, train.X), y, p).model;
  return model;
}

void save_classifier(const Classifier& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_pca(model.pca, dir / "pca");
  save_svm(model.svm, dir / "svm");
}

Classifier load_classifier(const std::filesystem::path& dir) {
  Classifier model;
  model.pca = load_pca(dir / "pca");
  model.svm = load_svm(dir / "svm");
  if (model.pca.output_dim() != model.svm.support_vectors.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                dir.string() + ": PCA output width does not match SVM input");
  }
  return model;
}

EnsembleOutput combine_votes(const std::vector<Eigen::VectorXd>& decisions) {
  if (decisions.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ensemble needs at least one model");
  }
  const Eigen::Index n = decisions.front().size();
  EnsembleOutput out;
  out.labels.resize(static_cast<std::size_t>(n));
  out.scores.resize(static_cast<std::size_t>(n));
  const auto m = decisions.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t votes = 0;
    double sum = 0.0;
    for (const Eigen::VectorXd& d : decisions) {
      if (d.size() != n) {
        throw Error(ErrorCode::kDimensionMismatch, "ensemble member size mismatch");
      }
      votes += d(i) > 0.0 ? 1 : 0;
      sum += d(i);
    }
    const double mean = sum / static_cast<double>(m);
    int label = 0;
    if (2 * votes > m) {
      label = 1;
    } else if (2 * votes == m) {
      label = mean > 0.0 ? 1 : 0;
    }
    out.labels[static_cast<std::size_t>(i)] = label;
    out.scores[static_cast<std::size_t>(i)] = mean;
  }
  return out;
}

EnsembleOutput ensemble(std::span<const Classifier> models,
                        const Eigen::MatrixXd& X) {
  std::vector<Eigen::VectorXd> decisions;
  decisions.reserve(models.size());
  for (const Classifier& m : models) decisions.push_back(m.decision_values(X));
  return combine_votes(decisions);
}

}  // namespace claimcheck
