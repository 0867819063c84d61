#pragma once

// Model selection over (PCA energy, C, gamma) and ensembling of the selected
// PCA + SVM pipelines.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "claimcheck/decomp.hpp"
#include "claimcheck/eval.hpp"
#include "claimcheck/svm.hpp"

namespace claimcheck {

// 10^linspace(lo, hi, steps)
std::vector<double> log_space(double lo_exp, double hi_exp, std::size_t steps);

struct GridSpace {
  std::vector<int> energies;
  std::vector<double> Cs;
  std::vector<double> gammas;

  std::size_t size() const { return energies.size() * Cs.size() * gammas.size(); }

  // Energies 100..95 in steps of 1, C and gamma over 10^[-3, 3] in 30 steps.
  static GridSpace full();
};

// Features with 0/1 labels and topic ids for per-topic ranking metrics.
struct LabeledSet {
  Eigen::MatrixXd X;
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::vector<std::string> topics;

  std::size_t size() const { return labels.size(); }
  LabeledSet concat(const LabeledSet& other) const;
};

enum class SelectionMetric { map, precision_at_30 };

struct GridOptions {
  SvmParams base;  // C and gamma are overwritten per cell
  std::size_t workers = 1;
  SelectionMetric metric = SelectionMetric::map;
  bool fit_pca_on_dev = false;
  std::uint64_t seed = 42;
};

struct GridCell {
  std::size_t index = 0;
  int energy = 100;
  double C = 0.0;
  double gamma = 0.0;
  double dev_metric = 0.0;
  double dev_accuracy = 0.0;
  std::size_t pca_dim = 0;
  std::size_t support_count = 0;
  std::optional<std::string> error;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::optional<std::size_t> best;
  std::uint64_t seed = 42;
  std::size_t workers_used = 0;
};

// Selection order: higher dev metric, then smaller C, smaller gamma, higher
// energy. Failed cells sort last.
bool cell_precedes(const GridCell& a, const GridCell& b);

// Dev-set score of a ranking by decision value, grouped by topic.
double selection_score(const LabeledSet& set, std::span<const double> scores,
                       SelectionMetric metric);

GridResult grid_search(const LabeledSet& train, const LabeledSet& dev,
                       const GridSpace& space, const GridOptions& options);

// Indices of the n best successful cells in selection order.
std::vector<std::size_t> top_cells(const GridResult& result, std::size_t n);

// One PCA + SVM pipeline.
struct Classifier {
  PcaModel pca;
  SvmModel svm;

  double decision_value(const Eigen::VectorXd& raw) const;
  Eigen::VectorXd decision_values(const Eigen::MatrixXd& raw) const;
};

Classifier train_classifier(const LabeledSet& train, int energy, double C,
                            double gamma, const SvmParams& base,
                            const LabeledSet* pca_extra = nullptr);

void save_classifier(const Classifier& model, const std::filesystem::path& dir);
Classifier load_classifier(const std::filesystem::path& dir);

struct EnsembleOutput {
  std::vector<int> labels;
  std::vector<double> scores;
};

// Majority vote over per-model predictions; score is the mean decision value.
// An even split falls back to the sign of the mean score.
EnsembleOutput combine_votes(const std::vector<Eigen::VectorXd>& decisions);
EnsembleOutput ensemble(std::span<const Classifier> models,
                        const Eigen::MatrixXd& X);

}  // namespace claimcheck
