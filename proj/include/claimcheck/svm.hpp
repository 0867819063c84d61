#pragma once

// RBF-kernel binary SVM trained with SMO.
//
// The dual problem solved is
//   min_a  0.5 a'Qa - sum(a)   s.t.  y'a = 0,  0 <= a_i <= C_i
// with Q_ij = y_i y_j k(x_i, x_j). Each iteration picks the maximal violating
// pair (i in I_up maximizing -y G, j in I_low minimizing -y G) and solves the
// two-variable subproblem analytically. Training stops once the violation
// gap m(a) - M(a) drops to `tol`.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace claimcheck {

struct SvmParams {
  double C = 1.0;
  double gamma = 1.0;
  double tol = 1e-3;
  std::size_t max_iterations = 1'000'000;
  // Per-class multipliers on C (positive class, negative class).
  double positive_weight = 1.0;
  double negative_weight = 1.0;

  void validate() const;
};

struct SvmModel {
  Eigen::MatrixXd support_vectors;  // S x K
  std::vector<double> dual_coefs;   // alpha_i * y_i
  double bias = 0.0;
  SvmParams params;
};

struct SmoResult {
  SvmModel model;
  std::vector<double> alpha;     // one per training row
  std::vector<double> gradient;  // G = Qa - 1 at termination
  std::vector<std::size_t> support_indices;
  double dual_objective = 0.0;
  double kkt_violation = 0.0;  // final m(a) - M(a)
  std::size_t iterations = 0;
};

double rbf_kernel(std::span<const double> x, std::span<const double> y,
                  double gamma);

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X);
Eigen::MatrixXd rbf_kernel_matrix(const Eigen::MatrixXd& X, double gamma);

// y holds -1/+1 labels.
SmoResult train_smo(const Eigen::MatrixXd& X, std::span<const int> y,
                    const SvmParams& params);

// Same, with a caller-supplied kernel matrix for X (reused across C values).
SmoResult train_smo(const Eigen::MatrixXd& X, std::span<const int> y,
                    const SvmParams& params, const Eigen::MatrixXd& kernel);

// 0.5 a'Qa - sum(a)
double dual_objective(const Eigen::MatrixXd& kernel, std::span<const int> y,
                      std::span<const double> alpha);

double decision_value(const SvmModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd decision_values(const SvmModel& model, const Eigen::MatrixXd& X);
int predict(const SvmModel& model, const Eigen::VectorXd& x);

// Maps 0/1 labels to -1/+1.
std::vector<int> to_signed_labels(std::span<const int> labels01);

void save_svm(const SvmModel& model, const std::filesystem::path& stem);
SvmModel load_svm(const std::filesystem::path& stem);

}  // namespace claimcheck
