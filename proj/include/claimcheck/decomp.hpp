#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

namespace claimcheck {

// Principal component projection with energy-based truncation.
//
// Components are stored as rows in descending eigenvalue order. Each row's
// entry of largest magnitude is positive, which pins down the otherwise
// arbitrary eigenvector sign. At energy 100 the model keeps every input axis
// unrotated (components = identity) and only centers the data.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;           // K x D
  std::vector<double> explained_ratio;  // K values, non-increasing
  std::vector<double> eigenvalues;      // all D sample-covariance eigenvalues
  double energy_retained = 1.0;
  int energy_percent = 100;

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return components.rows(); }
};

// Tolerance used when comparing cumulative explained ratios against the
// requested energy fraction.
inline constexpr double kEnergyTolerance = 1e-9;

PcaModel fit_pca(const Eigen::MatrixXd& X, int energy_percent);

Eigen::MatrixXd transform_pca(const PcaModel& model, const Eigen::MatrixXd& X);
Eigen::VectorXd transform_pca(const PcaModel& model, const Eigen::VectorXd& x);
Eigen::MatrixXd inverse_transform_pca(const PcaModel& model,
                                      const Eigen::MatrixXd& Z);

// Smallest K whose cumulative ratio reaches energy_percent / 100.
Eigen::Index components_for_energy(const std::vector<double>& sorted_ratios,
                                   int energy_percent);

// <stem>.json carries mean, ratios and energy; <stem>.ckem the component rows.
void save_pca(const PcaModel& model, const std::filesystem::path& stem);
PcaModel load_pca(const std::filesystem::path& stem);

}  // namespace claimcheck
