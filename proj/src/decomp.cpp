#include "claimcheck/decomp.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "claimcheck/error.hpp"
#include "claimcheck/tensor.hpp"
#include "json.hpp"

namespace claimcheck {

Eigen::Index components_for_energy(const std::vector<double>& sorted_ratios,
                                   int energy_percent) {
  const double target = energy_percent / 100.0;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < sorted_ratios.size(); ++k) {
    cumulative += sorted_ratios[k];
    if (cumulative + kEnergyTolerance >= target) {
      return static_cast<Eigen::Index>(k + 1);
    }
  }
  return static_cast<Eigen::Index>(sorted_ratios.size());
}

PcaModel fit_pca(const Eigen::MatrixXd& X, int energy_percent) {
  if (X.rows() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "PCA needs at least 2 rows");
  }
  if (X.cols() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "PCA needs at least 1 column");
  }
  if (energy_percent < 1 || energy_percent > 100) {
    throw Error(ErrorCode::kInvalidArgument,
                "energy must lie in [1, 100], got " +
                    std::to_string(energy_percent));
  }
  if (!X.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "PCA input contains non-finite values");
  }

  PcaModel model;
  model.energy_percent = energy_percent;
  model.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(X.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotConverged, "covariance eigensolver failed");
  }
  // Eigen returns ascending order.
  const Eigen::Index dim = cov.rows();
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index i = 0; i < dim; ++i) values(i) = std::max(values(i), 0.0);

  const double total = values.sum();
  model.eigenvalues.assign(values.data(), values.data() + dim);
  std::vector<double> ratios(static_cast<std::size_t>(dim), 0.0);
  if (total > 0.0) {
    for (Eigen::Index i = 0; i < dim; ++i) ratios[i] = values(i) / total;
  }

  if (energy_percent == 100) {
    model.components = Eigen::MatrixXd::Identity(dim, dim);
    model.explained_ratio = ratios;
    model.energy_retained = 1.0;
    return model;
  }
  if (total <= 0.0) {
    throw Error(ErrorCode::kValidation,
                "PCA input has zero total variance; only energy 100 applies");
  }

  const Eigen::Index k = components_for_energy(ratios, energy_percent);
  model.components = vectors.leftCols(k).transpose();
  for (Eigen::Index r = 0; r < k; ++r) {
    Eigen::Index arg = 0;
    model.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (model.components(r, arg) < 0.0) model.components.row(r) *= -1.0;
  }
  model.explained_ratio.assign(ratios.begin(), ratios.begin() + k);
  model.energy_retained = 0.0;
  for (double r : model.explained_ratio) model.energy_retained += r;
  return model;
}

Eigen::MatrixXd transform_pca(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "PCA expects dim " + std::to_string(model.input_dim()) +
                    ", got " + std::to_string(X.cols()));
  }
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Eigen::VectorXd transform_pca(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "PCA expects dim " + std::to_string(model.input_dim()) +
                    ", got " + std::to_string(x.size()));
  }
  return model.components * (x - model.mean);
}

Eigen::MatrixXd inverse_transform_pca(const PcaModel& model,
                                      const Eigen::MatrixXd& Z) {
  if (Z.cols() != model.output_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "reduced dim mismatch");
  }
  return (Z * model.components).rowwise() + model.mean.transpose();
}

void save_pca(const PcaModel& model, const std::filesystem::path& stem) {
  nlohmann::json header = {
      {"energy_percent", model.energy_percent},
      {"energy_retained", model.energy_retained},
      {"input_dim", model.input_dim()},
      {"output_dim", model.output_dim()},
      {"mean", std::vector<double>(model.mean.data(),
                                   model.mean.data() + model.mean.size())},
      {"explained_ratio", model.explained_ratio},
      {"eigenvalues", model.eigenvalues},
  };
  std::ofstream out(stem.string() + ".json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + stem.string() + ".json");
  out << header.dump(2) << '\n';

  const auto k = static_cast<std::size_t>(model.output_dim());
  const auto d = static_cast<std::size_t>(model.input_dim());
  std::vector<std::string> ids;
  std::vector<float> values;
  values.reserve(k * d);
  for (std::size_t r = 0; r < k; ++r) {
    ids.push_back("pc" + std::to_string(r));
    for (std::size_t c = 0; c < d; ++c) {
      values.push_back(static_cast<float>(model.components(
          static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
  }
  write_embeddings(stem.string() + ".ckem",
                   EmbeddingTensor::sentence(std::move(ids), d, std::move(values)));
}

PcaModel load_pca(const std::filesystem::path& stem) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + stem.string() + ".json");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, stem.string() + ".json: " + e.what());
  }
  PcaModel model;
  model.energy_percent = header.at("energy_percent").get<int>();
  model.energy_retained = header.at("energy_retained").get<double>();
  const auto mean = header.at("mean").get<std::vector<double>>();
  model.mean = Eigen::Map<const Eigen::VectorXd>(
      mean.data(), static_cast<Eigen::Index>(mean.size()));
  model.explained_ratio =
      header.at("explained_ratio").get<std::vector<double>>();
  model.eigenvalues = header.value("eigenvalues", std::vector<double>{});

  const EmbeddingTensor t = load_embeddings(stem.string() + ".ckem");
  if (t.dim() != mean.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "PCA component width does not match mean");
  }
  model.components.resize(static_cast<Eigen::Index>(t.unit_count()),
                          static_cast<Eigen::Index>(t.dim()));
  for (std::size_t r = 0; r < t.unit_count(); ++r) {
    const auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      model.components(static_cast<Eigen::Index>(r),
                       static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return model;
}

}  // namespace claimcheck
