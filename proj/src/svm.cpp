#include "claimcheck/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "claimcheck/error.hpp"
#include "claimcheck/tensor.hpp"
#include "json.hpp"

namespace claimcheck {

namespace {

constexpr double kTau = 1e-12;

void check_training_input(const Eigen::MatrixXd& X, std::span<const int> y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "SMO: " + std::to_string(X.rows()) + " rows vs " +
                    std::to_string(y.size()) + " labels");
  }
  if (!X.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "SMO input contains non-finite values");
  }
  bool pos = false;
  bool neg = false;
  for (int label : y) {
    if (label == 1) {
      pos = true;
    } else if (label == -1) {
      neg = true;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "SMO labels must be -1 or +1");
    }
  }
  if (!pos || !neg) {
    throw Error(ErrorCode::kInvalidArgument,
                "SMO needs at least one example of each class");
  }
}

}  // namespace

void SvmParams::validate() const {
  if (!(C > 0.0) || !(gamma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "C and gamma must be positive");
  }
  if (!(tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tol must be positive");
  }
  if (!(positive_weight > 0.0) || !(negative_weight > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "class weights must be positive");
  }
}

double rbf_kernel(std::span<const double> x, std::span<const double> y,
                  double gamma) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "rbf_kernel: " + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sq += d * d;
  }
  return std::exp(-gamma * sq);
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (X.row(i) - X.row(j)).squaredNorm();
      D(i, j) = d;
      D(j, i) = d;
    }
  }
  return D;
}

Eigen::MatrixXd rbf_kernel_matrix(const Eigen::MatrixXd& X, double gamma) {
  return (-gamma * squared_distances(X).array()).exp().matrix();
}

double dual_objective(const Eigen::MatrixXd& kernel, std::span<const int> y,
                      std::span<const double> alpha) {
  const std::size_t n = alpha.size();
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      quad += alpha[i] * alpha[j] * y[i] * y[j] *
              kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return 0.5 * quad - lin;
}

SmoResult train_smo(const Eigen::MatrixXd& X, std::span<const int> y,
                    const SvmParams& params) {
  params.validate();
  check_training_input(X, y);
  return train_smo(X, y, params, rbf_kernel_matrix(X, params.gamma));
}

SmoResult train_smo(const Eigen::MatrixXd& X, std::span<const int> y,
                    const SvmParams& params, const Eigen::MatrixXd& K) {
  params.validate();
  check_training_input(X, y);
  const auto n = static_cast<std::size_t>(X.rows());
  if (static_cast<std::size_t>(K.rows()) != n ||
      static_cast<std::size_t>(K.cols()) != n) {
    throw Error(ErrorCode::kDimensionMismatch, "kernel matrix shape mismatch");
  }
  auto kern = [&](std::size_t i, std::size_t j) {
    return K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };

  std::vector<double> cap(n);
  for (std::size_t t = 0; t < n; ++t) {
    cap[t] = params.C *
             (y[t] > 0 ? params.positive_weight : params.negative_weight);
  }
  std::vector<double> alpha(n, 0.0);
  std::vector<double> G(n, -1.0);

  auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] < cap[t]) || (y[t] < 0 && alpha[t] > 0.0);
  };
  auto in_low = [&](std::size_t t) {
    return (y[t] < 0 && alpha[t] < cap[t]) || (y[t] > 0 && alpha[t] > 0.0);
  };

  SmoResult result;
  double gap = std::numeric_limits<double>::infinity();
  std::size_t iter = 0;
  while (true) {
    // Maximal violating pair; lowest index wins ties.
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    std::size_t i = n;
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      if (in_up(t) && v > m_up) {
        m_up = v;
        i = t;
      }
      if (in_low(t) && v < m_low) {
        m_low = v;
        j = t;
      }
    }
    gap = (i == n || j == n) ? 0.0 : m_up - m_low;
    if (gap <= params.tol) break;
    if (iter >= params.max_iterations) {
      throw Error(ErrorCode::kNotConverged,
                  "SMO hit " + std::to_string(params.max_iterations) +
                      " iterations with KKT violation " + std::to_string(gap));
    }
    ++iter;

    const double Kii = kern(i, i);
    const double Kjj = kern(j, j);
    const double Kij = kern(i, j);
    const double Ci = cap[i];
    const double Cj = cap[j];
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    double quad = Kii + Kjj - 2.0 * Kij;
    if (quad <= 0.0) quad = kTau;

    if (y[i] != y[j]) {
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > Ci - Cj) {
        if (alpha[i] > Ci) {
          alpha[i] = Ci;
          alpha[j] = Ci - diff;
        }
      } else if (alpha[j] > Cj) {
        alpha[j] = Cj;
        alpha[i] = Cj + diff;
      }
    } else {
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > Ci) {
        if (alpha[i] > Ci) {
          alpha[i] = Ci;
          alpha[j] = sum - Ci;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > Cj) {
        if (alpha[j] > Cj) {
          alpha[j] = Cj;
          alpha[i] = sum - Cj;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      G[t] += y[t] * (y[i] * kern(i, t) * dai + y[j] * kern(j, t) * daj);
    }
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yG = y[t] * G[t];
    if (alpha[t] >= cap[t]) {
      if (y[t] < 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else {
      free_sum += yG;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count)
                                    : 0.5 * (ub + lb);

  SvmModel& model = result.model;
  model.params = params;
  model.bias = -rho;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) result.support_indices.push_back(t);
  }
  model.support_vectors.resize(
      static_cast<Eigen::Index>(result.support_indices.size()), X.cols());
  for (std::size_t s = 0; s < result.support_indices.size(); ++s) {
    const std::size_t t = result.support_indices[s];
    model.support_vectors.row(static_cast<Eigen::Index>(s)) =
        X.row(static_cast<Eigen::Index>(t));
    model.dual_coefs.push_back(alpha[t] * y[t]);
  }
  result.dual_objective = dual_objective(K, y, alpha);
  result.alpha = std::move(alpha);
  result.gradient = std::move(G);
  result.kkt_violation = gap;
  result.iterations = iter;
  return result;
}

double decision_value(const SvmModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.support_vectors.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "SVM expects dim " +
                    std::to_string(model.support_vectors.cols()) + ", got " +
                    std::to_string(x.size()));
  }
  double f = model.bias;
  for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s) {
    const double sq = (model.support_vectors.row(s).transpose() - x).squaredNorm();
    f += model.dual_coefs[static_cast<std::size_t>(s)] *
         std::exp(-model.params.gamma * sq);
  }
  return f;
}

Eigen::VectorXd decision_values(const SvmModel& model,
                                const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    out(r) = decision_value(model, X.row(r).transpose());
  }
  return out;
}

int predict(const SvmModel& model, const Eigen::VectorXd& x) {
  return decision_value(model, x) > 0.0 ? 1 : 0;
}

std::vector<int> to_signed_labels(std::span<const int> labels01) {
  std::vector<int> out;
  out.reserve(labels01.size());
  for (int l : labels01) {
    if (l != 0 && l != 1) {
      throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    }
    out.push_back(l == 1 ? 1 : -1);
  }
  return out;
}

void save_svm(const SvmModel& model, const std::filesystem::path& stem) {
  const auto& p = model.params;
  nlohmann::json header = {
      {"C", p.C},
      {"gamma", p.gamma},
      {"tol", p.tol},
      {"max_iterations", p.max_iterations},
      {"positive_weight", p.positive_weight},
      {"negative_weight", p.negative_weight},
      {"bias", model.bias},
      {"dim", model.support_vectors.cols()},
      {"support_count", model.support_vectors.rows()},
      {"dual_coefs", model.dual_coefs},
  };
  std::ofstream out(stem.string() + ".json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + stem.string() + ".json");
  out << header.dump(2) << '\n';

  const auto s = static_cast<std::size_t>(model.support_vectors.rows());
  const auto d = static_cast<std::size_t>(model.support_vectors.cols());
  std::vector<std::string> ids;
  std::vector<float> values;
  values.reserve(s * d);
  for (std::size_t r = 0; r < s; ++r) {
    ids.push_back("sv" + std::to_string(r));
    for (std::size_t c = 0; c < d; ++c) {
      values.push_back(static_cast<float>(model.support_vectors(
          static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
  }
  write_embeddings(stem.string() + ".ckem",
                   EmbeddingTensor::sentence(std::move(ids), d, std::move(values)));
}

SvmModel load_svm(const std::filesystem::path& stem) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + stem.string() + ".json");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, stem.string() + ".json: " + e.what());
  }
  SvmModel model;
  auto& p = model.params;
  p.C = header.at("C").get<double>();
  p.gamma = header.at("gamma").get<double>();
  p.tol = header.at("tol").get<double>();
  p.max_iterations = header.at("max_iterations").get<std::size_t>();
  p.positive_weight = header.at("positive_weight").get<double>();
  p.negative_weight = header.at("negative_weight").get<double>();
  model.bias = header.at("bias").get<double>();
  model.dual_coefs = header.at("dual_coefs").get<std::vector<double>>();

  const EmbeddingTensor t = load_embeddings(stem.string() + ".ckem");
  if (t.unit_count() != model.dual_coefs.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "support vector count does not match coefficient count");
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(t.unit_count()),
                               static_cast<Eigen::Index>(t.dim()));
  for (std::size_t r = 0; r < t.unit_count(); ++r) {
    const auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      model.support_vectors(static_cast<Eigen::Index>(r),
                            static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return model;
}

}  // namespace claimcheck
