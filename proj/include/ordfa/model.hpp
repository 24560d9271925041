#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ordfa {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ItemSpec {
  std::string id;
  std::vector<int> factors;  // zero-based factor indices the item loads on
  int n_categories = 2;
  bool is_reference = false;  // loading fixed to 1 on its (single) factor
};

enum class ResidualMode { Fixed, Free };

/// Intercepts are always fixed at zero and one reference loading per factor
/// is fixed at one. Residual variances are either fixed constants or free.
struct IdentificationRule {
  ResidualMode residuals = ResidualMode::Fixed;
  double fixed_residual_variance = 1.0;
};

class ModelSpec {
 public:
  ModelSpec() = default;
  ModelSpec(int n_factors, std::vector<ItemSpec> items, IdentificationRule identification = {},
            int n_groups = 1);

  int n_factors() const { return n_factors_; }
  int n_items() const { return static_cast<int>(items_.size()); }
  int n_groups() const { return n_groups_; }
  const std::vector<ItemSpec>& items() const { return items_; }
  const ItemSpec& item(int i) const { return items_[static_cast<std::size_t>(i)]; }
  const IdentificationRule& identification() const { return identification_; }

  int n_thresholds(int i) const { return item(i).n_categories - 1; }
  int total_thresholds() const;
  std::vector<int> category_counts() const;

  /// (item, factor) pairs of loadings that are estimated, item-major order.
  const std::vector<std::pair<int, int>>& free_loadings() const { return free_loadings_; }
  int reference_item(int factor) const { return reference_items_[static_cast<std::size_t>(factor)]; }
  bool loads_on(int item, int factor) const;

 private:
  int n_factors_ = 0;
  std::vector<ItemSpec> items_;
  IdentificationRule identification_;
  int n_groups_ = 1;
  std::vector<std::pair<int, int>> free_loadings_;
  std::vector<int> reference_items_;
};

/// Loadings, factor covariance, residual variances and intercepts.
struct LatentStructure {
  Eigen::MatrixXd loadings;      // I x K
  Eigen::MatrixXd factor_cov;    // K x K
  Eigen::VectorXd residual_var;  // I, diagonal of Theta
  Eigen::VectorXd intercepts;    // I, zero under the default identification
};

/// Strictly increasing cutpoints of one item.
class ThresholdVector {
 public:
  ThresholdVector() = default;
  explicit ThresholdVector(std::vector<double> tau);

  std::span<const double> values() const { return tau_; }
  std::size_t size() const { return tau_.size(); }
  int n_categories() const { return static_cast<int>(tau_.size()) + 1; }
  double operator[](std::size_t c) const { return tau_[c]; }

 private:
  std::vector<double> tau_;
};

/// Throws OrderingError unless tau is strictly increasing.
void check_ordered(std::span<const double> tau);

/// Thresholds of every item packed into one buffer.
struct ThresholdTable {
  std::vector<double> values;
  std::vector<int> offsets;  // size I + 1

  ThresholdTable() = default;
  explicit ThresholdTable(const std::vector<ThresholdVector>& items);
  explicit ThresholdTable(const std::vector<int>& n_categories);

  int n_items() const { return static_cast<int>(offsets.size()) - 1; }
  std::span<const double> item(int i) const {
    return {values.data() + offsets[i], static_cast<std::size_t>(offsets[i + 1] - offsets[i])};
  }
  std::span<double> item(int i) {
    return {values.data() + offsets[i], static_cast<std::size_t>(offsets[i + 1] - offsets[i])};
  }
};

/// N x I ordinal responses coded 1..C_i, with the declared category count per item.
class DatasetMatrix {
 public:
  DatasetMatrix() = default;
  DatasetMatrix(std::vector<int> declared_categories, std::vector<int> responses_row_major);

  int n_rows() const { return n_rows_; }
  int n_items() const { return static_cast<int>(declared_.size()); }
  int operator()(int n, int i) const { return responses_[static_cast<std::size_t>(n) * declared_.size() + static_cast<std::size_t>(i)]; }
  std::span<const int> row(int n) const {
    return {responses_.data() + static_cast<std::size_t>(n) * declared_.size(), declared_.size()};
  }
  const std::vector<int>& declared_categories() const { return declared_; }
  const std::vector<int>& responses() const { return responses_; }
  /// counts[i][c] = number of rows with response c + 1 on item i.
  const std::vector<std::vector<int>>& category_counts() const { return counts_; }

  DatasetMatrix select_rows(std::span<const int> rows) const;

 private:
  std::vector<int> declared_;
  std::vector<int> responses_;
  int n_rows_ = 0;
  std::vector<std::vector<int>> counts_;
};

/// Lambda Phi Lambda' + Theta.
Eigen::MatrixXd marginal_cov(const Eigen::MatrixXd& loadings, const Eigen::MatrixXd& factor_cov,
                             const Eigen::VectorXd& residual_var);

/// Lower Cholesky factor; throws NotPositiveDefinite naming the failing pivot.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& sigma);

/// Reverse-mode adjoint of cholesky_lower. Given L and dF/dL (lower triangle),
/// returns dF/dSigma on the lower triangle (strict-lower entries carry the
/// derivative with respect to the shared symmetric element).
Eigen::MatrixXd cholesky_lower_adjoint(const Eigen::MatrixXd& L, const Eigen::MatrixXd& L_adj);

struct GhkResult {
  Eigen::VectorXd z;  // latent standard scores
  Eigen::VectorXd d;  // interval probabilities
  double log_density = 0.0;
  bool vanished = false;  // some d fell below the underflow floor
};

/// d values below this are reported as a vanished (-inf) density.
inline constexpr double kUnderflowFloor = 1e-300;

/// Sequential truncated-normal construction for one response row.
GhkResult ghk_tmvn(std::span<const int> y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& L,
                   const ThresholdTable& thresholds, std::span<const double> u);

/// Sum over rows of the GHK log interval probabilities. `u` is N x I row-major.
/// Returns -inf if any interval probability vanishes.
double augmented_log_likelihood(const LatentStructure& structure, const ThresholdTable& thresholds,
                                std::span<const double> u, const DatasetMatrix& data);

/// Gradient-carrying variant used by the posterior. Accumulates into L_adj
/// (I x I lower), tau_adj (packed like `thresholds`) and writes u_adj (N x I).
/// L must be lower triangular and the mean is zero.
double augmented_log_likelihood_grad(const RowMatrix& L, const ThresholdTable& thresholds,
                                     std::span<const double> u, const DatasetMatrix& data,
                                     RowMatrix* L_adj, std::span<double> tau_adj,
                                     std::span<double> u_adj);

/// Category probabilities of an ordinal probit with location mu and scale sigma.
std::vector<double> category_prob(std::span<const double> tau, double mu, double sigma);

}  // namespace ordfa
