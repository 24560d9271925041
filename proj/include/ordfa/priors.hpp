#pragma once

#include <random>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ordfa/model.hpp"

namespace ordfa {

/// Independent normals on the unconstrained components tau*, mapped to
/// ordered thresholds by tau_1 = tau*_1, tau_c = tau_{c-1} + exp(tau*_c).
/// `dispersion` holds standard deviations unless `is_variance` is set.
struct SequentialThresholdPrior {
  std::vector<double> mu_star;
  std::vector<double> dispersion;
  bool is_variance = false;

  double sd(std::size_t c) const;
  /// Common location/scale for an item with `n_thresholds` cutpoints.
  static SequentialThresholdPrior uniform(std::size_t n_thresholds, double mu, double sd);
};

enum class CdfVariant { ExactNormal, LogisticApprox };

/// Dirichlet prior on the category probabilities induced by the thresholds.
struct InducedDirichletPrior {
  std::vector<double> alpha;
  double anchor = 0.0;
  CdfVariant variant = CdfVariant::ExactNormal;
};

/// Improper flat prior on ordered thresholds (mainly for testing).
struct FlatThresholdPrior {};

using ThresholdPrior = std::variant<SequentialThresholdPrior, InducedDirichletPrior, FlatThresholdPrior>;

struct StructuralPriors {
  double loading_loc = 0.0;
  double loading_scale = 10.0;  // standard deviation
  double lkj_eta = 1.0;
  double factor_sd_scale = 2.5;    // half-Cauchy on factor standard deviations
  double residual_sd_scale = 2.5;  // half-Cauchy on residual standard deviations (free mode)
  bool flat = false;               // drop all structural prior terms
};

/// Structural priors plus one threshold prior per item.
struct PriorConfig {
  StructuralPriors structural;
  std::vector<ThresholdPrior> thresholds;
};

// --- sequential family ------------------------------------------------------

std::vector<double> seq_transform(std::span<const double> tau_star);

/// Sum of independent normal log-densities on tau*. No Jacobian term.
double seq_transform_lpdf(std::span<const double> tau_star, const SequentialThresholdPrior& prior);

/// Moment targets for ordered thresholds mapped to the prior on tau*.
/// Returned dispersions are variances (`is_variance` is set).
SequentialThresholdPrior solve_informative_sequential(std::span<const double> mean_targets,
                                                      std::span<const double> var_targets);

// --- induced-Dirichlet family ----------------------------------------------

/// Simplex of category probabilities, P_c = F(tau_c - anchor) - F(tau_{c-1} - anchor), F = Phi.
std::vector<double> induced_probabilities(std::span<const double> tau, double anchor);

/// Same mapping with the chosen CDF (exact normal or 1.702-scaled logistic).
std::vector<double> induced_probabilities(std::span<const double> tau, double anchor, CdfVariant variant);

/// The C x C matrix whose first column is ones and whose column c + 1 holds
/// +f(tau_c) in row c and -f(tau_c) in row c + 1 (f the CDF's derivative).
Eigen::MatrixXd induced_jacobian(std::span<const double> tau, double anchor, CdfVariant variant);

/// log|det J| by LU with partial pivoting.
double induced_log_abs_det(std::span<const double> tau, double anchor, CdfVariant variant);

/// Dirichlet(p(tau) | alpha) log-density plus log|det J(tau)|.
double induced_dirichlet_lpdf(std::span<const double> tau, std::span<const double> alpha, double anchor,
                              CdfVariant variant = CdfVariant::ExactNormal);

/// Value and gradient with respect to tau (added into `grad`).
double induced_dirichlet_lpdf_grad(std::span<const double> tau, std::span<const double> alpha,
                                   double anchor, CdfVariant variant, std::span<double> grad);

double dirichlet_lpdf(std::span<const double> p, std::span<const double> alpha);

std::vector<double> sample_dirichlet(std::span<const double> alpha, std::mt19937_64& rng);

/// Draw p ~ Dirichlet(alpha) and return tau_c = anchor + Phi^-1(p_1 + ... + p_c).
std::vector<double> sample_induced_thresholds(std::span<const double> alpha, double anchor,
                                              std::mt19937_64& rng);

// --- structural priors --------------------------------------------------------

/// LKJ log-density (up to its normalising constant) of the correlation matrix
/// L L', evaluated from its Cholesky factor: (eta - 1) * log det(L L').
double lkj_lpdf(const Eigen::MatrixXd& corr_cholesky, double eta);

double half_cauchy_lpdf(double x, double scale);

}  // namespace ordfa
