#include "ordfa/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "ordfa/errors.hpp"
#include "ordfa/normal.hpp"

namespace ordfa {

namespace {

constexpr double kLogisticScale = 1.702;

struct CdfValues {
  double cdf;
  double ccdf;
  double pdf;
  double dpdf;  // derivative of pdf
};

CdfValues cdf_values(double x, CdfVariant variant) {
  if (variant == CdfVariant::ExactNormal) {
    const double f = norm_pdf(x);
    return {norm_cdf(x), norm_ccdf(x), f, -x * f};
  }
  const double s = logistic(kLogisticScale * x);
  const double sc = logistic(-kLogisticScale * x);
  const double f = kLogisticScale * s * sc;
  return {s, sc, f, kLogisticScale * f * (sc - s)};
}

void check_alpha(std::span<const double> alpha, std::size_t n_thresholds) {
  if (alpha.size() != n_thresholds + 1)
    throw DimensionError("alpha must have one entry per category (" + std::to_string(n_thresholds + 1) + ")");
  for (double a : alpha)
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("Dirichlet weights must be positive");
}

// Category probabilities from the CDF values, differencing in the tail that keeps precision.
std::vector<double> probs_from(const std::vector<CdfValues>& v, std::span<const double> x) {
  const std::size_t C = v.size() + 1;
  std::vector<double> p(C);
  for (std::size_t c = 0; c < C; ++c) {
    if (c == 0) {
      p[c] = v[0].cdf;
    } else if (c + 1 == C) {
      p[c] = v[c - 1].ccdf;
    } else {
      p[c] = x[c - 1] > 0.0 ? v[c - 1].ccdf - v[c].ccdf : v[c].cdf - v[c - 1].cdf;
    }
  }
  return p;
}

}  // namespace

double SequentialThresholdPrior::sd(std::size_t c) const {
  return is_variance ? std::sqrt(dispersion[c]) : dispersion[c];
}

SequentialThresholdPrior SequentialThresholdPrior::uniform(std::size_t n_thresholds, double mu, double sd) {
  return {std::vector<double>(n_thresholds, mu), std::vector<double>(n_thresholds, sd), false};
}

std::vector<double> seq_transform(std::span<const double> tau_star) {
  std::vector<double> tau(tau_star.size());
  for (std::size_t c = 0; c < tau_star.size(); ++c)
    tau[c] = c == 0 ? tau_star[0] : tau[c - 1] + std::exp(tau_star[c]);
  return tau;
}

double seq_transform_lpdf(std::span<const double> tau_star, const SequentialThresholdPrior& prior) {
  if (prior.mu_star.size() != tau_star.size() || prior.dispersion.size() != tau_star.size())
    throw DimensionError("sequential prior length does not match the number of thresholds");
  double lp = 0.0;
  for (std::size_t c = 0; c < tau_star.size(); ++c) {
    const double sd = prior.sd(c);
    if (!(sd > 0.0)) throw DomainError("sequential prior dispersion must be positive");
    lp += normal_lpdf(tau_star[c], prior.mu_star[c], sd);
  }
  return lp;
}

SequentialThresholdPrior solve_informative_sequential(std::span<const double> mean_targets,
                                                      std::span<const double> var_targets) {
  if (mean_targets.size() != var_targets.size() || mean_targets.empty())
    throw DimensionError("mean and variance targets must be non-empty and of equal length");
  SequentialThresholdPrior out;
  out.is_variance = true;
  for (std::size_t c = 0; c < mean_targets.size(); ++c) {
    if (!(var_targets[c] > 0.0)) throw DomainError("variance targets must be positive");
    if (c == 0) {
      out.mu_star.push_back(mean_targets[0]);
      out.dispersion.push_back(var_targets[0]);
      continue;
    }
    if (!(mean_targets[c] > mean_targets[c - 1]))
      throw DomainError("infeasible targets: need E[tau_" + std::to_string(c) + "] < E[tau_" +
                        std::to_string(c + 1) + "]");
    if (!(var_targets[c] > var_targets[c - 1]))
      throw DomainError("infeasible targets: need Var[tau_" + std::to_string(c) + "] < Var[tau_" +
                        std::to_string(c + 1) + "]");
    const double gap = mean_targets[c] - mean_targets[c - 1];
    const double gap2 = gap * gap;
    const double v = std::log((var_targets[c] - var_targets[c - 1] + gap2) / gap2);
    out.mu_star.push_back(std::log(gap) - 0.5 * v);
    out.dispersion.push_back(v);
  }
  return out;
}

std::vector<double> induced_probabilities(std::span<const double> tau, double anchor) {
  return induced_probabilities(tau, anchor, CdfVariant::ExactNormal);
}

std::vector<double> induced_probabilities(std::span<const double> tau, double anchor, CdfVariant variant) {
  check_ordered(tau);
  std::vector<double> x(tau.size());
  std::vector<CdfValues> v(tau.size());
  for (std::size_t c = 0; c < tau.size(); ++c) {
    x[c] = tau[c] - anchor;
    v[c] = cdf_values(x[c], variant);
  }
  return probs_from(v, x);
}

Eigen::MatrixXd induced_jacobian(std::span<const double> tau, double anchor, CdfVariant variant) {
  const auto C = static_cast<Eigen::Index>(tau.size() + 1);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(C, C);
  J.col(0).setOnes();
  for (Eigen::Index c = 0; c + 1 < C; ++c) {
    const double f = cdf_values(tau[static_cast<std::size_t>(c)] - anchor, variant).pdf;
    J(c, c + 1) = f;
    J(c + 1, c + 1) = -f;
  }
  return J;
}

double induced_log_abs_det(std::span<const double> tau, double anchor, CdfVariant variant) {
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(induced_jacobian(tau, anchor, variant));
  const auto& U = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index k = 0; k < U.rows(); ++k) s += std::log(std::fabs(U(k, k)));
  return s;
}

double dirichlet_lpdf(std::span<const double> p, std::span<const double> alpha) {
  if (p.size() != alpha.size()) throw DimensionError("Dirichlet: p and alpha lengths differ");
  double a0 = 0.0, lp = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(alpha[k] > 0.0)) throw DomainError("Dirichlet weights must be positive");
    a0 += alpha[k];
    lp -= std::lgamma(alpha[k]);
    if (alpha[k] != 1.0) lp += (alpha[k] - 1.0) * std::log(p[k]);
  }
  return lp + std::lgamma(a0);
}

double induced_dirichlet_lpdf(std::span<const double> tau, std::span<const double> alpha, double anchor,
                              CdfVariant variant) {
  check_alpha(alpha, tau.size());
  const auto p = induced_probabilities(tau, anchor, variant);
  return dirichlet_lpdf(p, alpha) + induced_log_abs_det(tau, anchor, variant);
}

double induced_dirichlet_lpdf_grad(std::span<const double> tau, std::span<const double> alpha,
                                   double anchor, CdfVariant variant, std::span<double> grad) {
  check_alpha(alpha, tau.size());
  const std::size_t T = tau.size();
  std::vector<double> x(T);
  std::vector<CdfValues> v(T);
  for (std::size_t c = 0; c < T; ++c) {
    if (c > 0 && !(tau[c - 1] < tau[c])) return -std::numeric_limits<double>::infinity();
    x[c] = tau[c] - anchor;
    v[c] = cdf_values(x[c], variant);
  }
  const auto p = probs_from(v, x);
  for (double pk : p)
    if (!(pk > 0.0)) return -std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd J = induced_jacobian(tau, anchor, variant);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
  double logdet = 0.0;
  for (Eigen::Index k = 0; k < J.rows(); ++k) logdet += std::log(std::fabs(lu.matrixLU()(k, k)));
  if (!std::isfinite(logdet)) return -std::numeric_limits<double>::infinity();
  const double lp = dirichlet_lpdf(p, alpha) + logdet;

  if (!grad.empty()) {
    const Eigen::MatrixXd Jinv = lu.inverse();
    for (std::size_t c = 0; c < T; ++c) {
      const auto i = static_cast<Eigen::Index>(c);
      double g = v[c].pdf * ((alpha[c] - 1.0) / p[c] - (alpha[c + 1] - 1.0) / p[c + 1]);
      g += v[c].dpdf * (Jinv(i + 1, i) - Jinv(i + 1, i + 1));
      grad[c] += g;
    }
  }
  return lp;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, std::mt19937_64& rng) {
  std::vector<double> g(alpha.size());
  for (;;) {
    double total = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      std::gamma_distribution<double> gamma(alpha[k], 1.0);
      g[k] = gamma(rng);
      total += g[k];
    }
    if (total > 0.0 && std::isfinite(total)) {
      for (double& x : g) x /= total;
      return g;
    }
  }
}

std::vector<double> sample_induced_thresholds(std::span<const double> alpha, double anchor,
                                              std::mt19937_64& rng) {
  if (alpha.size() < 2) throw DimensionError("need at least two categories");
  check_alpha(alpha, alpha.size() - 1);
  const std::size_t T = alpha.size() - 1;
  std::vector<double> tau(T);
  for (;;) {
    const auto p = sample_dirichlet(alpha, rng);
    double lower = 0.0;
    double upper = std::accumulate(p.begin(), p.end(), 0.0);
    bool ok = true;
    for (std::size_t c = 0; c < T && ok; ++c) {
      lower += p[c];
      upper -= p[c];
      tau[c] = anchor + (lower < 0.5 ? norm_quantile(lower) : -norm_quantile(upper));
      ok = std::isfinite(tau[c]) && (c == 0 || tau[c - 1] < tau[c]);
    }
    if (ok) return tau;
  }
}

double lkj_lpdf(const Eigen::MatrixXd& corr_cholesky, double eta) {
  if (!(eta > 0.0)) throw DomainError("LKJ shape must be positive");
  const auto K = corr_cholesky.rows();
  if (corr_cholesky.cols() != K) throw DimensionError("LKJ: Cholesky factor must be square");
  for (Eigen::Index i = 0; i < K; ++i)
    if (std::fabs(corr_cholesky.row(i).head(i + 1).squaredNorm() - 1.0) > 1e-8)
      throw DomainError("LKJ: row " + std::to_string(i + 1) + " of the Cholesky factor is not unit length");
  if (K == 1 || eta == 1.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 1; i < K; ++i) s += std::log(corr_cholesky(i, i));
  return 2.0 * (eta - 1.0) * s;
}

double half_cauchy_lpdf(double x, double scale) {
  if (!(x > 0.0) || !(scale > 0.0)) throw DomainError("half-Cauchy needs positive x and scale");
  const double r = x / scale;
  return std::log(2.0 / (std::numbers::pi * scale)) - std::log1p(r * r);
}

}  // namespace ordfa
