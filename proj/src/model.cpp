#include "ordfa/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ordfa/errors.hpp"
#include "ordfa/normal.hpp"

namespace ordfa {

ModelSpec::ModelSpec(int n_factors, std::vector<ItemSpec> items, IdentificationRule identification,
                     int n_groups)
    : n_factors_(n_factors),
      items_(std::move(items)),
      identification_(identification),
      n_groups_(n_groups) {
  if (n_factors_ < 1) throw ConfigError("model needs at least one factor");
  if (items_.empty()) throw ConfigError("model needs at least one item");
  if (n_groups_ < 1) throw ConfigError("n_groups must be positive");
  if (identification_.residuals == ResidualMode::Fixed && !(identification_.fixed_residual_variance > 0))
    throw ConfigError("fixed residual variance must be positive");

  std::vector<int> items_per_factor(static_cast<std::size_t>(n_factors_), 0);
  reference_items_.assign(static_cast<std::size_t>(n_factors_), -1);
  std::set<std::string> ids;
  for (int i = 0; i < n_items(); ++i) {
    const ItemSpec& it = items_[static_cast<std::size_t>(i)];
    if (!ids.insert(it.id).second) throw ConfigError("duplicate item id '" + it.id + "'");
    if (it.n_categories < 2)
      throw ConfigError("item '" + it.id + "' must have at least 2 categories");
    if (it.factors.empty()) throw ConfigError("item '" + it.id + "' loads on no factor");
    std::set<int> seen;
    for (int f : it.factors) {
      if (f < 0 || f >= n_factors_)
        throw ConfigError("item '" + it.id + "' references unknown factor " + std::to_string(f + 1));
      if (!seen.insert(f).second)
        throw ConfigError("item '" + it.id + "' lists factor " + std::to_string(f + 1) + " twice");
      ++items_per_factor[static_cast<std::size_t>(f)];
    }
    if (it.is_reference) {
      if (it.factors.size() != 1)
        throw ConfigError("reference item '" + it.id + "' must load on exactly one factor");
      int& ref = reference_items_[static_cast<std::size_t>(it.factors.front())];
      if (ref >= 0)
        throw ConfigError("factor " + std::to_string(it.factors.front() + 1) +
                          " has more than one reference item");
      ref = i;
    }
  }
  for (int f = 0; f < n_factors_; ++f) {
    if (items_per_factor[static_cast<std::size_t>(f)] == 0)
      throw ConfigError("factor " + std::to_string(f + 1) + " has no items");
    if (reference_items_[static_cast<std::size_t>(f)] < 0)
      throw ConfigError("factor " + std::to_string(f + 1) + " has no reference item");
  }
  for (int i = 0; i < n_items(); ++i) {
    const ItemSpec& it = items_[static_cast<std::size_t>(i)];
    std::vector<int> fs = it.factors;
    std::sort(fs.begin(), fs.end());
    for (int f : fs)
      if (!(it.is_reference && reference_items_[static_cast<std::size_t>(f)] == i))
        free_loadings_.emplace_back(i, f);
  }
}

int ModelSpec::total_thresholds() const {
  int total = 0;
  for (const auto& it : items_) total += it.n_categories - 1;
  return total;
}

std::vector<int> ModelSpec::category_counts() const {
  std::vector<int> out;
  out.reserve(items_.size());
  for (const auto& it : items_) out.push_back(it.n_categories);
  return out;
}

bool ModelSpec::loads_on(int item, int factor) const {
  const auto& fs = items_[static_cast<std::size_t>(item)].factors;
  return std::find(fs.begin(), fs.end(), factor) != fs.end();
}

void check_ordered(std::span<const double> tau) {
  for (std::size_t c = 0; c < tau.size(); ++c) {
    if (!std::isfinite(tau[c]))
      throw OrderingError("threshold " + std::to_string(c + 1) + " is not finite");
    if (c > 0 && !(tau[c - 1] < tau[c]))
      throw OrderingError("thresholds not strictly increasing at position " + std::to_string(c + 1));
  }
}

ThresholdVector::ThresholdVector(std::vector<double> tau) : tau_(std::move(tau)) {
  check_ordered(tau_);
}

ThresholdTable::ThresholdTable(const std::vector<ThresholdVector>& items) {
  offsets.reserve(items.size() + 1);
  offsets.push_back(0);
  for (const auto& t : items) {
    values.insert(values.end(), t.values().begin(), t.values().end());
    offsets.push_back(static_cast<int>(values.size()));
  }
}

ThresholdTable::ThresholdTable(const std::vector<int>& n_categories) {
  offsets.reserve(n_categories.size() + 1);
  offsets.push_back(0);
  int total = 0;
  for (int c : n_categories) {
    total += c - 1;
    offsets.push_back(total);
  }
  values.assign(static_cast<std::size_t>(total), 0.0);
}

DatasetMatrix::DatasetMatrix(std::vector<int> declared_categories, std::vector<int> responses_row_major)
    : declared_(std::move(declared_categories)), responses_(std::move(responses_row_major)) {
  const std::size_t I = declared_.size();
  if (I == 0) throw DataError("dataset has no items");
  if (responses_.size() % I != 0)
    throw DataError("response buffer size is not a multiple of the item count");
  n_rows_ = static_cast<int>(responses_.size() / I);
  counts_.resize(I);
  for (std::size_t i = 0; i < I; ++i) {
    if (declared_[i] < 2) throw DataError("item " + std::to_string(i + 1) + " declares fewer than 2 categories");
    counts_[i].assign(static_cast<std::size_t>(declared_[i]), 0);
  }
  for (int n = 0; n < n_rows_; ++n) {
    for (std::size_t i = 0; i < I; ++i) {
      const int v = responses_[static_cast<std::size_t>(n) * I + i];
      if (v < 1 || v > declared_[i])
        throw DataError("row " + std::to_string(n + 1) + ", item " + std::to_string(i + 1) +
                        ": code " + std::to_string(v) + " outside 1.." + std::to_string(declared_[i]));
      ++counts_[i][static_cast<std::size_t>(v - 1)];
    }
  }
}

DatasetMatrix DatasetMatrix::select_rows(std::span<const int> rows) const {
  std::vector<int> out;
  out.reserve(rows.size() * declared_.size());
  for (int r : rows) {
    auto src = row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return DatasetMatrix(declared_, std::move(out));
}

Eigen::MatrixXd marginal_cov(const Eigen::MatrixXd& loadings, const Eigen::MatrixXd& factor_cov,
                             const Eigen::VectorXd& residual_var) {
  const auto I = loadings.rows();
  const auto K = loadings.cols();
  if (factor_cov.rows() != K || factor_cov.cols() != K)
    throw DimensionError("factor covariance must be " + std::to_string(K) + "x" + std::to_string(K));
  if (residual_var.size() != I)
    throw DimensionError("residual variance vector must have length " + std::to_string(I));
  if ((residual_var.array() <= 0.0).any()) throw DomainError("residual variances must be positive");
  Eigen::MatrixXd sigma = loadings * factor_cov * loadings.transpose();
  sigma.diagonal() += residual_var;
  // Exact symmetry regardless of rounding in the triple product.
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return sigma;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& sigma) {
  const auto n = sigma.rows();
  if (sigma.cols() != n) throw DimensionError("Cholesky needs a square matrix");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = sigma(j, j);
    for (Eigen::Index k = 0; k < j; ++k) s -= L(j, k) * L(j, k);
    if (!(s > 0.0)) throw NotPositiveDefinite(static_cast<std::size_t>(j), s);
    const double ljj = std::sqrt(s);
    L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double t = sigma(i, j);
      for (Eigen::Index k = 0; k < j; ++k) t -= L(i, k) * L(j, k);
      L(i, j) = t / ljj;
    }
  }
  return L;
}

Eigen::MatrixXd cholesky_lower_adjoint(const Eigen::MatrixXd& L, const Eigen::MatrixXd& L_adj_in) {
  const auto n = L.rows();
  Eigen::MatrixXd Ladj = L_adj_in.triangularView<Eigen::Lower>();
  Eigen::MatrixXd Sadj = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const double ljj = L(j, j);
    for (Eigen::Index i = n - 1; i > j; --i) {
      const double t = Ladj(i, j) / ljj;
      if (t == 0.0) continue;
      Sadj(i, j) += t;
      for (Eigen::Index k = 0; k < j; ++k) {
        Ladj(i, k) -= t * L(j, k);
        Ladj(j, k) -= t * L(i, k);
      }
      Ladj(j, j) -= t * L(i, j);
    }
    const double sbar = Ladj(j, j) / (2.0 * ljj);
    Sadj(j, j) += sbar;
    for (Eigen::Index k = 0; k < j; ++k) Ladj(j, k) -= 2.0 * sbar * L(j, k);
  }
  return Sadj;
}

namespace {

// Per-item quantities of the forward recursion needed by the reverse pass.
struct StepRecord {
  double a_lo, a_hi;
  double d;
  double s;
  bool has_lo, has_hi;
};

// Forward recursion for one row; L is row-major I x I. Returns sum log d or
// -inf when an interval probability vanishes.
double ghk_forward(const int* y, const double* mu, const double* L, int I, const ThresholdTable& thr,
                   const double* u, double* z, StepRecord* rec) {
  double logd = 0.0;
  for (int k = 0; k < I; ++k) {
    const double* Lk = L + static_cast<std::ptrdiff_t>(k) * I;
    double m = mu ? mu[k] : 0.0;
    for (int j = 0; j < k; ++j) m += Lk[j] * z[j];
    const double s = Lk[k];
    const auto tau = thr.item(k);
    const int c = y[k] - 1;
    const int top = static_cast<int>(tau.size());
    StepRecord r{0.0, 0.0, 0.0, s, c > 0, c < top};
    // One erfc per bound: the complement is only ever used in the half where
    // it carries no cancellation.
    double lo = 0.0, lo_c = 1.0, hi = 1.0, hi_c = 0.0;
    if (r.has_lo) {
      r.a_lo = (tau[static_cast<std::size_t>(c - 1)] - m) / s;
      if (r.a_lo > 0.0) {
        lo_c = norm_ccdf(r.a_lo);
        lo = 1.0 - lo_c;
      } else {
        lo = norm_cdf(r.a_lo);
        lo_c = 1.0 - lo;
      }
    }
    if (r.has_hi) {
      r.a_hi = (tau[static_cast<std::size_t>(c)] - m) / s;
      if (r.a_hi > 0.0) {
        hi_c = norm_ccdf(r.a_hi);
        hi = 1.0 - hi_c;
      } else {
        hi = norm_cdf(r.a_hi);
        hi_c = 1.0 - hi;
      }
    }
    // Difference in whichever tail keeps precision.
    r.d = (r.has_lo && r.a_lo > 0.0) ? lo_c - hi_c : hi - lo;
    if (!(r.d > kUnderflowFloor)) return -std::numeric_limits<double>::infinity();
    const double nu = lo + r.d * u[k];
    const double nu_c = hi_c + r.d * (1.0 - u[k]);
    z[k] = nu < 0.5 ? norm_quantile(nu) : -norm_quantile(nu_c);
    if (!std::isfinite(z[k])) return -std::numeric_limits<double>::infinity();
    logd += std::log(r.d);
    if (rec) rec[k] = r;
  }
  return logd;
}

}  // namespace

GhkResult ghk_tmvn(std::span<const int> y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& L,
                   const ThresholdTable& thresholds, std::span<const double> u) {
  const int I = static_cast<int>(y.size());
  if (mu.size() != I || L.rows() != I || L.cols() != I || static_cast<int>(u.size()) != I ||
      thresholds.n_items() != I)
    throw DimensionError("ghk_tmvn: inconsistent dimensions");
  for (int k = 0; k < I; ++k) {
    if (!(u[k] > 0.0 && u[k] < 1.0)) throw DomainError("ghk_tmvn: u must lie in (0, 1)");
    if (y[k] < 1 || y[k] > static_cast<int>(thresholds.item(k).size()) + 1)
      throw DomainError("ghk_tmvn: invalid response code for item " + std::to_string(k + 1));
  }
  const RowMatrix Lr = L;
  GhkResult res;
  res.z = Eigen::VectorXd::Zero(I);
  res.d = Eigen::VectorXd::Zero(I);
  std::vector<StepRecord> rec(static_cast<std::size_t>(I));
  res.log_density = ghk_forward(y.data(), mu.data(), Lr.data(), I, thresholds, u.data(), res.z.data(), rec.data());
  res.vanished = !std::isfinite(res.log_density);
  for (int k = 0; k < I; ++k) res.d[k] = rec[static_cast<std::size_t>(k)].d;
  return res;
}

double augmented_log_likelihood(const LatentStructure& structure, const ThresholdTable& thresholds,
                                std::span<const double> u, const DatasetMatrix& data) {
  const int N = data.n_rows();
  const int I = data.n_items();
  if (static_cast<int>(u.size()) != N * I) throw DimensionError("u must have N x I entries");
  if (thresholds.n_items() != I) throw DimensionError("threshold table does not match item count");
  if (N == 0) return 0.0;
  const Eigen::MatrixXd sigma = marginal_cov(structure.loadings, structure.factor_cov, structure.residual_var);
  const RowMatrix L = cholesky_lower(sigma);
  const double* mu = structure.intercepts.size() == I ? structure.intercepts.data() : nullptr;
  std::vector<double> z(static_cast<std::size_t>(I));
  double total = 0.0;
  for (int n = 0; n < N; ++n) {
    const double lp = ghk_forward(data.row(n).data(), mu, L.data(), I, thresholds,
                                  u.data() + static_cast<std::ptrdiff_t>(n) * I, z.data(), nullptr);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    total += lp;
  }
  return total;
}

double augmented_log_likelihood_grad(const RowMatrix& L, const ThresholdTable& thresholds,
                                     std::span<const double> u, const DatasetMatrix& data,
                                     RowMatrix* L_adj, std::span<double> tau_adj,
                                     std::span<double> u_adj) {
  const int N = data.n_rows();
  const int I = data.n_items();
  std::vector<double> z(static_cast<std::size_t>(I)), zbar(static_cast<std::size_t>(I));
  std::vector<StepRecord> rec(static_cast<std::size_t>(I));
  const bool grad = L_adj != nullptr;
  double total = 0.0;
  for (int n = 0; n < N; ++n) {
    const int* y = data.row(n).data();
    const double* un = u.data() + static_cast<std::ptrdiff_t>(n) * I;
    const double lp = ghk_forward(y, nullptr, L.data(), I, thresholds, un, z.data(), rec.data());
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    total += lp;
    if (!grad) continue;

    std::fill(zbar.begin(), zbar.end(), 0.0);
    double* ubar = u_adj.data() + static_cast<std::ptrdiff_t>(n) * I;
    for (int k = I - 1; k >= 0; --k) {
      const StepRecord& r = rec[static_cast<std::size_t>(k)];
      double lo_bar = -1.0 / r.d;
      double hi_bar = 1.0 / r.d;
      double u_bar = 0.0;
      if (zbar[static_cast<std::size_t>(k)] != 0.0) {
        const double nu_bar = zbar[static_cast<std::size_t>(k)] / norm_pdf(z[static_cast<std::size_t>(k)]);
        lo_bar += nu_bar * (1.0 - un[k]);
        hi_bar += nu_bar * un[k];
        u_bar = nu_bar * r.d;
      }
      ubar[k] = u_bar;
      const double alo_bar = r.has_lo ? lo_bar * norm_pdf(r.a_lo) : 0.0;
      const double ahi_bar = r.has_hi ? hi_bar * norm_pdf(r.a_hi) : 0.0;
      const int c = y[k] - 1;
      const int off = thresholds.offsets[static_cast<std::size_t>(k)];
      if (r.has_lo) tau_adj[static_cast<std::size_t>(off + c - 1)] += alo_bar / r.s;
      if (r.has_hi) tau_adj[static_cast<std::size_t>(off + c)] += ahi_bar / r.s;
      const double m_bar = -(alo_bar + ahi_bar) / r.s;
      const double s_bar = -(alo_bar * r.a_lo + ahi_bar * r.a_hi) / r.s;
      double* Ladj_k = L_adj->data() + static_cast<std::ptrdiff_t>(k) * I;
      const double* Lk = L.data() + static_cast<std::ptrdiff_t>(k) * I;
      Ladj_k[k] += s_bar;
      for (int j = 0; j < k; ++j) {
        Ladj_k[j] += m_bar * z[static_cast<std::size_t>(j)];
        zbar[static_cast<std::size_t>(j)] += m_bar * Lk[j];
      }
    }
  }
  return total;
}

std::vector<double> category_prob(std::span<const double> tau, double mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("category_prob: sigma must be positive");
  check_ordered(tau);
  const std::size_t C = tau.size() + 1;
  std::vector<double> p(C);
  double prev = 0.0, prev_c = 1.0, prev_a = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < C; ++c) {
    double cur = 1.0, cur_c = 0.0;
    if (c + 1 < C) {
      const double a = (tau[c] - mu) / sigma;
      cur = norm_cdf(a);
      cur_c = norm_ccdf(a);
    }
    p[c] = prev_a > 0.0 ? prev_c - cur_c : cur - prev;
    if (c + 1 < C) prev_a = (tau[c] - mu) / sigma;
    prev = cur;
    prev_c = cur_c;
  }
  return p;
}

}  // namespace ordfa
