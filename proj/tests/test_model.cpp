#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ordfa/errors.hpp"
#include "ordfa/model.hpp"
#include "ordfa/normal.hpp"
#include "support.hpp"

using namespace ordfa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Eigen::MatrixXd study1_sigma() {
  Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(12, 2);
  lam.block(0, 0, 6, 1).setOnes();
  lam.block(6, 1, 6, 1).setOnes();
  Eigen::MatrixXd phi(2, 2);
  phi << 1.0, 0.23, 0.23, 1.0;
  return marginal_cov(lam, phi, Eigen::VectorXd::Ones(12));
}

// P(X1 in (a1, b1), X2 in (a2, b2)) for a standard bivariate normal with
// correlation rho: integrate the conditional probability of X2 over x1.
double rectangle_prob(double a1, double b1, double a2, double b2, double rho) {
  const int n = 200000;
  const double lo = std::max(a1, -9.0), hi = std::min(b1, 9.0);
  const double h = (hi - lo) / n;
  const double s = std::sqrt(1 - rho * rho);
  double total = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double x = lo + k * h;
    const double w = (k == 0 || k == n) ? 0.5 : 1.0;
    const double cond = norm_cdf((b2 - rho * x) / s) - norm_cdf((a2 - rho * x) / s);
    total += w * norm_pdf(x) * cond;
  }
  return total * h;
}

}  // namespace

TEST_CASE("ModelSpec validates its structure", "[model]") {
  CHECK_THROWS_AS(ModelSpec(0, {{"a", {0}, 3, true}}), ConfigError);
  CHECK_THROWS_AS(ModelSpec(1, {{"a", {0}, 1, true}}), ConfigError);
  CHECK_THROWS_AS(ModelSpec(1, {{"a", {}, 3, false}}), ConfigError);
  CHECK_THROWS_AS(ModelSpec(1, {{"a", {1}, 3, true}}), ConfigError);
  CHECK_THROWS_AS(ModelSpec(1, {{"a", {0}, 3, true}, {"a", {0}, 3, false}}), ConfigError);
  // every factor needs exactly one reference
  CHECK_THROWS_AS(ModelSpec(2, {{"a", {0}, 3, true}, {"b", {1}, 3, false}}), ConfigError);
  CHECK_THROWS_AS(ModelSpec(1, {{"a", {0}, 3, true}, {"b", {0}, 3, true}}), ConfigError);

  const ModelSpec s = testing::toy_spec(6, 2, 4);
  CHECK(s.n_items() == 6);
  CHECK(s.total_thresholds() == 18);
  CHECK(s.free_loadings().size() == 4);
  CHECK(s.reference_item(0) == 0);
  CHECK(s.reference_item(1) == 3);
  CHECK(s.loads_on(4, 1));
  CHECK_FALSE(s.loads_on(4, 0));
}

TEST_CASE("marginal_cov arithmetic", "[model]") {
  Eigen::MatrixXd lam(2, 1);
  lam << 1, 1;
  const Eigen::MatrixXd s = marginal_cov(lam, Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Ones(2));
  CHECK(s(0, 0) == 2.0);
  CHECK(s(1, 1) == 2.0);
  CHECK(s(0, 1) == 1.0);
  CHECK(s(1, 0) == 1.0);

  Eigen::VectorXd theta(3);
  theta << 0.51, 0.7, 1.3;
  const Eigen::MatrixXd z = marginal_cov(Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Identity(2, 2), theta);
  CHECK((z - Eigen::MatrixXd(theta.asDiagonal())).norm() == 0.0);

  CHECK_THROWS_AS(marginal_cov(lam, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2)), DimensionError);
  CHECK_THROWS_AS(marginal_cov(lam, Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(2)), DomainError);
}

TEST_CASE("Study 1 implied covariance against a brute-force triple product", "[model]") {
  const Eigen::MatrixXd s = study1_sigma();
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      const int fi = i / 6, fj = j / 6;
      double want = (i == j) ? 2.0 : (fi == fj ? 1.0 : 0.23);
      // explicit sum_k sum_l lambda_ik phi_kl lambda_jl
      double brute = 0.0;
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) brute += (fi == k) * (k == l ? 1.0 : 0.23) * (fj == l);
      if (i == j) brute += 1.0;
      CHECK_THAT(s(i, j), WithinAbs(want, 1e-15));
      CHECK_THAT(s(i, j), WithinAbs(brute, 1e-15));
    }
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("cholesky_lower recomposes and reports the failing pivot", "[model]") {
  CHECK((cholesky_lower(Eigen::MatrixXd::Identity(4, 4)) - Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
  Eigen::MatrixXd a(2, 2);
  a << 2, 1, 1, 2;
  const Eigen::MatrixXd L = cholesky_lower(a);
  CHECK_THAT(L(0, 0), WithinAbs(1.41421356, 1e-8));
  CHECK_THAT(L(1, 0), WithinAbs(0.70710678, 1e-8));
  CHECK_THAT(L(1, 1), WithinAbs(1.22474487, 1e-8));
  CHECK(L(0, 1) == 0.0);

  const Eigen::MatrixXd s = study1_sigma();
  const Eigen::MatrixXd Ls = cholesky_lower(s);
  CHECK((Ls * Ls.transpose() - s).cwiseAbs().maxCoeff() / s.cwiseAbs().maxCoeff() < 1e-10);

  Eigen::MatrixXd bad(3, 3);
  bad << 1, 0, 0, 0, 1, 2, 0, 2, 1;
  try {
    cholesky_lower(bad);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.index() == 2);
  }
}

TEST_CASE("cholesky adjoint matches finite differences", "[model]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const int n = 5;
  Eigen::MatrixXd A(n, n);
  for (auto& v : A.reshaped()) v = nd(rng);
  const Eigen::MatrixXd S = A * A.transpose() + n * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd W(n, n);
  for (auto& v : W.reshaped()) v = nd(rng);
  W = W.triangularView<Eigen::Lower>();
  // f(S) = sum(W .* chol(S)); perturb symmetric pairs together
  auto f = [&](const Eigen::MatrixXd& m) { return (W.array() * cholesky_lower(m).array()).sum(); };
  const Eigen::MatrixXd g = cholesky_lower_adjoint(cholesky_lower(S), W);
  const double h = 1e-6;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      Eigen::MatrixXd sp = S, sm = S;
      sp(i, j) += h;
      sm(i, j) -= h;
      if (i != j) {
        sp(j, i) += h;
        sm(j, i) -= h;
      }
      const double fd = (f(sp) - f(sm)) / (2 * h);
      CHECK_THAT(g(i, j), WithinAbs(fd, 1e-7));
    }
}

TEST_CASE("ghk_tmvn single-item hand traces", "[model][ghk]") {
  const ThresholdTable thr(std::vector<ThresholdVector>{ThresholdVector({0.0})});
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(1, 1);
  const std::vector<double> u{0.5};
  const std::vector<int> bottom{1}, top{2};
  const GhkResult b = ghk_tmvn(bottom, mu, L, thr, u);
  CHECK_THAT(b.d[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(b.z[0], WithinAbs(-0.6744897501960817, 1e-12));
  CHECK_THAT(b.log_density, WithinAbs(std::log(0.5), 1e-15));
  const GhkResult t = ghk_tmvn(top, mu, L, thr, u);
  CHECK_THAT(t.d[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(t.z[0], WithinAbs(0.6744897501960817, 1e-12));
}

TEST_CASE("ghk_tmvn interior category and input checks", "[model][ghk]") {
  const ThresholdTable thr(std::vector<ThresholdVector>{ThresholdVector({-1.0, 0.5})});
  Eigen::VectorXd mu(1);
  mu << 0.2;
  Eigen::MatrixXd L(1, 1);
  L << 1.5;
  const std::vector<int> y{2};
  const std::vector<double> u{0.3};
  const GhkResult r = ghk_tmvn(y, mu, L, thr, u);
  const double lo = norm_cdf((-1.0 - 0.2) / 1.5), hi = norm_cdf((0.5 - 0.2) / 1.5);
  CHECK_THAT(r.d[0], WithinRel(hi - lo, 1e-13));
  CHECK_THAT(r.z[0], WithinAbs(norm_quantile(lo + 0.3 * (hi - lo)), 1e-12));

  const std::vector<double> bad_u{1.0};
  CHECK_THROWS_AS(ghk_tmvn(y, mu, L, thr, bad_u), DomainError);
  const std::vector<int> bad_y{4};
  CHECK_THROWS_AS(ghk_tmvn(bad_y, mu, L, thr, u), DomainError);
}

TEST_CASE("ghk_tmvn flags a vanished interval instead of aborting", "[model][ghk]") {
  const ThresholdTable thr(std::vector<ThresholdVector>{ThresholdVector({-60.0, 0.0})});
  const std::vector<int> y{1};
  const std::vector<double> u{0.5};
  const GhkResult r = ghk_tmvn(y, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), thr, u);
  CHECK(r.vanished);
  CHECK(r.log_density == -std::numeric_limits<double>::infinity());
}

TEST_CASE("ghk_tmvn with identity L gives truncated-normal scores (KS)", "[model][ghk]") {
  // Bottom category below b = 0.4: z ~ N(0,1) truncated to (-inf, 0.4).
  const double b = 0.4;
  const ThresholdTable thr(std::vector<ThresholdVector>{ThresholdVector({b}), ThresholdVector({-0.3, 0.9})});
  const std::vector<int> y{1, 2};
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(2, 2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = 100000;
  std::vector<double> z0, z1;
  for (int k = 0; k < n; ++k) {
    const std::vector<double> u{unif(rng), unif(rng)};
    const GhkResult r = ghk_tmvn(y, mu, L, thr, u);
    z0.push_back(r.z[0]);
    z1.push_back(r.z[1]);
  }
  auto ks = [&](std::vector<double> v, double lo, double hi) {
    std::sort(v.begin(), v.end());
    const double plo = norm_cdf(lo), mass = norm_cdf(hi) - plo;
    double dmax = 0.0;
    for (int k = 0; k < n; ++k) {
      const double F = (norm_cdf(v[static_cast<std::size_t>(k)]) - plo) / mass;
      dmax = std::max({dmax, std::abs(F - double(k) / n), std::abs(F - double(k + 1) / n)});
    }
    return dmax;
  };
  const double critical = 1.63 / std::sqrt(double(n));  // 1% level
  CHECK(ks(z0, -40.0, b) < critical);
  CHECK(ks(z1, -0.3, 0.9) < critical);
}

TEST_CASE("GHK average of d products matches 2-D quadrature", "[model][ghk]") {
  const double rho = 0.6;
  Eigen::MatrixXd S(2, 2);
  S << 1, rho, rho, 1;
  const Eigen::MatrixXd L = cholesky_lower(S);
  const ThresholdTable thr(std::vector<ThresholdVector>{ThresholdVector({-0.2, 0.7}), ThresholdVector({0.3})});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (auto [y1, y2] : {std::pair{1, 2}, std::pair{2, 1}, std::pair{3, 2}}) {
    const std::vector<int> y{y1, y2};
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < n; ++k) {
      const std::vector<double> u{unif(rng), unif(rng)};
      const double p = std::exp(ghk_tmvn(y, Eigen::VectorXd::Zero(2), L, thr, u).log_density);
      sum += p;
      sum2 += p * p;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    const double lim1[] = {-1e9, -0.2, 0.7, 1e9}, lim2[] = {-1e9, 0.3, 1e9};
    const double exact = rectangle_prob(lim1[y1 - 1], lim1[y1], lim2[y2 - 1], lim2[y2], rho);
    CHECK_THAT(mean, WithinAbs(exact, 1e-3));
    CHECK(std::abs(mean - exact) < 3 * se + 1e-6);
  }
}

TEST_CASE("augmented likelihood is an unbiased probit likelihood", "[model][ghk]") {
  // N = 1 single standard normal item, y = 1, tau = 0: mean of exp(loglik) is 1/2.
  LatentStructure st{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Ones(1),
                     Eigen::VectorXd::Zero(1)};
  const ThresholdTable thr(std::vector<ThresholdVector>{ThresholdVector({0.0})});
  const DatasetMatrix one({2}, {1});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double s = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::vector<double> u{unif(rng)};
    s += std::exp(augmented_log_likelihood(st, thr, u, one));
  }
  CHECK_THAT(s / 1000, WithinAbs(0.5, 1e-12));

  // zero loadings: each row's d equals the univariate category probability
  LatentStructure z{Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(2, 2.0),
                    Eigen::VectorXd::Zero(2)};
  const ThresholdTable t2(std::vector<ThresholdVector>{ThresholdVector({-2.32, -1.25, -0.25}),
                                                       ThresholdVector({-15.0, -1.25, -0.25})});
  const DatasetMatrix d2({4, 4}, {3, 2});
  const std::vector<double> u2{0.37, 0.81};
  const auto p1 = category_prob(t2.item(0), 0.0, std::sqrt(2.0));
  const auto p2 = category_prob(t2.item(1), 0.0, std::sqrt(2.0));
  CHECK_THAT(augmented_log_likelihood(z, t2, u2, d2), WithinAbs(std::log(p1[2]) + std::log(p2[1]), 1e-12));

  const DatasetMatrix empty({4, 4}, {});
  CHECK(augmented_log_likelihood(z, t2, {}, empty) == 0.0);
}

TEST_CASE("category_prob", "[model]") {
  const auto half = category_prob(std::vector<double>{0.0}, 0.0, 1.0);
  CHECK_THAT(half[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(half[1], WithinAbs(0.5, 1e-15));

  const auto asym = category_prob(std::vector<double>{-2.32, -1.25, -0.25}, 0.0, std::sqrt(2.0));
  const double want[] = {0.05, 0.14, 0.24, 0.57};
  for (int c = 0; c < 4; ++c) CHECK_THAT(asym[static_cast<std::size_t>(c)], WithinAbs(want[c], 0.005));

  const auto sparse = category_prob(std::vector<double>{-15.0, -1.25, -0.25}, 0.0, std::sqrt(2.0));
  const double want_s[] = {0.0, 0.19, 0.24, 0.57};
  for (int c = 0; c < 4; ++c) CHECK_THAT(sparse[static_cast<std::size_t>(c)], WithinAbs(want_s[c], 0.005));

  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> tau(5);
    for (auto& t : tau) t = nd(rng);
    std::sort(tau.begin(), tau.end());
    const auto p = category_prob(tau, nd(rng), 0.3 + std::abs(nd(rng)));
    double s = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK_THAT(s, WithinAbs(1.0, 1e-12));
  }
  CHECK_THROWS_AS(category_prob(std::vector<double>{0.5, 0.1}, 0.0, 1.0), OrderingError);
  CHECK_THROWS_AS(ThresholdVector({0.0, 0.0}), OrderingError);
}

TEST_CASE("DatasetMatrix counts and validation", "[model]") {
  const DatasetMatrix d({3, 2}, {1, 2, 3, 2, 3, 1});
  CHECK(d.n_rows() == 3);
  CHECK(d.category_counts()[0] == std::vector<int>{1, 0, 2});
  CHECK(d.category_counts()[1] == std::vector<int>{1, 2});
  CHECK_THROWS_AS(DatasetMatrix({3, 2}, {1, 3}), DataError);
  CHECK_THROWS_AS(DatasetMatrix({3, 2}, {0, 1}), DataError);
  const std::vector<int> rows{2, 0};
  const DatasetMatrix s = d.select_rows(rows);
  CHECK(s(0, 0) == 3);
  CHECK(s(1, 1) == 2);
}
