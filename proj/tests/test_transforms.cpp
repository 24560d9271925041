#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "ordfa/errors.hpp"
#include "ordfa/transforms.hpp"

using namespace ordfa;
using Catch::Matchers::WithinAbs;

namespace {

TransformLayout all_kinds() {
  TransformLayout l;
  l.add("free", ConstraintKind::Unconstrained, 2);
  l.add("ord", ConstraintKind::Ordered, 4);
  l.add("unit", ConstraintKind::UnitInterval, 3);
  l.add("pos", ConstraintKind::Positive, 2);
  l.add("corr", ConstraintKind::CorrCholesky, 4);
  return l;
}

std::vector<double> forward_values(const TransformBlock& b, const std::vector<double>& w, double* logj = nullptr) {
  std::vector<double> out(b.constrained_dim());
  const double lj = transform::forward(b, w, out);
  if (logj) *logj = lj;
  return out;
}

// Free coordinates of the constrained value; for CorrCholesky the strict lower
// triangle of the correlation matrix L L'.
std::vector<double> free_coords(const TransformBlock& b, const std::vector<double>& v) {
  if (b.kind != ConstraintKind::CorrCholesky) return v;
  const auto K = static_cast<Eigen::Index>(b.order);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> L(v.data(), K, K);
  const Eigen::MatrixXd R = L * L.transpose();
  std::vector<double> out;
  for (Eigen::Index i = 1; i < K; ++i)
    for (Eigen::Index j = 0; j < i; ++j) out.push_back(R(i, j));
  return out;
}

}  // namespace

TEST_CASE("layout offsets are contiguous", "[transforms]") {
  const TransformLayout l = all_kinds();
  std::size_t off = 0;
  for (const auto& b : l.blocks()) {
    CHECK(b.offset == off);
    off += b.dim;
  }
  CHECK(l.total_dim() == off);
  CHECK(l.find("corr").dim == 6);
  CHECK(l.contains("pos"));
  CHECK_FALSE(l.contains("nope"));
}

TEST_CASE("block examples", "[transforms]") {
  TransformLayout l;
  l.add("ord", ConstraintKind::Ordered, 3);
  l.add("u", ConstraintKind::UnitInterval, 1);
  const auto r = to_constrained(std::vector<double>{0, 0, 0, 0}, l);
  CHECK(r.params.at("ord") == std::vector<double>{0, 1, 2});
  CHECK(r.params.at("u")[0] == 0.5);
  CHECK_THAT(r.log_jacobian, WithinAbs(std::log(0.25), 1e-15));
  CHECK_THROWS_AS(to_constrained(std::vector<double>{0, 0}, l), DimensionError);
}

TEST_CASE("round trip for every block kind", "[transforms]") {
  const TransformLayout l = all_kinds();
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(l.total_dim());
    for (auto& v : x) v = nd(rng);
    const auto c = to_constrained(x, l);
    const auto& ord = c.params.at("ord");
    for (std::size_t k = 1; k < ord.size(); ++k) CHECK(ord[k] > ord[k - 1]);
    for (double v : c.params.at("unit")) CHECK((v > 0.0 && v < 1.0));
    for (double v : c.params.at("pos")) CHECK(v > 0.0);
    const Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>> L(c.params.at("corr").data());
    const Eigen::Matrix4d R = L * L.transpose();
    CHECK((R.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
    const auto back = to_unconstrained(c.params, l);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK_THAT(back[k], WithinAbs(x[k], 1e-12));
  }
}

TEST_CASE("to_unconstrained names the offending block", "[transforms]") {
  TransformLayout l;
  l.add("tau.3", ConstraintKind::Ordered, 2);
  ConstrainedParams p{{"tau.3", {1.0, 0.5}}};
  CHECK_THROWS_WITH(to_unconstrained(p, l), Catch::Matchers::ContainsSubstring("tau.3"));
  TransformLayout u;
  u.add("u", ConstraintKind::UnitInterval, 1);
  CHECK_THROWS_AS(to_unconstrained(ConstrainedParams{{"u", {1.0}}}, u), DomainError);
}

TEST_CASE("log-Jacobians match finite-difference determinants", "[transforms]") {
  const TransformLayout l = all_kinds();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 0.8);
  for (const auto& b : l.blocks()) {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> w(b.dim);
      for (auto& v : w) v = nd(rng);
      double logj = 0.0;
      forward_values(b, w, &logj);
      const auto n = static_cast<Eigen::Index>(b.dim);
      Eigen::MatrixXd J(n, n);
      const double h = 1e-6;
      for (std::size_t j = 0; j < b.dim; ++j) {
        auto wp = w, wm = w;
        wp[j] += h;
        wm[j] -= h;
        const auto fp = free_coords(b, forward_values(b, wp));
        const auto fm = free_coords(b, forward_values(b, wm));
        for (std::size_t i = 0; i < b.dim; ++i)
          J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - fm[i]) / (2 * h);
      }
      INFO("block " << b.name);
      CHECK_THAT(logj, WithinAbs(std::log(std::abs(J.determinant())), 1e-6));
    }
  }
}

TEST_CASE("reverse pass is J' a plus the log-Jacobian gradient", "[transforms]") {
  const TransformLayout l = all_kinds();
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(0.0, 0.8);
  for (const auto& b : l.blocks()) {
    std::vector<double> w(b.dim), a(b.constrained_dim());
    for (auto& v : w) v = nd(rng);
    for (auto& v : a) v = nd(rng);
    auto objective = [&](const std::vector<double>& x) {
      double lj = 0.0;
      const auto out = forward_values(b, x, &lj);
      double s = lj;
      for (std::size_t k = 0; k < out.size(); ++k) s += a[k] * out[k];
      return s;
    };
    const auto out = forward_values(b, w);
    std::vector<double> g(b.dim, 0.0);
    transform::reverse(b, w, out, a, g);
    for (std::size_t j = 0; j < b.dim; ++j) {
      auto wp = w, wm = w;
      wp[j] += 1e-6;
      wm[j] -= 1e-6;
      INFO("block " << b.name << " coordinate " << j);
      CHECK_THAT(g[j], WithinAbs((objective(wp) - objective(wm)) / 2e-6, 1e-6));
    }
  }
}
