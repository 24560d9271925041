#include "catch_amalgamated.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "ordfa/errors.hpp"
#include "ordfa/simgen.hpp"

using namespace ordfa;
using Catch::Matchers::WithinAbs;

namespace {

double phi_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }

double kendall_tau(const DatasetMatrix& d, int a, int b) {
  double conc = 0.0, disc = 0.0;
  for (int r = 0; r < d.n_rows(); ++r)
    for (int s = r + 1; s < d.n_rows(); ++s) {
      const int x = (d(r, a) - d(s, a)) * (d(r, b) - d(s, b));
      conc += x > 0 ? 1.0 : 0.0;
      disc += x < 0 ? 1.0 : 0.0;
    }
  return (conc - disc) / (conc + disc);
}

}  // namespace

TEST_CASE("condition thresholds", "[simgen]") {
  const auto sym = condition_thresholds(Shape::Symmetric, 4);
  CHECK_THAT(sym[0], WithinAbs(-0.9538726, 1e-6));
  CHECK_THAT(sym[1], WithinAbs(0.0, 1e-12));
  CHECK_THAT(sym[2], WithinAbs(0.9538726, 1e-6));
  CHECK(condition_thresholds(Shape::Asymmetric, 4) == std::vector<double>{-2.32, -1.25, -0.25});
  const auto sp = condition_thresholds(Shape::Sparse, 4);
  CHECK(sp == std::vector<double>{kEmptyCategoryThreshold, -1.25, -0.25});
  for (int C : {2, 3, 5, 7}) {
    const auto t = condition_thresholds(Shape::Asymmetric, C);
    REQUIRE(t.size() == static_cast<std::size_t>(C - 1));
    for (std::size_t c = 1; c < t.size(); ++c) CHECK(t[c] > t[c - 1]);
  }
  CHECK_THROWS_AS(condition_thresholds(Shape::Sparse, 2), ConfigError);
}

TEST_CASE("study 1 layout", "[simgen]") {
  const auto cond = study1_condition(1);
  const auto pop = make_population(cond);
  REQUIRE(pop.sparse.size() == 12);
  for (int i = 0; i < 12; ++i) CHECK(pop.sparse[static_cast<std::size_t>(i)] == (i == 1 || i == 7));
  CHECK(pop.reference_items == std::vector<int>{0, 6});
  CHECK(pop.item_factor[5] == 0);
  CHECK(pop.item_factor[6] == 1);
  CHECK_THAT(pop.structure.factor_cov(0, 1), WithinAbs(0.23, 1e-15));

  SimCondition sparse_ref = cond;
  sparse_ref.reference = ReferenceChoice::Sparse;
  const auto p2 = make_population(sparse_ref);
  CHECK(p2.sparse[0]);
  CHECK(p2.sparse[6]);
  CHECK_FALSE(p2.sparse[1]);
}

TEST_CASE("sparse items never use their first category", "[simgen]") {
  const auto pop = make_population(study1_condition(3));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = generate_dataset(pop, 150, seed);
    CHECK(d.category_counts()[1][0] == 0);
    CHECK(d.category_counts()[7][0] == 0);
    CHECK(d.declared_categories()[1] == 4);
  }
}

TEST_CASE("marginal proportions follow the thresholds", "[simgen]") {
  SimCondition c;
  c.shape = Shape::Asymmetric;
  c.n = 20000;
  const auto pop = make_population(c);
  const auto d = generate_dataset(pop, c.n, 99);
  const auto tau = pop.thresholds[0].values();
  // Latent variance 1^2 * 1 + 1 = 2.
  std::vector<double> cum{0.0};
  for (double t : tau) cum.push_back(phi_cdf(t / std::sqrt(2.0)));
  cum.push_back(1.0);
  for (int i = 0; i < 12; ++i)
    for (int k = 0; k < 4; ++k) {
      const double p = cum[static_cast<std::size_t>(k + 1)] - cum[static_cast<std::size_t>(k)];
      const double se = std::sqrt(p * (1 - p) / c.n);
      const double obs = d.category_counts()[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] / double(c.n);
      INFO("item " << i + 1 << " category " << k + 1);
      CHECK(std::abs(obs - p) < 3.5 * se);
    }
}

TEST_CASE("generation is deterministic per seed", "[simgen]") {
  const auto pop = make_population(study1_condition(1));
  CHECK(generate_dataset(pop, 50, 4).responses() == generate_dataset(pop, 50, 4).responses());
  CHECK(generate_dataset(pop, 50, 4).responses() != generate_dataset(pop, 50, 5).responses());
}

TEST_CASE("items sharing a factor are positively associated", "[simgen]") {
  SimCondition c;
  c.shape = Shape::Symmetric;
  const auto pop = make_population(c);
  const auto d = generate_dataset(pop, 400, 8);
  CHECK(kendall_tau(d, 0, 1) > 0.2);
  CHECK(kendall_tau(d, 6, 7) > 0.2);
  CHECK(kendall_tau(d, 0, 6) > 0.0);
}

TEST_CASE("model spec and truth bookkeeping", "[simgen]") {
  const auto pop = make_population(study1_condition(1));
  const auto spec = model_spec_for(pop);
  CHECK(spec.reference_item(0) == 0);
  CHECK(spec.reference_item(1) == 6);
  const auto t = truth_values(pop, spec);
  CHECK(t.at("lambda.2.1") == 1.0);
  CHECK(t.at("phi.1.2") == 0.23);
  CHECK(t.at("tau.2.1") == kEmptyCategoryThreshold);
  CHECK(t.at("tau.3.3") == -0.25);
  CHECK(t.count("lambda.1.1") == 0);
  CHECK(t.count("theta.1") == 0);
  CHECK(truth_values(pop, model_spec_for(pop, {ResidualMode::Free, 1.0})).at("theta.4") == 1.0);
}

TEST_CASE("condition validation", "[simgen]") {
  SimCondition c;
  c.n_sparse_items = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.shape = Shape::Sparse;
  c.n_sparse_items = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_shape("sparse") == Shape::Sparse);
  CHECK(parse_reference("non-sparse") == ReferenceChoice::NonSparse);
  CHECK_THROWS_AS(parse_shape("flat"), ConfigError);
}
