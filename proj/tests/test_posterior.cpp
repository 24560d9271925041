#include "catch_amalgamated.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "ordfa/errors.hpp"
#include "ordfa/posterior.hpp"
#include "support.hpp"

using namespace ordfa;
using Catch::Matchers::WithinAbs;
using testing::PriorKind;

namespace {

std::vector<double> perturbed_start(const PosteriorModel& m, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(-scale, scale);
  auto x = m.initial_point();
  for (auto& v : x) v += ud(rng);
  return x;
}

}  // namespace

TEST_CASE("gradient matches finite differences under each threshold prior", "[posterior]") {
  const ModelSpec spec = testing::toy_spec(4, 2, 4);
  const DatasetMatrix data = testing::random_data(spec, 20, 3);
  for (auto kind : {PriorKind::Small, PriorKind::Joint, PriorKind::Large}) {
    const PosteriorModel m(spec, data, testing::make_priors(spec, kind));
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto x = perturbed_start(m, seed, 0.3);
      std::vector<double> g(m.dim());
      const double lp = m.log_density(x, g);
      REQUIRE(std::isfinite(lp));
      const auto f = [&](const std::vector<double>& y) { return m.log_density(y, {}); };
      INFO("prior kind " << static_cast<int>(kind) << " seed " << seed);
      CHECK(testing::max_gradient_error(f, x, g, 1e-6) < 1e-5);
    }
  }
}

TEST_CASE("free residual mode gradient", "[posterior]") {
  std::vector<ItemSpec> items;
  for (int i = 0; i < 4; ++i) items.push_back({"y" + std::to_string(i + 1), {0}, 3, i == 0});
  const ModelSpec spec(1, items, IdentificationRule{ResidualMode::Free, 1.0});
  const PosteriorModel m(spec, testing::random_data(spec, 15, 9), testing::make_priors(spec, PriorKind::Small));
  const auto x = perturbed_start(m, 4, 0.3);
  std::vector<double> g(m.dim());
  REQUIRE(std::isfinite(m.log_density(x, g)));
  const auto f = [&](const std::vector<double>& y) { return m.log_density(y, {}); };
  CHECK(testing::max_gradient_error(f, x, g, 1e-6) < 1e-5);
  const auto names = m.output_names();
  CHECK(std::find(names.begin(), names.end(), "theta.2") != names.end());
}

TEST_CASE("split value and gradient agree with the flat interface", "[posterior]") {
  const ModelSpec spec = testing::toy_spec(4, 2, 3);
  const PosteriorModel m(spec, testing::random_data(spec, 10, 1), testing::make_priors(spec, PriorKind::Joint));
  const auto x = perturbed_start(m, 8, 0.2);
  std::vector<double> g(m.dim());
  const double lp = m.log_density(x, g);
  const std::span<const double> xs(x);
  const auto [v, g2] = log_posterior_and_gradient(m, xs.first(m.n_structural()), xs.subspan(m.n_structural()));
  CHECK_THAT(v, WithinAbs(lp, 1e-10));
  REQUIRE(g2.size() == g.size());
  for (std::size_t k = 0; k < g.size(); ++k) CHECK_THAT(g2[k], WithinAbs(g[k], 1e-10));
}

TEST_CASE("pack inverts unpack", "[posterior]") {
  const ModelSpec spec = testing::toy_spec(6, 2, 4);
  for (auto kind : {PriorKind::Small, PriorKind::Joint}) {
    const PosteriorModel m(spec, testing::random_data(spec, 12, 2), testing::make_priors(spec, kind));
    const auto x = perturbed_start(m, 5, 0.4);
    const auto up = m.unpack(x);
    CHECK(up.structure.loadings(0, 0) == 1.0);
    CHECK(up.structure.loadings(3, 1) == 1.0);
    CHECK(up.structure.loadings(0, 1) == 0.0);
    const auto back = m.pack(up.structure, up.thresholds, up.u);
    REQUIRE(back.size() == x.size());
    for (std::size_t k = 0; k < x.size(); ++k) CHECK_THAT(back[k], WithinAbs(x[k], 1e-9));
  }
}

TEST_CASE("output names and values", "[posterior]") {
  const ModelSpec spec = testing::toy_spec(4, 2, 3);
  const PosteriorModel m(spec, testing::random_data(spec, 5, 1), testing::make_priors(spec, PriorKind::Joint));
  const auto names = m.output_names();
  const std::vector<std::string> expect{"lambda.2.1", "lambda.4.2", "phi.1.1", "phi.1.2", "phi.2.2",
                                        "tau.1.1", "tau.1.2", "tau.2.1", "tau.2.2", "tau.3.1",
                                        "tau.3.2", "tau.4.1", "tau.4.2"};
  CHECK(names == expect);
  const auto x = perturbed_start(m, 2, 0.3);
  const auto up = m.unpack(x);
  std::vector<double> out(names.size());
  m.write_output(x, out);
  CHECK_THAT(out[0], WithinAbs(up.structure.loadings(1, 0), 1e-14));
  CHECK_THAT(out[3], WithinAbs(up.structure.factor_cov(0, 1), 1e-14));
  CHECK_THAT(out[12], WithinAbs(up.thresholds.item(3)[1], 1e-14));
}

TEST_CASE("non-finite inputs give minus infinity", "[posterior]") {
  const ModelSpec spec = testing::toy_spec(4, 2, 3);
  const PosteriorModel m(spec, testing::random_data(spec, 5, 1), testing::make_priors(spec, PriorKind::Small));
  auto x = m.initial_point();
  x[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> g(m.dim());
  CHECK(m.log_density(x, g) == -std::numeric_limits<double>::infinity());
  x[0] = 1e308;
  CHECK_FALSE(std::isfinite(m.log_density(x, {})));
  CHECK_THROWS_AS(m.log_density(std::vector<double>(3, 0.0), {}), DimensionError);
}

TEST_CASE("constructor rejects mismatched priors", "[posterior]") {
  const ModelSpec spec = testing::toy_spec(4, 2, 3);
  const auto data = testing::random_data(spec, 5, 1);
  auto pc = testing::make_priors(spec, PriorKind::Joint);
  pc.thresholds.pop_back();
  CHECK_THROWS_AS(PosteriorModel(spec, data, pc), ConfigError);
  auto bad = testing::make_priors(spec, PriorKind::Joint);
  bad.thresholds[1] = InducedDirichletPrior{{1.0, 1.0}};
  CHECK_THROWS_WITH(PosteriorModel(spec, data, bad), Catch::Matchers::ContainsSubstring("item_2"));
}
