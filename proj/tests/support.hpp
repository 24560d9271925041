#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ordfa/posterior.hpp"

namespace testing {

enum class PriorKind { Small, Joint, Large };

inline ordfa::PriorConfig make_priors(const ordfa::ModelSpec& spec, PriorKind kind) {
  ordfa::PriorConfig pc;
  for (int i = 0; i < spec.n_items(); ++i) {
    const auto T = static_cast<std::size_t>(spec.n_thresholds(i));
    if (kind == PriorKind::Joint) pc.thresholds.emplace_back(ordfa::InducedDirichletPrior{std::vector<double>(T + 1, 1.0)});
    else pc.thresholds.emplace_back(ordfa::SequentialThresholdPrior::uniform(T, 0.0, kind == PriorKind::Small ? 1.5 : 1e5));
  }
  return pc;
}

/// Items split evenly over K factors, first item of each block is the reference.
inline ordfa::ModelSpec toy_spec(int n_items, int n_factors, int n_categories) {
  std::vector<ordfa::ItemSpec> items;
  const int per = n_items / n_factors;
  for (int i = 0; i < n_items; ++i) {
    const int k = std::min(i / per, n_factors - 1);
    items.push_back({"item_" + std::to_string(i + 1), {k}, n_categories, i == k * per});
  }
  return ordfa::ModelSpec(n_factors, items);
}

inline ordfa::DatasetMatrix random_data(const ordfa::ModelSpec& spec, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> resp;
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < spec.n_items(); ++i)
      resp.push_back(std::uniform_int_distribution<int>(1, spec.item(i).n_categories)(rng));
  return ordfa::DatasetMatrix(spec.category_counts(), resp);
}

/// Largest |fd - g| / max(1, |fd|) over all coordinates, central differences.
template <class F>
double max_gradient_error(F&& f, const std::vector<double>& x, const std::vector<double>& grad, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (f(xp) - f(xm)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - grad[j]) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace testing
