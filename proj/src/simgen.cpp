#include "ordfa/simgen.hpp"

#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "ordfa/errors.hpp"
#include "ordfa/normal.hpp"
#include "ordfa/posterior.hpp"

namespace ordfa {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

// Cumulative probability profile of the asymmetric shape, piecewise linear.
double asymmetric_profile(double x) {
  static constexpr std::array<double, 5> xs{0.0, 0.25, 0.5, 0.75, 1.0};
  static constexpr std::array<double, 5> ys{0.0, 0.05, 0.19, 0.43, 1.0};
  for (std::size_t k = 1; k < xs.size(); ++k)
    if (x <= xs[k]) return ys[k - 1] + (x - xs[k - 1]) / (xs[k] - xs[k - 1]) * (ys[k] - ys[k - 1]);
  return 1.0;
}

}  // namespace

const char* to_string(Shape shape) {
  switch (shape) {
    case Shape::Symmetric: return "symmetric";
    case Shape::Asymmetric: return "asymmetric";
    case Shape::Sparse: return "sparse";
  }
  return "?";
}

const char* to_string(ReferenceChoice ref) { return ref == ReferenceChoice::Sparse ? "sparse" : "non-sparse"; }

Shape parse_shape(const std::string& s) {
  if (s == "symmetric") return Shape::Symmetric;
  if (s == "asymmetric") return Shape::Asymmetric;
  if (s == "sparse") return Shape::Sparse;
  throw ConfigError("unknown distribution shape '" + s + "' (symmetric, asymmetric, sparse)");
}

ReferenceChoice parse_reference(const std::string& s) {
  if (s == "sparse") return ReferenceChoice::Sparse;
  if (s == "non-sparse" || s == "nonsparse") return ReferenceChoice::NonSparse;
  throw ConfigError("unknown reference choice '" + s + "' (sparse, non-sparse)");
}

void SimCondition::validate() const {
  if (n_categories < 2) throw ConfigError("n_categories must be at least 2");
  if (n < 1) throw ConfigError("sample size must be positive");
  if (n_factors < 1 || n_items < n_factors || n_items % n_factors != 0)
    throw ConfigError("n_items must be a positive multiple of n_factors");
  if (n_sparse_items < 0 || n_sparse_items > n_items) throw ConfigError("n_sparse_items must lie in [0, n_items]");
  if (n_sparse_items % n_factors != 0) throw ConfigError("n_sparse_items must split evenly over the factors");
  if (shape == Shape::Sparse && n_sparse_items == 0) throw ConfigError("sparse shape needs n_sparse_items > 0");
  if (shape != Shape::Sparse && n_sparse_items != 0) throw ConfigError("only the sparse shape has sparse items");
  if (shape == Shape::Sparse && n_categories < 3) throw ConfigError("sparse shape needs at least 3 categories");
  if (!(residual_var > 0.0)) throw ConfigError("residual variance must be positive");
  if (!(std::fabs(factor_corr) < 1.0)) throw ConfigError("factor correlation must lie in (-1, 1)");
}

std::vector<double> condition_thresholds(Shape shape, int n_categories) {
  if (n_categories < 2) throw ConfigError("need at least 2 categories");
  std::vector<double> tau(static_cast<std::size_t>(n_categories - 1));
  if (shape == Shape::Symmetric) {
    for (int c = 1; c < n_categories; ++c)
      tau[static_cast<std::size_t>(c - 1)] = kSqrt2 * norm_quantile(static_cast<double>(c) / n_categories);
    return tau;
  }
  if (shape == Shape::Sparse && n_categories < 3) throw ConfigError("sparse shape needs at least 3 categories");
  if (n_categories == 4) {
    tau = {-2.32, -1.25, -0.25};
  } else {
    for (int c = 1; c < n_categories; ++c)
      tau[static_cast<std::size_t>(c - 1)] =
          kSqrt2 * norm_quantile(asymmetric_profile(static_cast<double>(c) / n_categories));
  }
  if (shape == Shape::Sparse) tau[0] = kEmptyCategoryThreshold;
  return tau;
}

std::string threshold_rule_text(Shape shape, int n_categories) {
  std::ostringstream os;
  if (shape == Shape::Symmetric) {
    os << "symmetric: sqrt(2) * Phi^-1(c/C)";
  } else {
    if (n_categories == 4) os << "asymmetric: fixed [-2.32, -1.25, -0.25]";
    else os << "asymmetric: sqrt(2) * Phi^-1(G(c/C)), G piecewise linear through (0,0) (.25,.05) (.5,.19) (.75,.43) (1,1)";
    if (shape == Shape::Sparse) os << "; sparse items use tau_1 = " << kEmptyCategoryThreshold;
  }
  return os.str();
}

PopulationParams make_population(const SimCondition& cond) {
  cond.validate();
  const int I = cond.n_items;
  const int K = cond.n_factors;
  const int per = I / K;
  const int sparse_per = cond.n_sparse_items / K;
  PopulationParams pop;
  pop.structure.loadings = Eigen::MatrixXd::Zero(I, K);
  pop.structure.factor_cov = Eigen::MatrixXd::Constant(K, K, cond.factor_corr);
  pop.structure.factor_cov.diagonal().setOnes();
  pop.structure.residual_var = Eigen::VectorXd::Constant(I, cond.residual_var);
  pop.structure.intercepts = Eigen::VectorXd::Zero(I);
  const auto regular = condition_thresholds(cond.shape == Shape::Sparse ? Shape::Asymmetric : cond.shape, cond.n_categories);
  std::vector<double> sparse_tau = regular;
  sparse_tau[0] = kEmptyCategoryThreshold;
  for (int k = 0; k < K; ++k) {
    // Sparse items take the leading block positions when the reference is to be
    // sparse, otherwise they start after the first (reference) position.
    const bool ref_sparse = cond.reference == ReferenceChoice::Sparse || sparse_per == per;
    const int first_sparse = ref_sparse ? 0 : 1;
    for (int j = 0; j < per; ++j) {
      const int i = k * per + j;
      const bool sp = sparse_per > 0 && j >= first_sparse && j < first_sparse + sparse_per;
      pop.structure.loadings(i, k) = cond.loading;
      pop.sparse.push_back(sp);
      pop.item_factor.push_back(k);
      pop.thresholds.emplace_back(sp ? sparse_tau : regular);
    }
    pop.reference_items.push_back(k * per);
  }
  pop.threshold_rule = threshold_rule_text(cond.shape, cond.n_categories);
  return pop;
}

SimCondition study1_condition(std::uint64_t seed) {
  SimCondition c;
  c.shape = Shape::Sparse;
  c.n_categories = 4;
  c.n = 150;
  c.n_sparse_items = 2;
  c.reference = ReferenceChoice::NonSparse;
  c.seed = seed;
  return c;
}

DatasetMatrix generate_dataset(const PopulationParams& params, int n, std::uint64_t seed) {
  const auto& st = params.structure;
  const auto I = st.loadings.rows();
  const auto K = st.loadings.cols();
  const Eigen::MatrixXd Lphi = cholesky_lower(st.factor_cov);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> cats, resp;
  for (const auto& t : params.thresholds) cats.push_back(t.n_categories());
  resp.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(I));
  Eigen::VectorXd e(K), eta(K);
  for (int r = 0; r < n; ++r) {
    for (Eigen::Index k = 0; k < K; ++k) e[k] = normal(rng);
    eta = Lphi * e;
    for (Eigen::Index i = 0; i < I; ++i) {
      const double ystar =
          st.intercepts[i] + st.loadings.row(i).dot(eta) + std::sqrt(st.residual_var[i]) * normal(rng);
      const auto tau = params.thresholds[static_cast<std::size_t>(i)].values();
      int y = 1;
      for (double t : tau) y += ystar >= t ? 1 : 0;
      resp.push_back(y);
    }
  }
  return DatasetMatrix(cats, resp);
}

ModelSpec model_spec_for(const PopulationParams& params, IdentificationRule identification) {
  const int K = static_cast<int>(params.structure.loadings.cols());
  std::vector<ItemSpec> items;
  for (std::size_t i = 0; i < params.thresholds.size(); ++i) {
    ItemSpec it;
    it.id = "item_" + std::to_string(i + 1);
    it.factors = {params.item_factor[i]};
    it.n_categories = params.thresholds[i].n_categories();
    it.is_reference = params.reference_items[static_cast<std::size_t>(params.item_factor[i])] == static_cast<int>(i);
    items.push_back(std::move(it));
  }
  return ModelSpec(K, std::move(items), identification);
}

std::map<std::string, double> truth_values(const PopulationParams& params, const ModelSpec& spec) {
  std::map<std::string, double> t;
  const auto& st = params.structure;
  for (const auto& [i, k] : spec.free_loadings()) t[loading_name(i + 1, k + 1)] = st.loadings(i, k);
  for (int k = 0; k < spec.n_factors(); ++k)
    for (int l = k; l < spec.n_factors(); ++l) t[factor_cov_name(k + 1, l + 1)] = st.factor_cov(k, l);
  if (spec.identification().residuals == ResidualMode::Free)
    for (int i = 0; i < spec.n_items(); ++i) t[residual_name(i + 1)] = st.residual_var[i];
  for (int i = 0; i < spec.n_items(); ++i) {
    const auto& tau = params.thresholds[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < tau.size(); ++c) t[threshold_name(i + 1, static_cast<int>(c) + 1)] = tau[c];
  }
  return t;
}

}  // namespace ordfa
