#include "ordfa/posterior.hpp"

#include <cmath>
#include <limits>
#include <variant>

#include "ordfa/errors.hpp"
#include "ordfa/normal.hpp"

namespace ordfa {

std::string loading_name(int item, int factor) {
  return "lambda." + std::to_string(item) + "." + std::to_string(factor);
}
std::string factor_cov_name(int k, int l) { return "phi." + std::to_string(k) + "." + std::to_string(l); }
std::string residual_name(int item) { return "theta." + std::to_string(item); }
std::string threshold_name(int item, int c) { return "tau." + std::to_string(item) + "." + std::to_string(c); }

namespace {

std::string tau_block(int i) { return "tau." + std::to_string(i + 1); }

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Gradient of tau = seq_transform(tau_star) pulled back to tau_star.
void seq_transform_reverse(std::span<const double> tau_star, std::span<const double> tau_adj,
                           std::span<double> star_adj) {
  double tail = 0.0;
  for (std::size_t c = tau_star.size(); c-- > 0;) {
    tail += tau_adj[c];
    star_adj[c] += c == 0 ? tail : tail * std::exp(tau_star[c]);
  }
}

}  // namespace

PosteriorModel::PosteriorModel(ModelSpec spec, DatasetMatrix data, PriorConfig priors)
    : spec_(std::move(spec)), data_(std::move(data)), priors_(std::move(priors)) {
  const int I = spec_.n_items();
  const int K = spec_.n_factors();
  if (data_.n_items() != I) throw DimensionError("dataset has " + std::to_string(data_.n_items()) +
                                                 " items, model has " + std::to_string(I));
  for (int i = 0; i < I; ++i)
    if (data_.declared_categories()[static_cast<std::size_t>(i)] != spec_.item(i).n_categories)
      throw ConfigError("declared categories of item '" + spec_.item(i).id + "' differ between data and model");
  if (static_cast<int>(priors_.thresholds.size()) != I)
    throw ConfigError("need one threshold prior per item");
  for (int i = 0; i < I; ++i) {
    const std::size_t T = static_cast<std::size_t>(spec_.n_thresholds(i));
    const auto& tp = priors_.thresholds[static_cast<std::size_t>(i)];
    if (const auto* s = std::get_if<SequentialThresholdPrior>(&tp)) {
      if (s->mu_star.size() != T || s->dispersion.size() != T)
        throw ConfigError("sequential prior of item '" + spec_.item(i).id + "' needs " + std::to_string(T) + " entries");
      for (std::size_t c = 0; c < T; ++c)
        if (!(s->dispersion[c] > 0)) throw ConfigError("sequential prior dispersion must be positive");
    } else if (const auto* d = std::get_if<InducedDirichletPrior>(&tp)) {
      if (d->alpha.size() != T + 1)
        throw ConfigError("Dirichlet prior of item '" + spec_.item(i).id + "' needs " + std::to_string(T + 1) + " weights");
      for (double a : d->alpha)
        if (!(a > 0)) throw ConfigError("Dirichlet weights must be positive");
    }
  }
  const auto& sp = priors_.structural;
  if (!(sp.loading_scale > 0 && sp.lkj_eta > 0 && sp.factor_sd_scale > 0 && sp.residual_sd_scale > 0))
    throw ConfigError("structural prior scales must be positive");

  layout_.add("lambda", ConstraintKind::Unconstrained, spec_.free_loadings().size());
  layout_.add("factor_sd", ConstraintKind::Positive, static_cast<std::size_t>(K));
  if (K > 1) layout_.add("factor_corr", ConstraintKind::CorrCholesky, static_cast<std::size_t>(K));
  if (spec_.identification().residuals == ResidualMode::Free)
    layout_.add("resid_sd", ConstraintKind::Positive, static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i)
    layout_.add(tau_block(i), is_sequential(i) ? ConstraintKind::Unconstrained : ConstraintKind::Ordered,
                static_cast<std::size_t>(spec_.n_thresholds(i)));
  layout_.add("u", ConstraintKind::UnitInterval, static_cast<std::size_t>(data_.n_rows()) * static_cast<std::size_t>(I));

  for (const auto& [i, k] : spec_.free_loadings()) output_names_.push_back(loading_name(i + 1, k + 1));
  for (int k = 0; k < K; ++k)
    for (int l = k; l < K; ++l) output_names_.push_back(factor_cov_name(k + 1, l + 1));
  if (spec_.identification().residuals == ResidualMode::Free)
    for (int i = 0; i < I; ++i) output_names_.push_back(residual_name(i + 1));
  for (int i = 0; i < I; ++i)
    for (int c = 0; c < spec_.n_thresholds(i); ++c) output_names_.push_back(threshold_name(i + 1, c + 1));
}

bool PosteriorModel::is_sequential(int item) const {
  return std::holds_alternative<SequentialThresholdPrior>(priors_.thresholds[static_cast<std::size_t>(item)]);
}

PosteriorModel::Unpacked PosteriorModel::unpack(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("parameter vector has wrong length");
  const int I = spec_.n_items();
  const int K = spec_.n_factors();
  Unpacked out;
  auto& st = out.structure;
  st.loadings = Eigen::MatrixXd::Zero(I, K);
  for (int k = 0; k < K; ++k) st.loadings(spec_.reference_item(k), k) = 1.0;
  const auto& lb = layout_.find("lambda");
  for (std::size_t j = 0; j < spec_.free_loadings().size(); ++j) {
    const auto [i, k] = spec_.free_loadings()[j];
    st.loadings(i, k) = x[lb.offset + j];
  }
  Eigen::VectorXd sd(K);
  const auto& sb = layout_.find("factor_sd");
  for (int k = 0; k < K; ++k) sd[k] = std::exp(x[sb.offset + static_cast<std::size_t>(k)]);
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(K, K);
  if (K > 1) {
    const auto& cb = layout_.find("factor_corr");
    std::vector<double> Lr(static_cast<std::size_t>(K * K));
    transform::forward(cb, x.subspan(cb.offset, cb.dim), Lr);
    const Eigen::Map<const RowMatrix> Lm(Lr.data(), K, K);
    R = Lm * Lm.transpose();
  }
  st.factor_cov = sd.asDiagonal() * R * sd.asDiagonal();
  if (spec_.identification().residuals == ResidualMode::Free) {
    const auto& rb = layout_.find("resid_sd");
    st.residual_var.resize(I);
    for (int i = 0; i < I; ++i) st.residual_var[i] = std::exp(2.0 * x[rb.offset + static_cast<std::size_t>(i)]);
  } else {
    st.residual_var = Eigen::VectorXd::Constant(I, spec_.identification().fixed_residual_variance);
  }
  st.intercepts = Eigen::VectorXd::Zero(I);
  out.thresholds = ThresholdTable(spec_.category_counts());
  for (int i = 0; i < I; ++i) {
    const auto& tb = layout_.find(tau_block(i));
    const auto w = x.subspan(tb.offset, tb.dim);
    auto dst = out.thresholds.item(i);
    if (is_sequential(i)) {
      const auto t = seq_transform(w);
      std::copy(t.begin(), t.end(), dst.begin());
    } else {
      transform::forward(tb, w, dst);
    }
  }
  const auto& ub = layout_.find("u");
  out.u.resize(ub.dim);
  transform::forward(ub, x.subspan(ub.offset, ub.dim), out.u);
  return out;
}

std::vector<double> PosteriorModel::pack(const LatentStructure& structure, const ThresholdTable& thresholds,
                                         std::span<const double> u) const {
  const int I = spec_.n_items();
  const int K = spec_.n_factors();
  std::vector<double> x(dim());
  std::span<double> xs(x);
  const auto& lb = layout_.find("lambda");
  for (std::size_t j = 0; j < spec_.free_loadings().size(); ++j) {
    const auto [i, k] = spec_.free_loadings()[j];
    x[lb.offset + j] = structure.loadings(i, k);
  }
  const Eigen::VectorXd sd = structure.factor_cov.diagonal().array().sqrt();
  const auto& sb = layout_.find("factor_sd");
  for (int k = 0; k < K; ++k) {
    if (!(sd[k] > 0)) throw DomainError("factor variances must be positive");
    x[sb.offset + static_cast<std::size_t>(k)] = std::log(sd[k]);
  }
  if (K > 1) {
    const Eigen::MatrixXd R = sd.cwiseInverse().asDiagonal() * structure.factor_cov * sd.cwiseInverse().asDiagonal();
    const RowMatrix Lr = cholesky_lower(R);
    const auto& cb = layout_.find("factor_corr");
    transform::inverse(cb, std::span<const double>(Lr.data(), static_cast<std::size_t>(K * K)),
                       xs.subspan(cb.offset, cb.dim));
  }
  if (spec_.identification().residuals == ResidualMode::Free) {
    const auto& rb = layout_.find("resid_sd");
    for (int i = 0; i < I; ++i) x[rb.offset + static_cast<std::size_t>(i)] = 0.5 * std::log(structure.residual_var[i]);
  }
  for (int i = 0; i < I; ++i) {
    const auto& tb = layout_.find(tau_block(i));
    const auto tau = thresholds.item(i);
    check_ordered(tau);
    auto w = xs.subspan(tb.offset, tb.dim);
    if (is_sequential(i)) {
      for (std::size_t c = 0; c < tau.size(); ++c) w[c] = c == 0 ? tau[0] : std::log(tau[c] - tau[c - 1]);
    } else {
      transform::inverse(tb, tau, w);
    }
  }
  const auto& ub = layout_.find("u");
  if (u.size() != ub.dim) throw DimensionError("u has wrong length");
  transform::inverse(ub, u, xs.subspan(ub.offset, ub.dim));
  return x;
}

double PosteriorModel::log_density(std::span<const double> x, std::span<double> grad) const {
  const int I = spec_.n_items();
  const int K = spec_.n_factors();
  const bool want_grad = !grad.empty();
  if (x.size() != dim() || (want_grad && grad.size() != dim()))
    throw DimensionError("parameter vector has wrong length");
  for (double v : x)
    if (!std::isfinite(v)) return kNegInf;
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  const auto& sp = priors_.structural;
  double lp = 0.0;

  // Loadings.
  const auto& lb = layout_.find("lambda");
  Eigen::MatrixXd Lambda = Eigen::MatrixXd::Zero(I, K);
  for (int k = 0; k < K; ++k) Lambda(spec_.reference_item(k), k) = 1.0;
  for (std::size_t j = 0; j < lb.dim; ++j) {
    const auto [i, k] = spec_.free_loadings()[j];
    const double v = x[lb.offset + j];
    Lambda(i, k) = v;
    if (!sp.flat) {
      lp += normal_lpdf(v, sp.loading_loc, sp.loading_scale);
      if (want_grad) grad[lb.offset + j] += -(v - sp.loading_loc) / (sp.loading_scale * sp.loading_scale);
    }
  }

  // Factor standard deviations and correlation.
  const auto& sb = layout_.find("factor_sd");
  std::vector<double> sd(static_cast<std::size_t>(K)), sd_adj(static_cast<std::size_t>(K), 0.0);
  lp += transform::forward(sb, x.subspan(sb.offset, sb.dim), sd);
  for (double s : sd)
    if (!(s > 0.0) || !std::isfinite(s)) return kNegInf;
  if (!sp.flat)
    for (int k = 0; k < K; ++k) {
      const double s = sd[static_cast<std::size_t>(k)];
      lp += half_cauchy_lpdf(s, sp.factor_sd_scale);
      sd_adj[static_cast<std::size_t>(k)] += -2.0 * s / (sp.factor_sd_scale * sp.factor_sd_scale + s * s);
    }
  std::vector<double> Lr(static_cast<std::size_t>(K * K), 0.0), Lr_adj(static_cast<std::size_t>(K * K), 0.0);
  Lr[0] = 1.0;
  const TransformBlock* cb = K > 1 ? &layout_.find("factor_corr") : nullptr;
  if (cb) {
    lp += transform::forward(*cb, x.subspan(cb->offset, cb->dim), Lr);
    if (!sp.flat && sp.lkj_eta != 1.0)
      for (int i = 1; i < K; ++i) {
        const double lii = Lr[static_cast<std::size_t>(i * K + i)];
        lp += 2.0 * (sp.lkj_eta - 1.0) * std::log(lii);
        Lr_adj[static_cast<std::size_t>(i * K + i)] += 2.0 * (sp.lkj_eta - 1.0) / lii;
      }
  }
  const Eigen::Map<const RowMatrix> LrM(Lr.data(), K, K);
  const Eigen::MatrixXd R = LrM * LrM.transpose();
  const Eigen::Map<const Eigen::VectorXd> sdv(sd.data(), K);
  const Eigen::MatrixXd Phi = sdv.asDiagonal() * R * sdv.asDiagonal();

  // Residual variances.
  Eigen::VectorXd theta(I);
  const TransformBlock* rb = spec_.identification().residuals == ResidualMode::Free ? &layout_.find("resid_sd") : nullptr;
  std::vector<double> rsd, rsd_adj;
  if (rb) {
    rsd.resize(static_cast<std::size_t>(I));
    rsd_adj.assign(static_cast<std::size_t>(I), 0.0);
    lp += transform::forward(*rb, x.subspan(rb->offset, rb->dim), rsd);
    for (double s : rsd)
      if (!(s > 0.0) || !std::isfinite(s)) return kNegInf;
    for (int i = 0; i < I; ++i) {
      const double s = rsd[static_cast<std::size_t>(i)];
      theta[i] = s * s;
      if (!sp.flat) {
        lp += half_cauchy_lpdf(s, sp.residual_sd_scale);
        rsd_adj[static_cast<std::size_t>(i)] += -2.0 * s / (sp.residual_sd_scale * sp.residual_sd_scale + s * s);
      }
    }
  } else {
    theta.setConstant(spec_.identification().fixed_residual_variance);
  }

  // Thresholds and their priors.
  ThresholdTable thr(spec_.category_counts());
  std::vector<double> tau_adj(thr.values.size(), 0.0);
  for (int i = 0; i < I; ++i) {
    const auto& tb = layout_.find(tau_block(i));
    const auto w = x.subspan(tb.offset, tb.dim);
    auto tau = thr.item(i);
    const auto& tp = priors_.thresholds[static_cast<std::size_t>(i)];
    if (const auto* s = std::get_if<SequentialThresholdPrior>(&tp)) {
      const auto t = seq_transform(w);
      std::copy(t.begin(), t.end(), tau.begin());
      lp += seq_transform_lpdf(w, *s);
      if (want_grad)
        for (std::size_t c = 0; c < w.size(); ++c) {
          const double sdc = s->sd(c);
          grad[tb.offset + c] += -(w[c] - s->mu_star[c]) / (sdc * sdc);
        }
    } else {
      lp += transform::forward(tb, w, tau);
      if (const auto* d = std::get_if<InducedDirichletPrior>(&tp)) {
        std::span<double> ta(tau_adj.data() + thr.offsets[static_cast<std::size_t>(i)], tau.size());
        lp += induced_dirichlet_lpdf_grad(tau, d->alpha, d->anchor, d->variant,
                                          want_grad ? ta : std::span<double>{});
      }
    }
    for (std::size_t c = 1; c < tau.size(); ++c)
      if (!(tau[c - 1] < tau[c])) return kNegInf;
  }
  if (!std::isfinite(lp)) return kNegInf;

  // Nuisance variables.
  const auto& ub = layout_.find("u");
  std::vector<double> u(ub.dim), u_adj(want_grad ? ub.dim : 0, 0.0);
  lp += transform::forward(ub, x.subspan(ub.offset, ub.dim), u);
  for (double v : u)
    if (!(v > 0.0 && v < 1.0)) return kNegInf;

  // Likelihood.
  Eigen::MatrixXd sigma = Lambda * Phi * Lambda.transpose();
  sigma.diagonal() += theta;
  RowMatrix L;
  Eigen::MatrixXd Lcol;
  try {
    Lcol = cholesky_lower(sigma);
  } catch (const NotPositiveDefinite&) {
    return kNegInf;
  }
  L = Lcol;
  RowMatrix L_adj = RowMatrix::Zero(I, I);
  const double ll = augmented_log_likelihood_grad(L, thr, u, data_, want_grad ? &L_adj : nullptr,
                                                  tau_adj, u_adj);
  if (!std::isfinite(ll)) return kNegInf;
  lp += ll;
  if (!std::isfinite(lp)) return kNegInf;
  if (!want_grad) return lp;

  // Reverse pass through Sigma = Lambda Phi Lambda' + Theta.
  const Eigen::MatrixXd Sadj = cholesky_lower_adjoint(Lcol, Eigen::MatrixXd(L_adj));
  Eigen::MatrixXd S = Sadj.triangularView<Eigen::Lower>();
  S = 0.5 * (S + S.transpose()).eval();
  S.diagonal() = Sadj.diagonal();
  const Eigen::MatrixXd Lambda_adj = 2.0 * S * Lambda * Phi;
  const Eigen::MatrixXd Phi_adj = Lambda.transpose() * S * Lambda;
  for (std::size_t j = 0; j < lb.dim; ++j) {
    const auto [i, k] = spec_.free_loadings()[j];
    grad[lb.offset + j] += Lambda_adj(i, k);
  }
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < K; ++l)
      sd_adj[static_cast<std::size_t>(k)] += 2.0 * Phi_adj(k, l) * sd[static_cast<std::size_t>(l)] * R(k, l);
  transform::reverse(sb, x.subspan(sb.offset, sb.dim), sd, sd_adj, grad.subspan(sb.offset, sb.dim));
  if (cb) {
    Eigen::MatrixXd R_adj(K, K);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < K; ++l)
        R_adj(k, l) = Phi_adj(k, l) * sd[static_cast<std::size_t>(k)] * sd[static_cast<std::size_t>(l)];
    const RowMatrix LrAdjFull = 2.0 * R_adj * LrM;
    for (int k = 0; k < K; ++k)
      for (int l = 0; l <= k; ++l) Lr_adj[static_cast<std::size_t>(k * K + l)] += LrAdjFull(k, l);
    transform::reverse(*cb, x.subspan(cb->offset, cb->dim), Lr, Lr_adj, grad.subspan(cb->offset, cb->dim));
  }
  if (rb) {
    for (int i = 0; i < I; ++i)
      rsd_adj[static_cast<std::size_t>(i)] += S(i, i) * 2.0 * rsd[static_cast<std::size_t>(i)];
    transform::reverse(*rb, x.subspan(rb->offset, rb->dim), rsd, rsd_adj, grad.subspan(rb->offset, rb->dim));
  }
  for (int i = 0; i < I; ++i) {
    const auto& tb = layout_.find(tau_block(i));
    const std::span<const double> ta(tau_adj.data() + thr.offsets[static_cast<std::size_t>(i)], tb.dim);
    if (is_sequential(i))
      seq_transform_reverse(x.subspan(tb.offset, tb.dim), ta, grad.subspan(tb.offset, tb.dim));
    else
      transform::reverse(tb, x.subspan(tb.offset, tb.dim), thr.item(i), ta, grad.subspan(tb.offset, tb.dim));
  }
  transform::reverse(ub, x.subspan(ub.offset, ub.dim), u, u_adj, grad.subspan(ub.offset, ub.dim));
  return lp;
}

std::vector<std::string> PosteriorModel::output_names() const { return output_names_; }

std::vector<double> PosteriorModel::initial_point() const {
  const int I = spec_.n_items();
  const int K = spec_.n_factors();
  LatentStructure st;
  st.loadings = Eigen::MatrixXd::Zero(I, K);
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k)
      if (spec_.loads_on(i, k)) st.loadings(i, k) = 1.0;
  st.factor_cov = Eigen::MatrixXd::Identity(K, K);
  st.residual_var = spec_.identification().residuals == ResidualMode::Free
                        ? Eigen::VectorXd::Ones(I)
                        : Eigen::VectorXd::Constant(I, spec_.identification().fixed_residual_variance);
  st.intercepts = Eigen::VectorXd::Zero(I);
  const Eigen::MatrixXd sigma = marginal_cov(st.loadings, st.factor_cov, st.residual_var);
  ThresholdTable thr(spec_.category_counts());
  const auto& counts = data_.category_counts();
  for (int i = 0; i < I; ++i) {
    const auto& cnt = counts[static_cast<std::size_t>(i)];
    const double C = static_cast<double>(cnt.size());
    const double total = static_cast<double>(data_.n_rows()) + 0.5 * C;
    double cum = 0.0;
    auto tau = thr.item(i);
    for (std::size_t c = 0; c < tau.size(); ++c) {
      cum += cnt[c] + 0.5;
      tau[c] = std::sqrt(sigma(i, i)) * norm_quantile(cum / total);
    }
  }
  const std::vector<double> u(layout_.find("u").dim, 0.5);
  return pack(st, thr, u);
}

void PosteriorModel::write_output(std::span<const double> x, std::span<double> out) const {
  const auto un = unpack(x);
  const int I = spec_.n_items();
  const int K = spec_.n_factors();
  std::size_t o = 0;
  for (const auto& [i, k] : spec_.free_loadings()) out[o++] = un.structure.loadings(i, k);
  for (int k = 0; k < K; ++k)
    for (int l = k; l < K; ++l) out[o++] = un.structure.factor_cov(k, l);
  if (spec_.identification().residuals == ResidualMode::Free)
    for (int i = 0; i < I; ++i) out[o++] = un.structure.residual_var[i];
  for (double t : un.thresholds.values) out[o++] = t;
}

std::pair<double, std::vector<double>> log_posterior_and_gradient(const PosteriorModel& model,
                                                                  std::span<const double> theta,
                                                                  std::span<const double> u) {
  if (theta.size() != model.n_structural() || theta.size() + u.size() != model.dim())
    throw DimensionError("theta/u lengths do not match the model layout");
  std::vector<double> x(theta.begin(), theta.end());
  x.insert(x.end(), u.begin(), u.end());
  std::vector<double> g(x.size());
  const double v = model.log_density(x, g);
  return {v, std::move(g)};
}

}  // namespace ordfa
