#include "ordfa/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "ordfa/errors.hpp"

namespace ordfa {

namespace {

ChainSet split(const ChainSet& chains) {
  ChainSet out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 1) throw DimensionError("need at least two draws per chain");
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

double mean_of(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double var_of(const std::vector<double>& x, double m) {
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Autocovariance (divisor n) of a centred sequence at one lag.
double autocov_at(const std::vector<double>& centred, std::size_t lag) {
  double s = 0.0;
  for (std::size_t t = 0; t + lag < centred.size(); ++t) s += centred[t] * centred[t + lag];
  return s / static_cast<double>(centred.size());
}

}  // namespace

std::optional<double> split_rhat(const ChainSet& chains) {
  const ChainSet s = split(chains);
  const double n = static_cast<double>(s.front().size());
  const double m = static_cast<double>(s.size());
  std::vector<double> means, vars;
  for (const auto& c : s) {
    means.push_back(mean_of(c));
    vars.push_back(var_of(c, means.back()));
  }
  const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  if (!(W > 0.0) || !std::isfinite(W)) return std::nullopt;
  const double grand = mean_of(means);
  double B = 0.0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= n / (m - 1.0);
  return std::sqrt(((n - 1.0) / n * W + B / n) / W);
}

std::optional<double> ess(const ChainSet& chains) {
  const ChainSet s = split(chains);
  const std::size_t m = s.size();
  const std::size_t n = s.front().size();
  std::vector<std::vector<double>> centred;
  std::vector<double> means;
  for (const auto& c : s) {
    means.push_back(mean_of(c));
    centred.emplace_back(c);
    for (double& v : centred.back()) v -= means.back();
  }
  double w = 0.0;  // mean within-sequence variance (unbiased)
  for (std::size_t j = 0; j < m; ++j) w += autocov_at(centred[j], 0) * static_cast<double>(n) / static_cast<double>(n - 1);
  w /= static_cast<double>(m);
  const double dn = static_cast<double>(n);
  double var_plus = w * (dn - 1.0) / dn;
  if (m > 1) {
    const double grand = mean_of(means);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    var_plus += b / static_cast<double>(m - 1);
  }
  if (!(var_plus > 0.0) || !std::isfinite(var_plus)) return std::nullopt;

  auto rho = [&](std::size_t lag) {
    double a = 0.0;
    for (std::size_t j = 0; j < m; ++j) a += autocov_at(centred[j], lag);
    a /= static_cast<double>(m);
    return 1.0 - (w - a) / var_plus;
  };
  // Sum of positive pair sums, forced monotone.
  std::vector<double> pairs;
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    const double p = rho(t) + rho(t + 1);
    if (!(p > 0.0)) break;
    if (!pairs.empty()) pairs.push_back(std::min(p, pairs.back()));
    else pairs.push_back(p);
  }
  double tau = -1.0;
  for (double p : pairs) tau += 2.0 * p;
  const double total = static_cast<double>(m * n);
  tau = std::max(tau, 1.0 / std::log10(total));
  return std::min(total / tau, total);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DimensionError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability must lie in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

ParamSummary summarize_param(const std::string& name, const ChainSet& chains) {
  ParamSummary s;
  s.name = name;
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  if (all.empty()) throw DimensionError("no draws to summarize");
  s.mean = mean_of(all);
  s.sd = all.size() > 1 ? std::sqrt(var_of(all, s.mean)) : 0.0;
  std::sort(all.begin(), all.end());
  s.q025 = quantile_sorted(all, 0.025);
  s.q50 = quantile_sorted(all, 0.5);
  s.q975 = quantile_sorted(all, 0.975);
  bool splittable = true;
  for (const auto& c : chains) splittable = splittable && c.size() >= 4;
  if (splittable) {
    s.rhat = split_rhat(chains);
    s.ess = ess(chains);
  }
  return s;
}

std::vector<ParamSummary> summarize(const PosteriorDraws& draws) {
  std::vector<ParamSummary> out;
  for (int p = 0; p < draws.n_params(); ++p)
    out.push_back(summarize_param(draws.names[static_cast<std::size_t>(p)], draws.chains_of(p)));
  return out;
}

bool coverage_flag(const ParamSummary& summary, double truth) {
  return summary.q025 <= truth && truth <= summary.q975;
}

void write_summary_csv(std::ostream& os, const std::vector<ParamSummary>& rows, const std::string& provenance) {
  if (!provenance.empty()) os << "# " << provenance << '\n';
  os << "parameter,mean,sd,q2.5,q50,q97.5,rhat,ess,ci_width\n";
  os.precision(10);
  auto opt = [&](const std::optional<double>& v) -> std::ostream& {
    if (v) os << *v;
    else os << "NA";
    return os;
  };
  for (const auto& r : rows) {
    os << r.name << ',' << r.mean << ',' << r.sd << ',' << r.q025 << ',' << r.q50 << ',' << r.q975 << ',';
    opt(r.rhat) << ',';
    opt(r.ess) << ',' << r.ci_width() << '\n';
  }
}

}  // namespace ordfa
