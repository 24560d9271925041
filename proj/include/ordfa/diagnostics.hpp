#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordfa/sampler.hpp"

namespace ordfa {

using ChainSet = std::vector<std::vector<double>>;

/// Split potential scale reduction. Chains are halved (an odd middle draw is
/// dropped); empty optional when the within-sequence variance is zero.
std::optional<double> split_rhat(const ChainSet& chains);

/// Effective sample size from split chains with Geyer's initial monotone
/// sequence, capped at the total number of draws. Empty when undefined.
std::optional<double> ess(const ChainSet& chains);

/// Sample quantile, linear interpolation between order statistics
/// (h = (n - 1) p, type 7). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  std::optional<double> rhat;
  std::optional<double> ess;
  double ci_width() const { return q975 - q025; }
  /// Undefined R-hat counts as not converged.
  bool converged(double threshold = 1.1) const { return rhat && *rhat < threshold; }
};

ParamSummary summarize_param(const std::string& name, const ChainSet& chains);
std::vector<ParamSummary> summarize(const PosteriorDraws& draws);

/// Closed interval: q2.5 <= truth <= q97.5.
bool coverage_flag(const ParamSummary& summary, double truth);

/// parameter,mean,sd,q2.5,q50,q97.5,rhat,ess,ci_width (undefined values written as NA).
void write_summary_csv(std::ostream& os, const std::vector<ParamSummary>& rows, const std::string& provenance = {});

}  // namespace ordfa
