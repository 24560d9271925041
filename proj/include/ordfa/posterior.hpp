#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ordfa/model.hpp"
#include "ordfa/priors.hpp"
#include "ordfa/target.hpp"
#include "ordfa/transforms.hpp"

namespace ordfa {

/// Joint posterior over the structural parameters, the thresholds and the
/// GHK nuisance variables u.
///
/// Flat layout, in order: "lambda" (free loadings), "factor_sd", "factor_corr"
/// (K > 1 only), "resid_sd" (free residual mode only), one "tau.<i>" block per
/// item, then "u" (N x I, row-major). Thresholds under a sequential prior are
/// sampled as tau* (unconstrained block); otherwise as an ordered block.
class PosteriorModel final : public Target {
 public:
  PosteriorModel(ModelSpec spec, DatasetMatrix data, PriorConfig priors);

  std::size_t dim() const override { return layout_.total_dim(); }
  double log_density(std::span<const double> x, std::span<double> grad) const override;
  /// Unit loadings and factor variances, zero correlations, unit residual
  /// variances, thresholds from smoothed marginal proportions, u = 1/2.
  std::vector<double> initial_point() const override;
  std::vector<std::string> output_names() const override;
  void write_output(std::span<const double> x, std::span<double> out) const override;

  const ModelSpec& spec() const { return spec_; }
  const DatasetMatrix& data() const { return data_; }
  const PriorConfig& priors() const { return priors_; }
  const TransformLayout& layout() const { return layout_; }
  /// Number of leading coordinates that are model parameters (everything but u).
  std::size_t n_structural() const { return layout_.find("u").offset; }
  bool is_sequential(int item) const;

  struct Unpacked {
    LatentStructure structure;
    ThresholdTable thresholds;
    std::vector<double> u;
  };
  Unpacked unpack(std::span<const double> x) const;

  /// Unconstrained vector reproducing the given constrained values. Loadings
  /// at reference or structural-zero positions are ignored.
  std::vector<double> pack(const LatentStructure& structure, const ThresholdTable& thresholds,
                           std::span<const double> u) const;

 private:
  ModelSpec spec_;
  DatasetMatrix data_;
  PriorConfig priors_;
  TransformLayout layout_;
  std::vector<std::string> output_names_;
};

/// Value and gradient at (theta, u) in unconstrained coordinates.
std::pair<double, std::vector<double>> log_posterior_and_gradient(const PosteriorModel& model,
                                                                  std::span<const double> theta,
                                                                  std::span<const double> u);

/// Name helpers shared by output files and truth bookkeeping (1-based indices).
std::string loading_name(int item, int factor);
std::string factor_cov_name(int k, int l);
std::string residual_name(int item);
std::string threshold_name(int item, int c);

}  // namespace ordfa
