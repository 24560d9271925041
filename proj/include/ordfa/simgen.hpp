#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ordfa/model.hpp"

namespace ordfa {

enum class Shape { Symmetric, Asymmetric, Sparse };
enum class ReferenceChoice { NonSparse, Sparse };

const char* to_string(Shape shape);
const char* to_string(ReferenceChoice ref);
Shape parse_shape(const std::string& s);
ReferenceChoice parse_reference(const std::string& s);

/// One Monte Carlo cell. Items are split evenly over the factors.
struct SimCondition {
  Shape shape = Shape::Asymmetric;
  int n_categories = 4;
  int n = 150;
  int n_sparse_items = 0;
  ReferenceChoice reference = ReferenceChoice::NonSparse;
  std::uint64_t seed = 1;
  int n_items = 12;
  int n_factors = 2;
  double loading = 1.0;
  double factor_corr = 0.23;
  double residual_var = 1.0;

  void validate() const;
};

/// Generating values plus item bookkeeping.
struct PopulationParams {
  LatentStructure structure;
  std::vector<ThresholdVector> thresholds;
  std::vector<bool> sparse;
  std::vector<int> item_factor;      // zero-based factor of each item
  std::vector<int> reference_items;  // zero-based item per factor
  std::string threshold_rule;        // human-readable record of how thresholds were built
};

/// Empty first category is produced by this threshold value.
inline constexpr double kEmptyCategoryThreshold = -15.0;

/// Thresholds realising a named response distribution at implied latent SD sqrt(2).
std::vector<double> condition_thresholds(Shape shape, int n_categories);
std::string threshold_rule_text(Shape shape, int n_categories);

PopulationParams make_population(const SimCondition& condition);

/// Two factors, twelve items, N = 150; items 2 and 8 have an empty first category.
SimCondition study1_condition(std::uint64_t seed = 1);

/// y* = Lambda eta + eps discretised by the thresholds. Deterministic per seed.
DatasetMatrix generate_dataset(const PopulationParams& params, int n, std::uint64_t seed);

/// Simple-structure model matching the population, references as recorded.
ModelSpec model_spec_for(const PopulationParams& params, IdentificationRule identification = {});

/// Generating values keyed by the posterior output names of `spec`.
std::map<std::string, double> truth_values(const PopulationParams& params, const ModelSpec& spec);

}  // namespace ordfa
