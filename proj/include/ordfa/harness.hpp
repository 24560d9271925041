#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ordfa/priors.hpp"
#include "ordfa/sampler.hpp"
#include "ordfa/simgen.hpp"

namespace ordfa {

/// A threshold-prior specification applied to every item of a cell.
struct PriorSpec {
  enum class Family { Sequential, Dirichlet };
  std::string name;
  Family family = Family::Sequential;
  double seq_mu = 0.0;
  double seq_sd = 1.5;
  std::vector<double> alpha;  // empty: a vector of ones sized to the item
  StructuralPriors structural;

  PriorConfig build(const ModelSpec& spec) const;

  static PriorSpec joint();           // induced-Dirichlet, unit alpha
  static PriorSpec small_variance();  // sequential, sd 1.5
  static PriorSpec large_variance();  // sequential, sd 1e5
  /// "joint", "small" or "large".
  static PriorSpec preset(const std::string& name);
};

struct StudyPlan {
  std::vector<SimCondition> cells;
  std::vector<PriorSpec> priors;
  int replications = 20;
  std::uint64_t base_seed = 1;
  int workers = 1;
  SamplerConfig sampler;
  IdentificationRule identification;

  void validate() const;
};

enum class ParamClass {
  Loading,
  FactorVariance,
  FactorCovariance,
  Residual,
  Threshold,       // thresholds of categories the population fills
  EmptyThreshold,  // first threshold of an item generated with an empty category
  AllThresholds,   // aggregate of the two above, used for convergence rows
};
inline constexpr int kParamClassCount = 7;
const char* to_string(ParamClass c);

struct ParamRecord {
  std::string name;
  ParamClass cls = ParamClass::Loading;
  double truth = 0.0;
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  std::optional<double> rhat;
  std::optional<double> ess;
  bool covered = false;
};

struct ReplicationRecord {
  int cell = 0;
  int replication = 0;
  int prior = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t sampler_seed = 0;
  bool completed = false;
  std::string error;
  double seconds = 0.0;
  int divergent = 0;
  std::vector<ParamRecord> params;
};

struct ClassStats {
  int count = 0;                    // (replication, parameter) pairs
  std::optional<double> coverage;   // percent; absent for empty-category thresholds
  double avg_ci_width = 0.0;
  std::optional<double> avg_rhat;   // over defined values
  double pct_rhat_below = 0.0;      // percent with R-hat < 1.1, undefined counted as not
  std::optional<double> avg_ess;
};

struct CellResult {
  int cell = 0;
  int prior = 0;
  SimCondition condition;
  std::string prior_name;
  int completed = 0;
  int skipped = 0;
  std::array<ClassStats, kParamClassCount> stats;

  const ClassStats& of(ParamClass c) const { return stats[static_cast<std::size_t>(c)]; }
};

struct StudyResult {
  std::vector<ReplicationRecord> records;  // ordered by (cell, replication, prior)
  std::vector<CellResult> cells;           // ordered by (cell, prior)
};

/// Seeds: data = derive_seed(base, cell, replication); sampler = derive_seed(data, prior + 1).
std::uint64_t replication_data_seed(std::uint64_t base, int cell, int replication);
std::uint64_t replication_sampler_seed(std::uint64_t data_seed, int prior);

/// One (cell, replication, prior) task. Sampler failures are recorded, not thrown.
ReplicationRecord run_replication(const StudyPlan& plan, int cell, int replication, int prior);

using ProgressFn = std::function<void(const ReplicationRecord&)>;

/// Runs every task on a pool of plan.workers threads, then aggregates.
StudyResult run_study(const StudyPlan& plan, const ProgressFn& progress = {});

/// Averages over the completed records of one (cell, prior).
CellResult aggregate_cell(const StudyPlan& plan, int cell, int prior, const std::vector<ReplicationRecord>& records);

std::string cell_label(const SimCondition& c);

void write_records_csv(std::ostream& os, const StudyPlan& plan, const StudyResult& result,
                       const std::string& provenance = {});
void write_cells_csv(std::ostream& os, const StudyResult& result, const std::string& provenance = {});

/// Aligned text: convergence, coverage/width and (when the plan varies the
/// reference indicator) the reference split. Percents to one decimal, widths to two.
std::string format_tables(const StudyPlan& plan, const StudyResult& result);

}  // namespace ordfa
