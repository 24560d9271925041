#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordfa/harness.hpp"
#include "ordfa/model.hpp"
#include "ordfa/priors.hpp"
#include "ordfa/sampler.hpp"
#include "ordfa/simgen.hpp"

namespace ordfa {

/// Everything `fit` needs. Category counts are declared, never inferred.
struct RunConfig {
  ModelSpec model;
  PriorConfig priors;
  SamplerConfig sampler;
  std::string data_path;
  std::string group_column;  // empty: a single group
  std::string output_dir = "out";
  std::uint64_t seed = 1;
};

/// INI text (sections and key = value). Unknown keys are errors.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Canonical INI form; parse(serialize(c)) reproduces c exactly.
std::string serialize_run_config(const RunConfig& config);

/// 64-bit FNV-1a of the canonical serialisation, as 16 hex digits.
std::string config_hash(const RunConfig& config);
std::string text_hash(const std::string& text);

bool operator==(const RunConfig& a, const RunConfig& b);

/// [condition] section for `simulate`.
SimCondition parse_condition(const std::string& text);
std::string serialize_condition(const SimCondition& c);

/// Moment targets for the informative sequential solver ([targets] mean, variance).
struct SolverTargets {
  std::vector<double> mean;
  std::vector<double> variance;
};
SolverTargets parse_targets(const std::string& text);

/// [prior] section for `prior-predict`: one item's threshold prior.
ThresholdPrior parse_prior_file(const std::string& text);

/// Plan file for `mc-study`: [study], [sampler], optional [prior.NAME] and [cell.N] sections.
StudyPlan parse_study_plan(const std::string& text);

std::string read_text_file(const std::string& path);

// Shared helpers for the INI surface.
std::vector<double> parse_number_list(const std::string& s, const std::string& key);
std::string format_number_list(const std::vector<double>& v);

}  // namespace ordfa
