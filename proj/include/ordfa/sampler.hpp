#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ordfa/target.hpp"

namespace ordfa {

enum class Algorithm { Nuts, StaticHmc };

/// Jittered: target's initial point plus uniform(-init_jitter, init_jitter).
/// Random: uniform(-init_radius, init_radius). Zero: the origin.
enum class InitMode { Jittered, Random, Zero };

const char* to_string(Algorithm a);
const char* to_string(InitMode m);
Algorithm parse_algorithm(const std::string& s);
InitMode parse_init_mode(const std::string& s);

struct SamplerConfig {
  int n_chains = 4;
  int iterations = 2000;  // per chain, warmup included
  int warmup = 1000;
  double target_accept = 0.8;
  Algorithm algorithm = Algorithm::Nuts;
  int max_depth = 10;             // NUTS tree depth
  double integration_time = 2.0;  // static HMC trajectory length
  int max_leapfrog = 1024;        // static HMC cap per iteration
  std::uint64_t seed = 1;
  int init_retries = 100;
  InitMode init = InitMode::Jittered;
  double init_radius = 2.0;
  double init_jitter = 0.5;
  int threads = 0;  // 0: one per chain
  double divergence_threshold = 1000.0;

  void validate() const;
};

/// Post-warmup draws in constrained space plus per-chain bookkeeping.
struct PosteriorDraws {
  std::vector<std::string> names;
  int n_chains = 0;
  int n_draws = 0;  // per chain
  int warmup = 0;
  std::vector<double> values;  // [chain][draw][param]

  std::vector<std::vector<char>> divergent;      // [chain][draw]
  std::vector<std::vector<double>> accept_stat;  // [chain][draw]
  std::vector<std::vector<int>> n_leapfrog;      // [chain][draw]
  /// Step size used at every iteration, warmup included: [chain][iteration].
  std::vector<std::vector<double>> step_size;
  std::vector<Eigen::VectorXd> inv_metric;  // per chain, at the end of warmup

  int n_params() const { return static_cast<int>(names.size()); }
  double at(int chain, int draw, int param) const {
    return values[(static_cast<std::size_t>(chain) * static_cast<std::size_t>(n_draws) +
                   static_cast<std::size_t>(draw)) * names.size() + static_cast<std::size_t>(param)];
  }
  /// One vector per chain for the named parameter index.
  std::vector<std::vector<double>> chains_of(int param) const;
  int param_index(const std::string& name) const;  // -1 when absent
  int total_divergent() const;
};

/// Mixes a base seed with stream identifiers (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Starting point drawn per `config.init`, retried until the density and
/// gradient are finite. Throws SamplerError after the retry budget.
std::vector<double> initialize(const Target& target, const SamplerConfig& config, std::mt19937_64& rng);

PosteriorDraws run_chains(const Target& target, const SamplerConfig& config);

/// Position, momentum and cached density/gradient of a phase-space point.
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double logp = 0.0;
};

/// Fills logp and grad from q.
void evaluate(const Target& target, PhasePoint& z);
double hamiltonian(const PhasePoint& z, const Eigen::VectorXd& inv_metric);
void leapfrog(const Target& target, PhasePoint& z, double eps, const Eigen::VectorXd& inv_metric);

/// Draw CSV: optional provenance comment line, then chain,iteration,divergent,<names>.
void write_draws_csv(std::ostream& os, const PosteriorDraws& draws, const std::string& provenance = {});

}  // namespace ordfa
