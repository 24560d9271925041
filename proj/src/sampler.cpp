#include "ordfa/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "ordfa/errors.hpp"

namespace ordfa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct DualAveraging {
  double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  double delta = 0.8;
  double mu = 0.0, s_bar = 0.0, x_bar = 0.0;
  int counter = 0;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    s_bar = x_bar = 0.0;
    counter = 0;
  }
  double learn(double accept) {
    ++counter;
    accept = std::min(1.0, accept);
    const double eta = 1.0 / (counter + t0);
    s_bar = (1.0 - eta) * s_bar + eta * (delta - accept);
    const double x = mu - s_bar * std::sqrt(static_cast<double>(counter)) / gamma;
    const double w = std::pow(static_cast<double>(counter), -kappa);
    x_bar = (1.0 - w) * x_bar + w * x;
    return std::exp(x);
  }
  double final_eps() const { return std::exp(x_bar); }
};

// Expanding-window schedule for the diagonal metric.
class WindowedAdaptation {
 public:
  explicit WindowedAdaptation(int warmup) : warmup_(warmup) {
    if (warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_ + term_ + base_ > warmup) {
      init_ = static_cast<int>(0.15 * warmup);
      term_ = static_cast<int>(0.1 * warmup);
      base_ = warmup - (init_ + term_);
    }
    window_size_ = base_;
    next_window_ = init_ + window_size_ - 1;
  }

  /// Feeds one warmup draw; returns true and fills `var` when a window closes.
  bool learn(const Eigen::VectorXd& q, Eigen::VectorXd& var) {
    if (!enabled_) {
      ++counter_;
      return false;
    }
    if (in_window()) add(q);
    if (end_of_window()) {
      next_window();
      const double n = static_cast<double>(n_);
      var = (n / (n + 5.0)) * (m2_ / (n - 1.0)) + Eigen::VectorXd::Constant(q.size(), 1e-3 * 5.0 / (n + 5.0));
      n_ = 0;
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const { return counter_ >= init_ && counter_ < warmup_ - term_ && counter_ != warmup_; }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }
  void next_window() {
    if (next_window_ == warmup_ - term_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_ - 1 && next_window_ + 2 * window_size_ >= warmup_ - term_)
      next_window_ = warmup_ - term_ - 1;
  }
  void add(const Eigen::VectorXd& q) {
    if (n_ == 0) {
      mean_ = Eigen::VectorXd::Zero(q.size());
      m2_ = Eigen::VectorXd::Zero(q.size());
    }
    ++n_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(q - mean_);
  }

  int warmup_;
  bool enabled_ = true;
  int init_ = 75, term_ = 50, base_ = 25;
  int window_size_ = 0, next_window_ = 0, counter_ = 0;
  int n_ = 0;
  Eigen::VectorXd mean_, m2_;
};

struct TransitionResult {
  double accept_stat = 0.0;
  int n_leapfrog = 0;
  bool divergent = false;
};

class Chain {
 public:
  Chain(const Target& target, const SamplerConfig& config, std::mt19937_64 rng)
      : target_(target), config_(config), rng_(rng) {
    inv_metric_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(target.dim()));
  }

  void set_start(const std::vector<double>& q) {
    z_.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    z_.p = Eigen::VectorXd::Zero(z_.q.size());
    evaluate(target_, z_);
  }

  void init_stepsize() {
    const PhasePoint start = z_;
    sample_momentum();
    double H0 = hamiltonian(z_, inv_metric_);
    leapfrog(target_, z_, eps_, inv_metric_);
    double h = hamiltonian(z_, inv_metric_);
    if (std::isnan(h)) h = kInf;
    double delta_H = H0 - h;
    const int direction = delta_H > std::log(0.8) ? 1 : -1;
    for (int tries = 0; tries < 100; ++tries) {
      z_ = start;
      sample_momentum();
      H0 = hamiltonian(z_, inv_metric_);
      leapfrog(target_, z_, eps_, inv_metric_);
      h = hamiltonian(z_, inv_metric_);
      if (std::isnan(h)) h = kInf;
      delta_H = H0 - h;
      if (direction == 1 && !(delta_H > std::log(0.8))) break;
      if (direction == -1 && !(delta_H < std::log(0.8))) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw SamplerError("step size search diverged upward; posterior may be improper");
      if (eps_ == 0.0) throw SamplerError("step size search collapsed to zero");
    }
    z_ = start;
  }

  TransitionResult transition() {
    return config_.algorithm == Algorithm::Nuts ? nuts() : static_hmc();
  }

  PhasePoint& state() { return z_; }
  double eps() const { return eps_; }
  void set_eps(double e) { eps_ = e; }
  Eigen::VectorXd& inv_metric() { return inv_metric_; }

 private:
  void sample_momentum() {
    z_.p.resize(z_.q.size());
    for (Eigen::Index k = 0; k < z_.p.size(); ++k) z_.p[k] = normal_(rng_) / std::sqrt(inv_metric_[k]);
  }
  double uniform() { return unif_(rng_); }

  TransitionResult static_hmc() {
    TransitionResult res;
    const PhasePoint start = z_;
    sample_momentum();
    const double H0 = hamiltonian(z_, inv_metric_);
    const double jitter = 0.5 + uniform();
    int steps = static_cast<int>(std::ceil(config_.integration_time / eps_ * jitter));
    steps = std::clamp(steps, 1, config_.max_leapfrog);
    double h = H0;
    for (int s = 0; s < steps; ++s) {
      leapfrog(target_, z_, eps_, inv_metric_);
      ++res.n_leapfrog;
      h = hamiltonian(z_, inv_metric_);
      if (std::isnan(h)) h = kInf;
      if (h - H0 > config_.divergence_threshold) {
        res.divergent = true;
        break;
      }
    }
    res.accept_stat = res.divergent ? 0.0 : std::min(1.0, std::exp(H0 - h));
    if (res.divergent || uniform() >= res.accept_stat) z_ = start;
    return res;
  }

  bool criterion(const Eigen::VectorXd& ps_minus, const Eigen::VectorXd& ps_plus, const Eigen::VectorXd& rho) const {
    return ps_plus.dot(rho) > 0 && ps_minus.dot(rho) > 0;
  }

  // Builds a subtree of 2^depth leapfrog steps from `z` in direction `sign`.
  bool build_tree(int depth, PhasePoint& z, PhasePoint& propose, Eigen::VectorXd& ps_beg, Eigen::VectorXd& ps_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double H0, double sign,
                  TransitionResult& res, double& log_sum_weight, double& sum_metro) {
    if (depth == 0) {
      leapfrog(target_, z, sign * eps_, inv_metric_);
      ++res.n_leapfrog;
      double h = hamiltonian(z, inv_metric_);
      if (std::isnan(h)) h = kInf;
      if (h - H0 > config_.divergence_threshold) res.divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, H0 - h);
      sum_metro += H0 - h > 0 ? 1.0 : std::exp(H0 - h);
      propose = z;
      ps_beg = inv_metric_.cwiseProduct(z.p);
      ps_end = ps_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = z.p;
      return !res.divergent;
    }
    const Eigen::Index n = z.q.size();
    Eigen::VectorXd ps_init_end(n), p_init_end(n), rho_init = Eigen::VectorXd::Zero(n);
    double lsw_init = -kInf;
    if (!build_tree(depth - 1, z, propose, ps_beg, ps_init_end, rho_init, p_beg, p_init_end, H0, sign, res, lsw_init,
                    sum_metro))
      return false;
    PhasePoint propose_final = z;
    Eigen::VectorXd ps_final_beg(n), p_final_beg(n), rho_final = Eigen::VectorXd::Zero(n);
    double lsw_final = -kInf;
    if (!build_tree(depth - 1, z, propose_final, ps_final_beg, ps_end, rho_final, p_final_beg, p_end, H0, sign, res,
                    lsw_final, sum_metro))
      return false;
    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree || uniform() < std::exp(lsw_final - lsw_subtree)) propose = propose_final;
    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(ps_beg, ps_end, rho_subtree);
    persist = persist && criterion(ps_beg, ps_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(ps_init_end, ps_end, rho_final + p_init_end);
    return persist;
  }

  TransitionResult nuts() {
    TransitionResult res;
    sample_momentum();
    const Eigen::Index n = z_.q.size();
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
    const Eigen::VectorXd ps0 = inv_metric_.cwiseProduct(z_.p);
    Eigen::VectorXd p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    Eigen::VectorXd ps_fwd_fwd = ps0, ps_fwd_bck = ps0, ps_bck_fwd = ps0, ps_bck_bck = ps0;
    Eigen::VectorXd rho = z_.p;
    double log_sum_weight = 0.0;
    double sum_metro = 0.0;
    const double H0 = hamiltonian(z_, inv_metric_);
    for (int depth = 0; depth < config_.max_depth; ++depth) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n), rho_bck = Eigen::VectorXd::Zero(n);
      double lsw_subtree = -kInf;
      bool valid;
      if (uniform() > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_fwd;
        ps_bck_fwd = ps_fwd_fwd;
        PhasePoint z = z_fwd;
        valid = build_tree(depth, z, z_propose, ps_fwd_bck, ps_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, H0, 1.0, res,
                           lsw_subtree, sum_metro);
        z_fwd = std::move(z);
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_bck;
        ps_fwd_bck = ps_bck_bck;
        PhasePoint z = z_bck;
        valid = build_tree(depth, z, z_propose, ps_bck_fwd, ps_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, H0, -1.0, res,
                           lsw_subtree, sum_metro);
        z_bck = std::move(z);
      }
      if (!valid) break;
      if (lsw_subtree > log_sum_weight || uniform() < std::exp(lsw_subtree - log_sum_weight)) z_sample = z_propose;
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
      rho = rho_bck + rho_fwd;
      bool persist = criterion(ps_bck_bck, ps_fwd_fwd, rho);
      persist = persist && criterion(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }
    res.accept_stat = res.n_leapfrog > 0 ? sum_metro / res.n_leapfrog : 0.0;
    z_ = std::move(z_sample);
    return res;
  }

  const Target& target_;
  const SamplerConfig& config_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  PhasePoint z_;
  Eigen::VectorXd inv_metric_;
  double eps_ = 1.0;
};

struct ChainOutput {
  std::vector<double> values;
  std::vector<char> divergent;
  std::vector<double> accept_stat;
  std::vector<int> n_leapfrog;
  std::vector<double> step_size;
  Eigen::VectorXd inv_metric;
  std::string error;
};

void run_one_chain(const Target& target, const SamplerConfig& config, int chain, ChainOutput& out) {
  try {
    std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(chain) + 1));
    const auto start = initialize(target, config, rng);
    Chain ch(target, config, rng);
    ch.set_start(start);
    ch.init_stepsize();
    DualAveraging da;
    da.delta = config.target_accept;
    da.restart(ch.eps());
    WindowedAdaptation windows(config.warmup);
    const std::size_t n_out = target.output_names().size();
    const int n_draws = config.iterations - config.warmup;
    out.values.resize(static_cast<std::size_t>(n_draws) * n_out);
    out.step_size.reserve(static_cast<std::size_t>(config.iterations));
    Eigen::VectorXd var;
    for (int it = 0; it < config.iterations; ++it) {
      out.step_size.push_back(ch.eps());
      const auto res = ch.transition();
      if (it < config.warmup) {
        ch.set_eps(da.learn(res.accept_stat));
        if (windows.learn(ch.state().q, var)) {
          ch.inv_metric() = var;
          ch.init_stepsize();
          da.restart(ch.eps());
        }
        if (it + 1 == config.warmup) ch.set_eps(da.final_eps());
        continue;
      }
      const int d = it - config.warmup;
      target.write_output(std::span<const double>(ch.state().q.data(), static_cast<std::size_t>(ch.state().q.size())),
                          std::span<double>(out.values.data() + static_cast<std::size_t>(d) * n_out, n_out));
      out.divergent.push_back(res.divergent ? 1 : 0);
      out.accept_stat.push_back(res.accept_stat);
      out.n_leapfrog.push_back(res.n_leapfrog);
    }
    out.inv_metric = ch.inv_metric();
  } catch (const std::exception& e) {
    out.error = "chain " + std::to_string(chain + 1) + ": " + e.what();
  }
}

}  // namespace

const char* to_string(Algorithm a) { return a == Algorithm::Nuts ? "nuts" : "hmc"; }

const char* to_string(InitMode m) {
  switch (m) {
    case InitMode::Jittered: return "jittered";
    case InitMode::Random: return "random";
    case InitMode::Zero: return "zero";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "nuts") return Algorithm::Nuts;
  if (s == "hmc" || s == "static") return Algorithm::StaticHmc;
  throw ConfigError("unknown algorithm '" + s + "' (nuts, hmc)");
}

InitMode parse_init_mode(const std::string& s) {
  if (s == "jittered") return InitMode::Jittered;
  if (s == "random") return InitMode::Random;
  if (s == "zero") return InitMode::Zero;
  throw ConfigError("unknown init mode '" + s + "' (jittered, random, zero)");
}

void SamplerConfig::validate() const {
  if (n_chains < 1) throw ConfigError("n_chains must be at least 1");
  if (warmup < 0 || iterations <= warmup) throw ConfigError("need 0 <= warmup < iterations");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0, 1)");
  if (max_depth < 1) throw ConfigError("max_depth must be positive");
  if (!(integration_time > 0.0)) throw ConfigError("integration_time must be positive");
  if (max_leapfrog < 1) throw ConfigError("max_leapfrog must be positive");
  if (init_retries < 1) throw ConfigError("init_retries must be positive");
  if (!(init_radius >= 0.0) || !(init_jitter >= 0.0)) throw ConfigError("init_radius and init_jitter must be non-negative");
  if (threads < 0) throw ConfigError("threads must be non-negative");
  if (!(divergence_threshold > 0.0)) throw ConfigError("divergence_threshold must be positive");
}

std::vector<std::vector<double>> PosteriorDraws::chains_of(int param) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n_chains));
  for (int c = 0; c < n_chains; ++c) {
    out[static_cast<std::size_t>(c)].reserve(static_cast<std::size_t>(n_draws));
    for (int d = 0; d < n_draws; ++d) out[static_cast<std::size_t>(c)].push_back(at(c, d, param));
  }
  return out;
}

int PosteriorDraws::param_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

int PosteriorDraws::total_divergent() const {
  int n = 0;
  for (const auto& c : divergent)
    for (char d : c) n += d;
  return n;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

std::vector<double> initialize(const Target& target, const SamplerConfig& config, std::mt19937_64& rng) {
  const std::size_t n = target.dim();
  std::vector<double> centre(n, 0.0);
  if (config.init == InitMode::Jittered) {
    auto hint = target.initial_point();
    if (hint.size() == n) centre = std::move(hint);
  }
  const double r = config.init == InitMode::Random ? config.init_radius : config.init_jitter;
  std::vector<double> x(n), g(n);
  std::uniform_real_distribution<double> unif(-r, r);
  const int tries = config.init == InitMode::Zero ? 1 : config.init_retries;
  for (int t = 0; t < tries; ++t) {
    for (std::size_t k = 0; k < n; ++k) x[k] = config.init == InitMode::Zero ? 0.0 : centre[k] + unif(rng);
    const double lp = target.log_density(x, g);
    if (std::isfinite(lp) && std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); })) return x;
  }
  throw SamplerError("initialization failed: no finite log-density after " + std::to_string(tries) +
                     (config.init == InitMode::Zero ? " attempt at zero" : " attempts"));
}

void evaluate(const Target& target, PhasePoint& z) {
  z.grad.resize(z.q.size());
  z.logp = target.log_density(std::span<const double>(z.q.data(), static_cast<std::size_t>(z.q.size())),
                              std::span<double>(z.grad.data(), static_cast<std::size_t>(z.grad.size())));
  if (!std::isfinite(z.logp)) z.logp = -kInf;
}

double hamiltonian(const PhasePoint& z, const Eigen::VectorXd& inv_metric) {
  return -z.logp + 0.5 * z.p.cwiseProduct(inv_metric).dot(z.p);
}

void leapfrog(const Target& target, PhasePoint& z, double eps, const Eigen::VectorXd& inv_metric) {
  z.p += 0.5 * eps * z.grad;
  z.q += eps * inv_metric.cwiseProduct(z.p);
  evaluate(target, z);
  if (z.logp == -kInf) return;  // rejected; gradient is meaningless
  z.p += 0.5 * eps * z.grad;
}

PosteriorDraws run_chains(const Target& target, const SamplerConfig& config) {
  config.validate();
  const int n_chains = config.n_chains;
  std::vector<ChainOutput> outs(static_cast<std::size_t>(n_chains));
  const int width = std::max(1, config.threads == 0 ? n_chains : std::min(config.threads, n_chains));
  if (width == 1) {
    for (int c = 0; c < n_chains; ++c) run_one_chain(target, config, c, outs[static_cast<std::size_t>(c)]);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < width; ++w)
      pool.emplace_back([&] {
        for (int c = next++; c < n_chains; c = next++) run_one_chain(target, config, c, outs[static_cast<std::size_t>(c)]);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& o : outs)
    if (!o.error.empty()) throw SamplerError(o.error);

  PosteriorDraws d;
  d.names = target.output_names();
  d.n_chains = n_chains;
  d.n_draws = config.iterations - config.warmup;
  d.warmup = config.warmup;
  for (auto& o : outs) {
    d.values.insert(d.values.end(), o.values.begin(), o.values.end());
    d.divergent.push_back(std::move(o.divergent));
    d.accept_stat.push_back(std::move(o.accept_stat));
    d.n_leapfrog.push_back(std::move(o.n_leapfrog));
    d.step_size.push_back(std::move(o.step_size));
    d.inv_metric.push_back(std::move(o.inv_metric));
  }
  return d;
}

void write_draws_csv(std::ostream& os, const PosteriorDraws& draws, const std::string& provenance) {
  if (!provenance.empty()) os << "# " << provenance << '\n';
  os << "chain,iteration,divergent";
  for (const auto& n : draws.names) os << ',' << n;
  os << '\n';
  os.precision(17);
  for (int c = 0; c < draws.n_chains; ++c)
    for (int i = 0; i < draws.n_draws; ++i) {
      os << c + 1 << ',' << draws.warmup + i + 1 << ','
         << static_cast<int>(draws.divergent[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)]);
      for (int p = 0; p < draws.n_params(); ++p) os << ',' << draws.at(c, i, p);
      os << '\n';
    }
}

}  // namespace ordfa
