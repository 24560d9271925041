#include "ordfa/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ordfa/errors.hpp"

namespace ordfa {

namespace {

namespace pt = boost::property_tree;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Keys of one INI section with use tracking, so leftovers can be reported.
class Section {
 public:
  Section() = default;
  Section(std::string name, const pt::ptree& tree) : name_(std::move(name)) {
    for (const auto& [k, v] : tree) {
      if (!v.empty()) throw ConfigError("[" + name_ + "] nested keys are not supported: '" + k + "'");
      values_[k] = v.data();
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : trim(it->second);
  }
  std::string required(const std::string& key) {
    if (!has(key)) throw ConfigError("[" + name_ + "] missing required key '" + key + "'");
    return str(key, "");
  }
  double num(const std::string& key, double fallback) {
    if (!has(key)) return str(key, ""), fallback;
    return to_double(str(key, ""), key);
  }
  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return str(key, ""), fallback;
    const std::string s = str(key, "");
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("[" + name_ + "] " + key + ": expected an integer, got '" + s + "'");
    }
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return str(key, ""), fallback;
    const std::string s = str(key, "");
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError("[" + name_ + "] " + key + ": expected true/false, got '" + s + "'");
  }
  std::vector<double> list(const std::string& key) { return parse_number_list(str(key, ""), "[" + name_ + "] " + key); }

  void finish() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) throw ConfigError("[" + name_ + "] unknown key '" + k + "'");
  }
  const std::string& name() const { return name_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }
  double to_double(const std::string& s, const std::string& key) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("[" + name_ + "] " + key + ": expected a number, got '" + s + "'");
    }
  }

  std::string name_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

std::map<std::string, Section> parse_sections(const std::string& text) {
  // Trailing comments: ';' or '#' after whitespace.
  std::string stripped;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    for (std::size_t k = 1; k < line.size(); ++k)
      if ((line[k] == ';' || line[k] == '#') && (line[k - 1] == ' ' || line[k - 1] == '\t')) {
        line.erase(k);
        break;
      }
    stripped += line + '\n';
  }
  pt::ptree tree;
  std::istringstream is(stripped);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  std::map<std::string, Section> out;
  for (const auto& [name, sub] : tree) {
    if (sub.empty() && !sub.data().empty())
      throw ConfigError("key '" + name + "' must appear inside a section");
    out.emplace(name, Section(name, sub));
  }
  return out;
}

Section& section(std::map<std::string, Section>& secs, const std::string& name) {
  auto it = secs.find(name);
  if (it == secs.end()) it = secs.emplace(name, Section(name, pt::ptree())).first;
  return it->second;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

// One value broadcasts to n; otherwise the list must have length n.
std::vector<double> broadcast(const std::vector<double>& v, std::size_t n, const std::string& what) {
  if (v.size() == 1) return std::vector<double>(n, v[0]);
  if (v.size() != n)
    throw ConfigError(what + ": expected 1 or " + std::to_string(n) + " values, got " + std::to_string(v.size()));
  return v;
}

struct PriorFields {
  std::string family = "sequential";
  std::vector<double> seq_mu{0.0};
  std::vector<double> seq_dispersion{1.5};
  bool seq_is_variance = false;
  std::vector<double> alpha{1.0};
  double anchor = 0.0;
  std::string cdf = "normal";
};

void read_prior_fields(Section& s, PriorFields& f) {
  f.family = s.str("family", f.family);
  if (s.has("seq_mu")) f.seq_mu = s.list("seq_mu");
  if (s.has("seq_dispersion")) f.seq_dispersion = s.list("seq_dispersion");
  f.seq_is_variance = s.boolean("seq_is_variance", f.seq_is_variance);
  if (s.has("alpha")) f.alpha = s.list("alpha");
  f.anchor = s.num("anchor", f.anchor);
  f.cdf = s.str("cdf", f.cdf);
}

ThresholdPrior build_prior(const PriorFields& f, int n_categories, const std::string& where) {
  const std::size_t T = static_cast<std::size_t>(n_categories - 1);
  if (f.family == "sequential") {
    SequentialThresholdPrior p;
    p.mu_star = broadcast(f.seq_mu, T, where + " seq_mu");
    p.dispersion = broadcast(f.seq_dispersion, T, where + " seq_dispersion");
    p.is_variance = f.seq_is_variance;
    for (double d : p.dispersion)
      if (!(d > 0.0)) throw ConfigError(where + ": seq_dispersion must be positive");
    return p;
  }
  if (f.family == "dirichlet") {
    InducedDirichletPrior p;
    p.alpha = broadcast(f.alpha, T + 1, where + " alpha");
    for (double a : p.alpha)
      if (!(a > 0.0)) throw ConfigError(where + ": alpha must be positive");
    p.anchor = f.anchor;
    if (f.cdf == "normal") p.variant = CdfVariant::ExactNormal;
    else if (f.cdf == "logistic") p.variant = CdfVariant::LogisticApprox;
    else throw ConfigError(where + ": cdf must be 'normal' or 'logistic'");
    return p;
  }
  if (f.family == "flat") return FlatThresholdPrior{};
  throw ConfigError(where + ": unknown prior family '" + f.family + "' (sequential, dirichlet, flat)");
}

void write_prior(std::ostream& os, const ThresholdPrior& p) {
  if (const auto* s = std::get_if<SequentialThresholdPrior>(&p)) {
    os << "family = sequential\nseq_mu = " << format_number_list(s->mu_star)
       << "\nseq_dispersion = " << format_number_list(s->dispersion)
       << "\nseq_is_variance = " << (s->is_variance ? "true" : "false") << '\n';
  } else if (const auto* d = std::get_if<InducedDirichletPrior>(&p)) {
    os << "family = dirichlet\nalpha = " << format_number_list(d->alpha) << "\nanchor = " << fmt(d->anchor)
       << "\ncdf = " << (d->variant == CdfVariant::ExactNormal ? "normal" : "logistic") << '\n';
  } else {
    os << "family = flat\n";
  }
}

bool same_prior(const ThresholdPrior& a, const ThresholdPrior& b) {
  if (a.index() != b.index()) return false;
  if (const auto* s = std::get_if<SequentialThresholdPrior>(&a)) {
    const auto& t = std::get<SequentialThresholdPrior>(b);
    return s->mu_star == t.mu_star && s->dispersion == t.dispersion && s->is_variance == t.is_variance;
  }
  if (const auto* d = std::get_if<InducedDirichletPrior>(&a)) {
    const auto& e = std::get<InducedDirichletPrior>(b);
    return d->alpha == e.alpha && d->anchor == e.anchor && d->variant == e.variant;
  }
  return true;
}

SamplerConfig read_sampler(Section& s, SamplerConfig c) {
  c.n_chains = static_cast<int>(s.integer("chains", c.n_chains));
  c.iterations = static_cast<int>(s.integer("iterations", c.iterations));
  c.warmup = static_cast<int>(s.integer("warmup", c.warmup));
  c.target_accept = s.num("target_accept", c.target_accept);
  c.algorithm = parse_algorithm(s.str("algorithm", to_string(c.algorithm)));
  c.max_depth = static_cast<int>(s.integer("max_depth", c.max_depth));
  c.integration_time = s.num("integration_time", c.integration_time);
  c.max_leapfrog = static_cast<int>(s.integer("max_leapfrog", c.max_leapfrog));
  c.init = parse_init_mode(s.str("init", to_string(c.init)));
  c.init_radius = s.num("init_radius", c.init_radius);
  c.init_jitter = s.num("init_jitter", c.init_jitter);
  c.init_retries = static_cast<int>(s.integer("init_retries", c.init_retries));
  c.threads = static_cast<int>(s.integer("threads", c.threads));
  c.divergence_threshold = s.num("divergence_threshold", c.divergence_threshold);
  return c;
}

SimCondition read_condition(Section& s) {
  SimCondition c;
  c.shape = parse_shape(s.str("shape", to_string(c.shape)));
  c.n_categories = static_cast<int>(s.integer("categories", c.n_categories));
  c.n = static_cast<int>(s.integer("n", c.n));
  c.n_sparse_items = static_cast<int>(s.integer("sparse_items", c.n_sparse_items));
  c.reference = parse_reference(s.str("reference", to_string(c.reference)));
  c.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<long long>(c.seed)));
  c.n_items = static_cast<int>(s.integer("items", c.n_items));
  c.n_factors = static_cast<int>(s.integer("factors", c.n_factors));
  c.loading = s.num("loading", c.loading);
  c.factor_corr = s.num("factor_corr", c.factor_corr);
  c.residual_var = s.num("residual_var", c.residual_var);
  return c;
}

void write_sampler(std::ostream& os, const SamplerConfig& c) {
  os << "[sampler]\nchains = " << c.n_chains << "\niterations = " << c.iterations << "\nwarmup = " << c.warmup
     << "\ntarget_accept = " << fmt(c.target_accept) << "\nalgorithm = " << to_string(c.algorithm)
     << "\nmax_depth = " << c.max_depth << "\nintegration_time = " << fmt(c.integration_time)
     << "\nmax_leapfrog = " << c.max_leapfrog << "\ninit = " << to_string(c.init)
     << "\ninit_radius = " << fmt(c.init_radius) << "\ninit_jitter = " << fmt(c.init_jitter)
     << "\ninit_retries = " << c.init_retries << "\nthreads = " << c.threads
     << "\ndivergence_threshold = " << fmt(c.divergence_threshold) << '\n';
}

}  // namespace

std::vector<double> parse_number_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::string norm = s;
  for (char& ch : norm)
    if (ch == ',' || ch == '[' || ch == ']') ch = ' ';
  for (const auto& w : split_words(norm)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(w, &pos));
      if (pos != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + w + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(key + ": expected at least one number");
  return out;
}

std::string format_number_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? " " : "") + fmt(v[k]);
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig parse_run_config(const std::string& text) {
  auto secs = parse_sections(text);
  for (const auto& [name, s] : secs)
    if (name != "run" && name != "model" && name != "priors" && name != "sampler" && name.rfind("prior.", 0) != 0)
      throw ConfigError("unknown section [" + name + "]");
  RunConfig rc;

  auto& run = section(secs, "run");
  rc.seed = static_cast<std::uint64_t>(run.integer("seed", 1));
  rc.data_path = run.str("data", "");
  rc.output_dir = run.str("output", "out");
  rc.group_column = run.str("group_column", "");
  run.finish();

  auto& m = section(secs, "model");
  const int K = static_cast<int>(m.integer("factors", 1));
  if (K < 1) throw ConfigError("[model] factors must be positive");
  std::vector<std::string> ids = split_words(m.str("items", ""));
  if (ids.empty()) {
    const long long n = m.integer("n_items", 0);
    if (n < 1) throw ConfigError("[model] needs 'items' or a positive 'n_items'");
    for (long long i = 1; i <= n; ++i) ids.push_back("item_" + std::to_string(i));
  } else if (m.has("n_items") && m.integer("n_items", 0) != static_cast<long long>(ids.size())) {
    throw ConfigError("[model] n_items disagrees with the items list");
  }
  const std::size_t I = ids.size();
  const auto factor_words = split_words(m.required("factor_of"));
  if (factor_words.size() != I)
    throw ConfigError("[model] factor_of needs one entry per item (" + std::to_string(I) + ")");
  const auto cats = broadcast(m.list("categories"), I, "[model] categories");
  const auto refs = m.list("reference");
  if (refs.size() != static_cast<std::size_t>(K))
    throw ConfigError("[model] reference needs one item per factor (" + std::to_string(K) + ")");
  std::vector<ItemSpec> items(I);
  for (std::size_t i = 0; i < I; ++i) {
    items[i].id = ids[i];
    std::string w = factor_words[i];
    for (char& ch : w)
      if (ch == '+') ch = ' ';
    for (double f : parse_number_list(w, "[model] factor_of")) {
      if (f != std::floor(f) || f < 1 || f > K)
        throw ConfigError("[model] factor_of: item '" + ids[i] + "' names factor " + fmt(f) + " outside 1.." + std::to_string(K));
      items[i].factors.push_back(static_cast<int>(f) - 1);
    }
    if (cats[i] != std::floor(cats[i]) || cats[i] < 2)
      throw ConfigError("[model] categories of '" + ids[i] + "' must be an integer >= 2");
    items[i].n_categories = static_cast<int>(cats[i]);
  }
  for (double r : refs) {
    if (r != std::floor(r) || r < 1 || r > static_cast<double>(I))
      throw ConfigError("[model] reference item " + fmt(r) + " does not exist");
    items[static_cast<std::size_t>(r) - 1].is_reference = true;
  }
  IdentificationRule ident;
  const std::string resid = m.str("residuals", "fixed");
  if (resid == "fixed") ident.residuals = ResidualMode::Fixed;
  else if (resid == "free") ident.residuals = ResidualMode::Free;
  else throw ConfigError("[model] residuals must be 'fixed' or 'free'");
  ident.fixed_residual_variance = m.num("residual_variance", 1.0);
  if (!(ident.fixed_residual_variance > 0.0)) throw ConfigError("[model] residual_variance must be positive");
  m.finish();
  try {
    rc.model = ModelSpec(K, std::move(items), ident);
  } catch (const Error& e) {
    throw ConfigError(std::string("[model] ") + e.what());
  }

  auto& p = section(secs, "priors");
  PriorFields defaults;
  read_prior_fields(p, defaults);
  auto& sp = rc.priors.structural;
  sp.loading_loc = p.num("loading_loc", sp.loading_loc);
  sp.loading_scale = p.num("loading_scale", sp.loading_scale);
  sp.lkj_eta = p.num("lkj_eta", sp.lkj_eta);
  sp.factor_sd_scale = p.num("factor_sd_scale", sp.factor_sd_scale);
  sp.residual_sd_scale = p.num("residual_sd_scale", sp.residual_sd_scale);
  sp.flat = p.boolean("structural_flat", sp.flat);
  if (!(sp.loading_scale > 0 && sp.lkj_eta > 0 && sp.factor_sd_scale > 0 && sp.residual_sd_scale > 0))
    throw ConfigError("[priors] scales and lkj_eta must be positive");
  p.finish();
  for (std::size_t i = 0; i < I; ++i) {
    PriorFields f = defaults;
    const std::string name = "prior." + std::to_string(i + 1);
    if (secs.count(name)) {
      auto& s = secs.at(name);
      read_prior_fields(s, f);
      s.finish();
    }
    rc.priors.thresholds.push_back(build_prior(f, rc.model.item(static_cast<int>(i)).n_categories, "[" + name + "]"));
  }
  for (const auto& [name, s] : secs)
    if (name.rfind("prior.", 0) == 0) {
      const std::string idx = name.substr(6);
      bool ok = !idx.empty() && idx.find_first_not_of("0123456789") == std::string::npos;
      if (ok) {
        const auto k = std::stoul(idx);
        ok = k >= 1 && k <= I;
      }
      if (!ok) throw ConfigError("section [" + name + "] does not name an item 1.." + std::to_string(I));
    }

  auto& smp = section(secs, "sampler");
  rc.sampler = read_sampler(smp, SamplerConfig{});
  smp.finish();
  rc.sampler.seed = rc.seed;
  rc.sampler.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path)); }

std::string serialize_run_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[run]\nseed = " << c.seed << "\ndata = " << c.data_path << "\noutput = " << c.output_dir
     << "\ngroup_column = " << c.group_column << "\n\n";
  const auto& m = c.model;
  os << "[model]\nfactors = " << m.n_factors() << "\nitems =";
  for (const auto& it : m.items()) os << ' ' << it.id;
  os << "\nfactor_of =";
  for (const auto& it : m.items()) {
    os << ' ';
    for (std::size_t k = 0; k < it.factors.size(); ++k) os << (k ? "+" : "") << it.factors[k] + 1;
  }
  os << "\ncategories =";
  for (const auto& it : m.items()) os << ' ' << it.n_categories;
  os << "\nreference =";
  for (int k = 0; k < m.n_factors(); ++k) os << ' ' << m.reference_item(k) + 1;
  os << "\nresiduals = " << (m.identification().residuals == ResidualMode::Free ? "free" : "fixed")
     << "\nresidual_variance = " << fmt(m.identification().fixed_residual_variance) << "\n\n";
  const auto& sp = c.priors.structural;
  os << "[priors]\nloading_loc = " << fmt(sp.loading_loc) << "\nloading_scale = " << fmt(sp.loading_scale)
     << "\nlkj_eta = " << fmt(sp.lkj_eta) << "\nfactor_sd_scale = " << fmt(sp.factor_sd_scale)
     << "\nresidual_sd_scale = " << fmt(sp.residual_sd_scale)
     << "\nstructural_flat = " << (sp.flat ? "true" : "false") << "\n\n";
  for (std::size_t i = 0; i < c.priors.thresholds.size(); ++i) {
    os << "[prior." << i + 1 << "]\n";
    write_prior(os, c.priors.thresholds[i]);
    os << '\n';
  }
  write_sampler(os, c.sampler);
  return os.str();
}

std::string text_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& config) { return text_hash(serialize_run_config(config)); }

bool operator==(const RunConfig& a, const RunConfig& b) {
  if (a.seed != b.seed || a.data_path != b.data_path || a.output_dir != b.output_dir ||
      a.group_column != b.group_column)
    return false;
  const auto &ma = a.model, &mb = b.model;
  if (ma.n_factors() != mb.n_factors() || ma.n_items() != mb.n_items()) return false;
  for (int i = 0; i < ma.n_items(); ++i) {
    const auto &x = ma.item(i), &y = mb.item(i);
    if (x.id != y.id || x.factors != y.factors || x.n_categories != y.n_categories || x.is_reference != y.is_reference)
      return false;
  }
  if (ma.identification().residuals != mb.identification().residuals ||
      ma.identification().fixed_residual_variance != mb.identification().fixed_residual_variance)
    return false;
  const auto &sa = a.priors.structural, &sb = b.priors.structural;
  if (sa.loading_loc != sb.loading_loc || sa.loading_scale != sb.loading_scale || sa.lkj_eta != sb.lkj_eta ||
      sa.factor_sd_scale != sb.factor_sd_scale || sa.residual_sd_scale != sb.residual_sd_scale || sa.flat != sb.flat)
    return false;
  if (a.priors.thresholds.size() != b.priors.thresholds.size()) return false;
  for (std::size_t i = 0; i < a.priors.thresholds.size(); ++i)
    if (!same_prior(a.priors.thresholds[i], b.priors.thresholds[i])) return false;
  const auto &x = a.sampler, &y = b.sampler;
  return x.n_chains == y.n_chains && x.iterations == y.iterations && x.warmup == y.warmup &&
         x.target_accept == y.target_accept && x.algorithm == y.algorithm && x.max_depth == y.max_depth &&
         x.integration_time == y.integration_time && x.max_leapfrog == y.max_leapfrog && x.seed == y.seed &&
         x.init_retries == y.init_retries && x.init == y.init && x.init_radius == y.init_radius &&
         x.init_jitter == y.init_jitter && x.threads == y.threads && x.divergence_threshold == y.divergence_threshold;
}

SimCondition parse_condition(const std::string& text) {
  auto secs = parse_sections(text);
  for (const auto& [name, s] : secs)
    if (name != "condition") throw ConfigError("unknown section [" + name + "] in condition file");
  auto& s = section(secs, "condition");
  SimCondition c = read_condition(s);
  s.finish();
  c.validate();
  return c;
}

StudyPlan parse_study_plan(const std::string& text) {
  auto secs = parse_sections(text);
  StudyPlan plan;
  auto& st = section(secs, "study");
  plan.replications = static_cast<int>(st.integer("replications", plan.replications));
  plan.base_seed = static_cast<std::uint64_t>(st.integer("seed", static_cast<long long>(plan.base_seed)));
  plan.workers = static_cast<int>(st.integer("workers", plan.workers));
  const std::string resid = st.str("residuals", "fixed");
  if (resid == "free") plan.identification.residuals = ResidualMode::Free;
  else if (resid != "fixed") throw ConfigError("[study] residuals must be 'fixed' or 'free'");
  const auto prior_names = split_words(st.str("priors", "joint small large"));
  st.finish();
  if (prior_names.empty()) throw ConfigError("[study] priors is empty");

  std::map<int, SimCondition> cells;
  std::set<std::string> used_prior_sections;
  for (auto& [name, s] : secs) {
    if (name == "study") continue;
    if (name == "sampler") {
      plan.sampler = read_sampler(s, plan.sampler);
      s.finish();
    } else if (name.rfind("cell.", 0) == 0) {
      const std::string idx = name.substr(5);
      if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("section [" + name + "] needs a numeric cell index");
      SimCondition c = read_condition(s);
      s.finish();
      cells[std::stoi(idx)] = c;
    } else if (name.rfind("prior.", 0) != 0) {
      throw ConfigError("unknown section [" + name + "] in plan file");
    }
  }
  for (const auto& name : prior_names) {
    const std::string sec = "prior." + name;
    PriorSpec p;
    if (secs.count(sec)) {
      auto& s = secs.at(sec);
      used_prior_sections.insert(sec);
      if (name == "joint" || name == "small" || name == "large") p = PriorSpec::preset(name);
      p.name = name;
      const std::string fam = s.str("family", p.family == PriorSpec::Family::Dirichlet ? "dirichlet" : "sequential");
      if (fam == "dirichlet") p.family = PriorSpec::Family::Dirichlet;
      else if (fam == "sequential") p.family = PriorSpec::Family::Sequential;
      else throw ConfigError("[" + sec + "] family must be 'sequential' or 'dirichlet'");
      p.seq_mu = s.num("seq_mu", p.seq_mu);
      p.seq_sd = s.num("seq_sd", p.seq_sd);
      if (s.has("alpha")) p.alpha = s.list("alpha");
      p.structural.loading_scale = s.num("loading_scale", p.structural.loading_scale);
      p.structural.lkj_eta = s.num("lkj_eta", p.structural.lkj_eta);
      p.structural.factor_sd_scale = s.num("factor_sd_scale", p.structural.factor_sd_scale);
      p.structural.residual_sd_scale = s.num("residual_sd_scale", p.structural.residual_sd_scale);
      s.finish();
      if (!(p.seq_sd > 0.0)) throw ConfigError("[" + sec + "] seq_sd must be positive");
      for (double a : p.alpha)
        if (!(a > 0.0)) throw ConfigError("[" + sec + "] alpha must be positive");
    } else {
      p = PriorSpec::preset(name);
    }
    plan.priors.push_back(std::move(p));
  }
  for (const auto& [name, s] : secs)
    if (name.rfind("prior.", 0) == 0 && !used_prior_sections.count(name))
      throw ConfigError("section [" + name + "] is not listed in [study] priors");
  if (cells.empty()) throw ConfigError("plan has no [cell.N] sections");
  for (auto& [k, c] : cells) plan.cells.push_back(c);
  plan.validate();
  return plan;
}

std::string serialize_condition(const SimCondition& c) {
  std::ostringstream os;
  os << "[condition]\nshape = " << to_string(c.shape) << "\ncategories = " << c.n_categories << "\nn = " << c.n
     << "\nsparse_items = " << c.n_sparse_items << "\nreference = " << to_string(c.reference)
     << "\nseed = " << c.seed << "\nitems = " << c.n_items << "\nfactors = " << c.n_factors
     << "\nloading = " << fmt(c.loading) << "\nfactor_corr = " << fmt(c.factor_corr)
     << "\nresidual_var = " << fmt(c.residual_var) << '\n';
  return os.str();
}

SolverTargets parse_targets(const std::string& text) {
  auto secs = parse_sections(text);
  for (const auto& [name, s] : secs)
    if (name != "targets") throw ConfigError("unknown section [" + name + "] in targets file");
  auto& s = section(secs, "targets");
  SolverTargets t;
  t.mean = parse_number_list(s.required("mean"), "[targets] mean");
  t.variance = parse_number_list(s.required("variance"), "[targets] variance");
  s.finish();
  if (t.mean.size() != t.variance.size()) throw ConfigError("[targets] mean and variance lengths differ");
  return t;
}

ThresholdPrior parse_prior_file(const std::string& text) {
  auto secs = parse_sections(text);
  for (const auto& [name, s] : secs)
    if (name != "prior") throw ConfigError("unknown section [" + name + "] in prior file");
  auto& s = section(secs, "prior");
  PriorFields f;
  read_prior_fields(s, f);
  const long long C = s.integer("categories", 0);
  s.finish();
  int n_categories = static_cast<int>(C);
  if (n_categories == 0) {
    // Infer from the longest list given.
    const std::size_t t = std::max(f.seq_mu.size(), f.seq_dispersion.size());
    n_categories = f.family == "dirichlet" ? static_cast<int>(f.alpha.size()) : static_cast<int>(t) + 1;
  }
  if (n_categories < 2) throw ConfigError("[prior] categories must be at least 2");
  if (f.family == "flat") throw ConfigError("[prior] the flat family has no proper prior to sample");
  return build_prior(f, n_categories, "[prior]");
}

}  // namespace ordfa
