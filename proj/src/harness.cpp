#include "ordfa/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "ordfa/diagnostics.hpp"
#include "ordfa/errors.hpp"
#include "ordfa/posterior.hpp"

namespace ordfa {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt_fixed(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "NA"; }

std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt_csv(const std::optional<double>& v) { return v ? csv_num(*v) : "NA"; }

ParamClass classify(const std::string& name, const PopulationParams& pop) {
  if (name.rfind("lambda.", 0) == 0) return ParamClass::Loading;
  if (name.rfind("theta.", 0) == 0) return ParamClass::Residual;
  int a = 0, b = 0;
  if (std::sscanf(name.c_str(), "phi.%d.%d", &a, &b) == 2)
    return a == b ? ParamClass::FactorVariance : ParamClass::FactorCovariance;
  if (std::sscanf(name.c_str(), "tau.%d.%d", &a, &b) == 2) {
    const bool empty = pop.sparse[static_cast<std::size_t>(a - 1)] && b == 1;
    return empty ? ParamClass::EmptyThreshold : ParamClass::Threshold;
  }
  throw Error("cannot classify parameter '" + name + "'");
}

// Text table with a header row and left-aligned first columns.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  std::string str(int label_columns) const {
    std::vector<std::size_t> w;
    for (const auto& r : rows_) {
      if (w.size() < r.size()) w.resize(r.size(), 0);
      for (std::size_t j = 0; j < r.size(); ++j) w[j] = std::max(w[j], r[j].size());
    }
    std::ostringstream os;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const auto& r = rows_[k];
      for (std::size_t j = 0; j < r.size(); ++j) {
        const std::string pad(w[j] - r[j].size(), ' ');
        if (j) os << "  ";
        if (static_cast<int>(j) < label_columns) os << r[j] << pad;
        else os << pad << r[j];
      }
      os << '\n';
      if (k == 0) {
        std::size_t total = 0;
        for (std::size_t j = 0; j < w.size(); ++j) total += w[j] + (j ? 2 : 0);
        os << std::string(total, '-') << '\n';
      }
    }
    return os.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

const ParamClass kReportClasses[] = {ParamClass::Loading, ParamClass::FactorVariance, ParamClass::FactorCovariance,
                                     ParamClass::Residual, ParamClass::Threshold, ParamClass::EmptyThreshold};

}  // namespace

PriorConfig PriorSpec::build(const ModelSpec& spec) const {
  PriorConfig pc;
  pc.structural = structural;
  for (int i = 0; i < spec.n_items(); ++i) {
    const auto T = static_cast<std::size_t>(spec.n_thresholds(i));
    if (family == Family::Sequential) {
      pc.thresholds.emplace_back(SequentialThresholdPrior::uniform(T, seq_mu, seq_sd));
    } else {
      InducedDirichletPrior p;
      p.alpha = alpha.empty() ? std::vector<double>(T + 1, 1.0) : alpha;
      if (p.alpha.size() != T + 1)
        throw ConfigError("prior '" + name + "': alpha has " + std::to_string(p.alpha.size()) +
                          " entries but the item has " + std::to_string(T + 1) + " categories");
      pc.thresholds.emplace_back(std::move(p));
    }
  }
  return pc;
}

PriorSpec PriorSpec::joint() {
  PriorSpec p;
  p.name = "joint";
  p.family = Family::Dirichlet;
  return p;
}

PriorSpec PriorSpec::small_variance() {
  PriorSpec p;
  p.name = "small";
  p.seq_sd = 1.5;
  return p;
}

PriorSpec PriorSpec::large_variance() {
  PriorSpec p;
  p.name = "large";
  p.seq_sd = 1e5;
  return p;
}

PriorSpec PriorSpec::preset(const std::string& name) {
  if (name == "joint") return joint();
  if (name == "small") return small_variance();
  if (name == "large") return large_variance();
  throw ConfigError("unknown prior preset '" + name + "' (joint, small, large)");
}

void StudyPlan::validate() const {
  if (cells.empty()) throw ConfigError("study plan has no cells");
  if (priors.empty()) throw ConfigError("study plan has no priors");
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  std::set<std::string> names;
  for (const auto& p : priors)
    if (!names.insert(p.name).second) throw ConfigError("prior '" + p.name + "' listed twice");
  for (const auto& c : cells) c.validate();
  sampler.validate();
}

const char* to_string(ParamClass c) {
  switch (c) {
    case ParamClass::Loading: return "loading";
    case ParamClass::FactorVariance: return "factor_variance";
    case ParamClass::FactorCovariance: return "factor_covariance";
    case ParamClass::Residual: return "residual";
    case ParamClass::Threshold: return "threshold";
    case ParamClass::EmptyThreshold: return "empty_threshold";
    case ParamClass::AllThresholds: return "all_thresholds";
  }
  return "?";
}

std::uint64_t replication_data_seed(std::uint64_t base, int cell, int replication) {
  return derive_seed(base, static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(replication));
}

std::uint64_t replication_sampler_seed(std::uint64_t data_seed, int prior) {
  return derive_seed(data_seed, static_cast<std::uint64_t>(prior) + 1);
}

ReplicationRecord run_replication(const StudyPlan& plan, int cell, int replication, int prior) {
  ReplicationRecord rec;
  rec.cell = cell;
  rec.replication = replication;
  rec.prior = prior;
  rec.data_seed = replication_data_seed(plan.base_seed, cell, replication);
  rec.sampler_seed = replication_sampler_seed(rec.data_seed, prior);
  const auto start = std::chrono::steady_clock::now();
  try {
    const SimCondition& cond = plan.cells[static_cast<std::size_t>(cell)];
    const PopulationParams pop = make_population(cond);
    DatasetMatrix data = generate_dataset(pop, cond.n, rec.data_seed);
    const ModelSpec spec = model_spec_for(pop, plan.identification);
    const PriorConfig priors = plan.priors[static_cast<std::size_t>(prior)].build(spec);
    const PosteriorModel model(spec, std::move(data), priors);
    SamplerConfig sc = plan.sampler;
    sc.seed = rec.sampler_seed;
    const PosteriorDraws draws = run_chains(model, sc);
    const auto truth = truth_values(pop, spec);
    rec.divergent = draws.total_divergent();
    for (const auto& s : summarize(draws)) {
      ParamRecord p;
      p.name = s.name;
      p.cls = classify(s.name, pop);
      p.truth = truth.at(s.name);
      p.mean = s.mean;
      p.q025 = s.q025;
      p.q975 = s.q975;
      p.rhat = s.rhat;
      p.ess = s.ess;
      p.covered = coverage_flag(s, p.truth);
      rec.params.push_back(std::move(p));
    }
    rec.completed = true;
  } catch (const SamplerError& e) {
    rec.error = e.what();
  } catch (const DataError& e) {
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

CellResult aggregate_cell(const StudyPlan& plan, int cell, int prior, const std::vector<ReplicationRecord>& records) {
  CellResult out;
  out.cell = cell;
  out.prior = prior;
  out.condition = plan.cells[static_cast<std::size_t>(cell)];
  out.prior_name = plan.priors[static_cast<std::size_t>(prior)].name;

  struct Acc {
    int n = 0, covered = 0, rhat_n = 0, rhat_below = 0, ess_n = 0;
    double width = 0.0, rhat = 0.0, ess = 0.0;
  };
  std::array<Acc, kParamClassCount> acc{};
  for (const auto& r : records) {
    if (r.cell != cell || r.prior != prior) continue;
    if (!r.completed) {
      ++out.skipped;
      continue;
    }
    ++out.completed;
    for (const auto& p : r.params) {
      std::vector<ParamClass> targets{p.cls};
      if (p.cls == ParamClass::Threshold || p.cls == ParamClass::EmptyThreshold)
        targets.push_back(ParamClass::AllThresholds);
      for (ParamClass c : targets) {
        Acc& a = acc[static_cast<std::size_t>(c)];
        ++a.n;
        a.covered += p.covered ? 1 : 0;
        a.width += p.q975 - p.q025;
        if (p.rhat) {
          ++a.rhat_n;
          a.rhat += *p.rhat;
          a.rhat_below += *p.rhat < 1.1 ? 1 : 0;
        }
        if (p.ess) {
          ++a.ess_n;
          a.ess += *p.ess;
        }
      }
    }
  }
  for (int c = 0; c < kParamClassCount; ++c) {
    const Acc& a = acc[static_cast<std::size_t>(c)];
    ClassStats& s = out.stats[static_cast<std::size_t>(c)];
    s.count = a.n;
    if (a.n == 0) continue;
    const auto cls = static_cast<ParamClass>(c);
    // Empty-category thresholds are generated at -15 and are not meant to be covered.
    if (cls != ParamClass::EmptyThreshold && cls != ParamClass::AllThresholds)
      s.coverage = 100.0 * a.covered / a.n;
    s.avg_ci_width = a.width / a.n;
    if (a.rhat_n) s.avg_rhat = a.rhat / a.rhat_n;
    s.pct_rhat_below = 100.0 * a.rhat_below / a.n;
    if (a.ess_n) s.avg_ess = a.ess / a.ess_n;
  }
  return out;
}

StudyResult run_study(const StudyPlan& plan, const ProgressFn& progress) {
  plan.validate();
  const int n_cells = static_cast<int>(plan.cells.size());
  const int n_priors = static_cast<int>(plan.priors.size());
  const std::size_t n_tasks = static_cast<std::size_t>(n_cells) * plan.replications * n_priors;

  StudyResult result;
  result.records.resize(n_tasks);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      const int prior = static_cast<int>(t % n_priors);
      const int rep = static_cast<int>((t / n_priors) % plan.replications);
      const int cell = static_cast<int>(t / (static_cast<std::size_t>(n_priors) * plan.replications));
      result.records[t] = run_replication(plan, cell, rep, prior);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(result.records[t]);
      }
    }
  };
  const int n_workers = std::min<int>(plan.workers, static_cast<int>(n_tasks));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (int c = 0; c < n_cells; ++c)
    for (int p = 0; p < n_priors; ++p) result.cells.push_back(aggregate_cell(plan, c, p, result.records));
  return result;
}

std::string cell_label(const SimCondition& c) {
  std::string s = to_string(c.shape);
  s += " (" + std::to_string(c.n_sparse_items) + ") C=" + std::to_string(c.n_categories) + " N=" + std::to_string(c.n);
  if (c.n_sparse_items > 0) s += std::string(" ref=") + to_string(c.reference);
  return s;
}

void write_records_csv(std::ostream& os, const StudyPlan& plan, const StudyResult& result,
                       const std::string& provenance) {
  if (!provenance.empty()) os << "# " << provenance << '\n';
  os << "cell,replication,prior,data_seed,sampler_seed,status,seconds,divergent,parameter,class,truth,mean,"
        "q2.5,q97.5,ci_width,rhat,ess,covered\n";
  for (const auto& r : result.records) {
    const std::string head = std::to_string(r.cell) + ',' + std::to_string(r.replication) + ',' +
                             plan.priors[static_cast<std::size_t>(r.prior)].name + ',' +
                             std::to_string(r.data_seed) + ',' + std::to_string(r.sampler_seed) + ',';
    if (!r.completed) {
      std::string msg = r.error;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      os << head << "aborted," << csv_num(r.seconds) << ",NA," << msg << ",NA,NA,NA,NA,NA,NA,NA,NA,NA\n";
      continue;
    }
    for (const auto& p : r.params)
      os << head << "ok," << csv_num(r.seconds) << ',' << r.divergent << ',' << p.name << ',' << to_string(p.cls)
         << ',' << csv_num(p.truth) << ',' << csv_num(p.mean) << ',' << csv_num(p.q025) << ',' << csv_num(p.q975)
         << ',' << csv_num(p.q975 - p.q025) << ',' << opt_csv(p.rhat) << ',' << opt_csv(p.ess) << ','
         << (p.covered ? 1 : 0) << '\n';
  }
}

void write_cells_csv(std::ostream& os, const StudyResult& result, const std::string& provenance) {
  if (!provenance.empty()) os << "# " << provenance << '\n';
  os << "cell,shape,categories,n,sparse_items,reference,prior,completed,skipped,class,count,coverage,"
        "avg_ci_width,avg_rhat,pct_rhat_below_1.1,avg_ess\n";
  for (const auto& c : result.cells) {
    const auto& k = c.condition;
    for (int j = 0; j < kParamClassCount; ++j) {
      const ClassStats& s = c.stats[static_cast<std::size_t>(j)];
      if (s.count == 0) continue;
      os << c.cell << ',' << to_string(k.shape) << ',' << k.n_categories << ',' << k.n << ',' << k.n_sparse_items
         << ',' << to_string(k.reference) << ',' << c.prior_name << ',' << c.completed << ',' << c.skipped << ','
         << to_string(static_cast<ParamClass>(j)) << ',' << s.count << ',' << opt_csv(s.coverage) << ','
         << csv_num(s.avg_ci_width) << ',' << opt_csv(s.avg_rhat) << ',' << csv_num(s.pct_rhat_below) << ','
         << opt_csv(s.avg_ess) << '\n';
    }
  }
}

std::string format_tables(const StudyPlan& plan, const StudyResult& result) {
  std::ostringstream os;
  const auto find = [&](int cell, int prior) -> const CellResult& {
    return result.cells[static_cast<std::size_t>(cell) * plan.priors.size() + static_cast<std::size_t>(prior)];
  };
  const int n_cells = static_cast<int>(plan.cells.size());
  const int n_priors = static_cast<int>(plan.priors.size());

  os << "Threshold convergence\n\n";
  TextTable conv({"Condition", "Prior", "Done", "Skipped", "Avg. R-hat", "% R-hat<1.1", "Avg. ESS", "Empty ESS"});
  for (int c = 0; c < n_cells; ++c)
    for (int p = 0; p < n_priors; ++p) {
      const CellResult& r = find(c, p);
      const ClassStats& t = r.of(ParamClass::AllThresholds);
      const ClassStats& e = r.of(ParamClass::EmptyThreshold);
      conv.add({p == 0 ? cell_label(r.condition) : "", r.prior_name, std::to_string(r.completed),
                std::to_string(r.skipped), opt_fixed(t.avg_rhat, 2), fixed(t.pct_rhat_below, 1),
                opt_fixed(t.avg_ess, 1), e.count ? opt_fixed(e.avg_ess, 1) : "-"});
    }
  os << conv.str(2) << '\n';

  os << "Coverage rate (%) and average CI width\n"
        "(* empty-category first thresholds are generated at -15 and excluded from coverage)\n\n";
  std::vector<std::string> header{"Parameter", "Condition"};
  for (const auto& p : plan.priors) header.push_back("Cov " + p.name);
  for (const auto& p : plan.priors) header.push_back("Width " + p.name);
  TextTable cov(header);
  for (ParamClass cls : kReportClasses) {
    bool first = true;
    for (int c = 0; c < n_cells; ++c) {
      if (find(c, 0).of(cls).count == 0) continue;
      std::vector<std::string> row{first ? to_string(cls) : "", cell_label(plan.cells[static_cast<std::size_t>(c)])};
      for (int p = 0; p < n_priors; ++p) {
        const auto& s = find(c, p).of(cls);
        row.push_back(s.count == 0 ? "-" : s.coverage ? fixed(*s.coverage, 1) : "*");
      }
      for (int p = 0; p < n_priors; ++p) {
        const auto& s = find(c, p).of(cls);
        row.push_back(s.count ? fixed(s.avg_ci_width, 2) : "-");
      }
      cov.add(std::move(row));
      first = false;
    }
  }
  os << cov.str(2);

  // Reference split over sparse cells, pooling cells that share a reference choice.
  std::set<ReferenceChoice> refs;
  for (const auto& c : plan.cells)
    if (c.n_sparse_items > 0) refs.insert(c.reference);
  if (refs.size() > 1) {
    os << "\nReference indicator split (sparse cells pooled)\n\n";
    std::vector<std::string> h{"Parameter", "Reference"};
    for (const auto& p : plan.priors) h.push_back("Cov " + p.name);
    for (const auto& p : plan.priors) h.push_back("Width " + p.name);
    TextTable split(h);
    for (ParamClass cls : kReportClasses) {
      bool first = true;
      for (ReferenceChoice ref : {ReferenceChoice::Sparse, ReferenceChoice::NonSparse}) {
        std::vector<std::string> row{first ? to_string(cls) : "", to_string(ref)};
        std::vector<std::string> widths;
        bool any = false;
        for (int p = 0; p < n_priors; ++p) {
          double covered = 0.0, width = 0.0;
          int n = 0;
          bool has_cov = false;
          for (int c = 0; c < n_cells; ++c) {
            const auto& cond = plan.cells[static_cast<std::size_t>(c)];
            if (cond.n_sparse_items == 0 || cond.reference != ref) continue;
            const auto& s = find(c, p).of(cls);
            if (s.count == 0) continue;
            n += s.count;
            width += s.avg_ci_width * s.count;
            if (s.coverage) {
              has_cov = true;
              covered += *s.coverage * s.count;
            }
          }
          any = any || n > 0;
          row.push_back(n == 0 ? "-" : has_cov ? fixed(covered / n, 1) : "*");
          widths.push_back(n == 0 ? "-" : fixed(width / n, 2));
        }
        if (!any) continue;
        row.insert(row.end(), widths.begin(), widths.end());
        split.add(std::move(row));
        first = false;
      }
    }
    os << split.str(2);
  }
  return os.str();
}

}  // namespace ordfa
