#include "ordfa/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include "CLI11.hpp"

#include "ordfa/config.hpp"
#include "ordfa/dataset_io.hpp"
#include "ordfa/diagnostics.hpp"
#include "ordfa/errors.hpp"
#include "ordfa/harness.hpp"
#include "ordfa/posterior.hpp"

namespace ordfa {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  return os;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string num(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int cmd_simulate(const std::string& condition_path, const std::string& out_dir, std::ostream& out) {
  const std::string text = read_text_file(condition_path);
  const SimCondition cond = parse_condition(text);
  const PopulationParams pop = make_population(cond);
  const DatasetMatrix data = generate_dataset(pop, cond.n, cond.seed);
  std::vector<std::string> ids;
  for (int i = 1; i <= cond.n_items; ++i) ids.push_back("item_" + std::to_string(i));
  const std::string prov = provenance_line(cond.seed, text_hash(serialize_condition(cond)));

  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  {
    auto os = open_out(dir / "data.csv");
    write_dataset_csv(os, ids, data, prov);
  }
  {
    auto os = open_out(dir / "truth.json");
    os << population_json(cond, pop, ids, prov);
  }
  // A ready-to-run fit configuration for the generated data.
  RunConfig rc;
  std::vector<ItemSpec> items;
  for (int i = 0; i < cond.n_items; ++i) {
    ItemSpec it;
    it.id = ids[static_cast<std::size_t>(i)];
    it.factors = {pop.item_factor[static_cast<std::size_t>(i)]};
    it.n_categories = cond.n_categories;
    it.is_reference = std::count(pop.reference_items.begin(), pop.reference_items.end(), i) > 0;
    items.push_back(std::move(it));
  }
  rc.model = ModelSpec(cond.n_factors, std::move(items));
  rc.priors = PriorSpec::joint().build(rc.model);
  rc.data_path = "data.csv";
  rc.output_dir = "fit";
  rc.seed = cond.seed;
  rc.sampler.seed = cond.seed;
  {
    auto os = open_out(dir / "fit.ini");
    os << "; " << prov << '\n' << serialize_run_config(rc);
  }
  out << "simulated " << data.n_rows() << " rows x " << cond.n_items << " items (" << cell_label(cond) << ")\n"
      << format_category_counts(ids, data) << "wrote " << (dir / "data.csv").string() << ", "
      << (dir / "truth.json").string() << ", " << (dir / "fit.ini").string() << '\n';
  return 0;
}

void fit_one(const RunConfig& rc, DatasetMatrix data, std::uint64_t seed, const fs::path& draws_path,
             const fs::path& summary_path, const std::string& prov, std::ostream& out) {
  const PosteriorModel model(rc.model, std::move(data), rc.priors);
  SamplerConfig sc = rc.sampler;
  sc.seed = seed;
  const PosteriorDraws draws = run_chains(model, sc);
  const auto rows = summarize(draws);
  {
    auto os = open_out(draws_path);
    write_draws_csv(os, draws, prov);
  }
  {
    auto os = open_out(summary_path);
    write_summary_csv(os, rows, prov);
  }
  int unconverged = 0;
  for (const auto& r : rows) unconverged += r.converged() ? 0 : 1;
  out << "  " << draws.n_chains << " chains x " << draws.n_draws << " draws, " << draws.total_divergent()
      << " divergent, " << unconverged << " of " << rows.size() << " parameters with R-hat >= 1.1 or undefined\n"
      << "  wrote " << draws_path.string() << ", " << summary_path.string() << '\n';
}

int cmd_fit(const std::string& config_path, const std::string& data_override, const std::string& out_override,
            std::ostream& out, std::ostream& err) {
  RunConfig rc = load_run_config(config_path);
  // Paths inside the config are relative to its directory; overrides to the working directory.
  const fs::path base = fs::path(config_path).parent_path();
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_relative() ? (base / p).string() : p; };
  rc.data_path = data_override.empty() ? (rc.data_path.empty() ? "" : resolve(rc.data_path)) : data_override;
  rc.output_dir = out_override.empty() ? resolve(rc.output_dir) : out_override;
  if (rc.data_path.empty()) throw ConfigError("[run] data is not set");
  std::vector<std::string> ids;
  for (const auto& it : rc.model.items()) ids.push_back(it.id);
  const DatasetFile file = read_dataset(rc.data_path, ids, rc.model.category_counts(), rc.group_column);
  for (const auto& w : file.warnings) err << "warning: " << w << '\n';
  out << "category counts (" << file.data.n_rows() << " rows)\n" << format_category_counts(ids, file.data);

  const std::string hash = config_hash(rc);
  const std::string prov = provenance_line(rc.seed, hash);
  ensure_dir(rc.output_dir);
  const fs::path dir(rc.output_dir);
  {
    auto os = open_out(dir / "config.ini");
    os << "; " << prov << '\n' << serialize_run_config(rc);
  }
  if (rc.group_column.empty()) {
    fit_one(rc, file.data, rc.seed, dir / "draws.csv", dir / "summary.csv", prov, out);
    return 0;
  }
  std::map<int, std::vector<int>> rows_of;
  for (std::size_t n = 0; n < file.groups.size(); ++n) rows_of[file.groups[n]].push_back(static_cast<int>(n));
  for (const auto& [g, rows] : rows_of) {
    const DatasetMatrix sub = file.data.select_rows(rows);
    out << "group " << g << " (" << rows.size() << " rows)\n" << format_category_counts(ids, sub);
    const std::string tag = "_group" + std::to_string(g);
    fit_one(rc, sub, derive_seed(rc.seed, static_cast<std::uint64_t>(g)), dir / ("draws" + tag + ".csv"),
            dir / ("summary" + tag + ".csv"), prov + " group=" + std::to_string(g), out);
  }
  return 0;
}

int cmd_mc_study(const std::string& plan_path, const std::string& out_dir, int workers, std::ostream& out) {
  const std::string text = read_text_file(plan_path);
  StudyPlan plan = parse_study_plan(text);
  if (workers > 0) plan.workers = workers;
  const std::string prov = provenance_line(plan.base_seed, text_hash(text));
  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  const std::size_t total = plan.cells.size() * plan.priors.size() * static_cast<std::size_t>(plan.replications);
  std::size_t done = 0;
  const StudyResult result = run_study(plan, [&](const ReplicationRecord& r) {
    ++done;
    out << "[" << done << "/" << total << "] cell " << r.cell << " rep " << r.replication << " prior "
        << plan.priors[static_cast<std::size_t>(r.prior)].name << ": "
        << (r.completed ? "ok" : "aborted (" + r.error + ")") << " " << num(r.seconds, 1) << " s\n";
    out.flush();
  });
  {
    auto os = open_out(dir / "records.csv");
    write_records_csv(os, plan, result, prov);
  }
  {
    auto os = open_out(dir / "cells.csv");
    write_cells_csv(os, result, prov);
  }
  const std::string tables = format_tables(plan, result);
  {
    auto os = open_out(dir / "tables.txt");
    os << "# " << prov << "\n\n" << tables;
  }
  out << '\n' << tables;
  return 0;
}

int cmd_prior_predict(const std::string& prior_path, int n_draws, std::uint64_t seed, const std::string& out_path,
                      std::ostream& out) {
  if (n_draws < 1) throw ConfigError("--draws must be positive");
  const std::string text = read_text_file(prior_path);
  const ThresholdPrior prior = parse_prior_file(text);
  std::mt19937_64 rng(seed);
  std::ofstream file;
  if (!out_path.empty()) file = open_out(out_path);
  std::ostream& os = out_path.empty() ? out : file;
  os << "# " << provenance_line(seed, text_hash(text)) << '\n';

  std::size_t T = 0;
  double anchor = 0.0;
  if (const auto* s = std::get_if<SequentialThresholdPrior>(&prior)) T = s->mu_star.size();
  if (const auto* d = std::get_if<InducedDirichletPrior>(&prior)) {
    T = d->alpha.size() - 1;
    anchor = d->anchor;
  }
  os << "draw";
  for (std::size_t c = 1; c <= T; ++c) os << ",tau." << c;
  for (std::size_t c = 1; c <= T + 1; ++c) os << ",p." << c;
  os << '\n';
  std::normal_distribution<double> z(0.0, 1.0);
  char buf[32];
  for (int n = 0; n < n_draws; ++n) {
    std::vector<double> tau;
    if (const auto* s = std::get_if<SequentialThresholdPrior>(&prior)) {
      std::vector<double> star(T);
      for (std::size_t c = 0; c < T; ++c) star[c] = s->mu_star[c] + s->sd(c) * z(rng);
      tau = seq_transform(star);
    } else {
      const auto& d = std::get<InducedDirichletPrior>(prior);
      tau = sample_induced_thresholds(d.alpha, d.anchor, rng);
    }
    os << n + 1;
    bool ordered = true;
    for (std::size_t c = 0; c < T; ++c) {
      std::snprintf(buf, sizeof buf, "%.10g", tau[c]);
      os << ',' << buf;
      ordered = ordered && std::isfinite(tau[c]) && (c == 0 || tau[c] > tau[c - 1]);
    }
    if (ordered) {
      for (double p : induced_probabilities(tau, anchor)) {
        std::snprintf(buf, sizeof buf, "%.10g", p);
        os << ',' << buf;
      }
    } else {
      for (std::size_t c = 0; c <= T; ++c) os << ",NA";
    }
    os << '\n';
  }
  return 0;
}

int cmd_prior_solve(const std::string& targets_path, std::ostream& out) {
  const SolverTargets t = parse_targets(read_text_file(targets_path));
  const SequentialThresholdPrior p = solve_informative_sequential(t.mean, t.variance);
  out << "component  target_mean  target_var  mu_star  variance  sd\n";
  for (std::size_t c = 0; c < p.mu_star.size(); ++c) {
    char line[160];
    std::snprintf(line, sizeof line, "tau*_%-4zu  %11.4f  %10.4f  %7.4f  %8.4f  %.4f\n", c + 1, t.mean[c],
                  t.variance[c], p.mu_star[c], p.dispersion[c], p.sd(c));
    out << line;
  }
  out << "\nprior:";
  for (std::size_t c = 0; c < p.mu_star.size(); ++c)
    out << (c ? "," : "") << " tau*_" << c + 1 << " ~ Normal(" << num(p.mu_star[c], 2) << ", " << num(p.dispersion[c], 2)
        << ")";
  out << "  (mean, variance)\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian item factor analysis for ordered-categorical indicators", "ordfa"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(library_version()));

  std::string condition_path, sim_out;
  auto* sim = app.add_subcommand("simulate", "Generate a dataset and its truth sidecar from a condition file");
  sim->add_option("--condition", condition_path, "INI file with a [condition] section")->required();
  sim->add_option("--out", sim_out, "Output directory")->required();

  std::string config_path, data_override, out_override;
  auto* fit = app.add_subcommand("fit", "Fit the model to a dataset");
  fit->add_option("--config", config_path, "Run configuration (INI)")->required();
  fit->add_option("--data", data_override, "Override [run] data");
  fit->add_option("--out", out_override, "Override [run] output");

  std::string plan_path, study_out = "mc_out";
  int workers = 0;
  auto* mc = app.add_subcommand("mc-study", "Run a Monte Carlo study plan");
  mc->add_option("--plan", plan_path, "Plan file (INI)")->required();
  mc->add_option("--out", study_out, "Results directory")->capture_default_str();
  mc->add_option("--workers", workers, "Override [study] workers");

  std::string prior_path, predict_out;
  int n_draws = 10000;
  std::uint64_t predict_seed = 1;
  auto* pp = app.add_subcommand("prior-predict", "Sample thresholds implied by one item's prior");
  pp->add_option("--prior", prior_path, "INI file with a [prior] section")->required();
  pp->add_option("--draws", n_draws, "Number of draws")->capture_default_str();
  pp->add_option("--seed", predict_seed, "RNG seed")->capture_default_str();
  pp->add_option("--out", predict_out, "Output CSV (default: standard output)");

  std::string targets_path;
  auto* ps = app.add_subcommand("prior-solve", "Solve for a sequential prior from threshold moment targets");
  ps->add_option("--targets", targets_path, "INI file with a [targets] section")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << library_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  try {
    if (*sim) return cmd_simulate(condition_path, sim_out, out);
    if (*fit) return cmd_fit(config_path, data_override, out_override, out, err);
    if (*mc) return cmd_mc_study(plan_path, study_out, workers, out);
    if (*pp) return cmd_prior_predict(prior_path, n_draws, predict_seed, predict_out, out);
    if (*ps) return cmd_prior_solve(targets_path, out);
  } catch (const SamplerError& e) {
    err << "sampler aborted: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace ordfa
