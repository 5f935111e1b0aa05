#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hsforest/commands.hpp"
#include "hsforest/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

void add_chain_options(CLI::App& app, hsforest::ChainConfig& c) {
  app.add_option("--m-f", c.m_f, "Trees in the prognostic (or single) forest")->capture_default_str();
  app.add_option("--m-tau", c.m_tau, "Trees in the treatment forest")->capture_default_str();
  app.add_option("--k", c.k, "Shrinkage level; half-Cauchy scale is k/sqrt(m)")->capture_default_str();
  app.add_option("--a", c.a, "Tree prior base split probability")->capture_default_str();
  app.add_option("--b", c.b, "Tree prior depth decay")->capture_default_str();
  app.add_option("--max-depth", c.max_depth, "Maximum tree depth, negative for none")->capture_default_str();
  app.add_option("--p-grow", c.moves.p_grow, "GROW move probability")->capture_default_str();
  app.add_option("--p-prune", c.moves.p_prune, "PRUNE move probability")->capture_default_str();
  app.add_option("--p-change", c.moves.p_change, "CHANGE move probability")->capture_default_str();
  app.add_option("--omega-f", c.omega_f, "Leaf variance scale, prognostic forest")->capture_default_str();
  app.add_option("--omega-tau", c.omega_tau, "Leaf variance scale, treatment forest")->capture_default_str();
  app.add_option("--omega-single", c.omega_single, "Leaf variance scale, single forest")->capture_default_str();
  app.add_option("--iterations", c.iterations, "Total iterations, burn-in included")->capture_default_str();
  app.add_option("--burnin", c.burnin, "Burn-in iterations")->capture_default_str();
  app.add_option("--thin", c.thin, "Keep every thin-th draw after burn-in")->capture_default_str();
  app.add_option("--nu-prior", c.nu_prior, "Degrees of freedom of the error variance prior")->capture_default_str();
  app.add_option("--psi-prior", c.psi_prior, "Scale of the error variance prior")->capture_default_str();
  app.add_flag("--invariant-codes", c.invariant_codes, "Use sampled treatment codes b0, b1");
  app.add_flag("!--no-propensity", c.propensity, "Do not append an estimated propensity score");
  app.add_option("--propensity-trees", c.propensity_trees)->capture_default_str();
  app.add_option("--propensity-iterations", c.propensity_iterations)->capture_default_str();
  app.add_option("--propensity-burnin", c.propensity_burnin)->capture_default_str();
  app.add_option("--progress-every", c.progress_every, "Report progress every N iterations (0: never)")
      ->capture_default_str();
}

struct ScenarioArgs {
  std::string family = "linear";
  std::string error = "normal";
  std::optional<double> rho;
};

void add_scenario_options(CLI::App& app, hsforest::ScenarioSpec& s, ScenarioArgs& a) {
  app.add_option("--family", a.family,
                 "linear, friedman, homogeneous, null, dense-homogeneous, dense-heterogeneous")
      ->capture_default_str();
  app.add_option("--n", s.n, "Rows")->capture_default_str();
  app.add_option("--p", s.p, "Covariates")->capture_default_str();
  app.add_option("--noise-var", s.noise_var, "Variance of the log-time error")->capture_default_str();
  app.add_option("--censoring", s.censor_target, "Target censoring rate")->capture_default_str();
  app.add_option("--error", a.error, "normal, gumbel or logistic")->capture_default_str();
  app.add_option("--copula-rho", a.rho, "Block Gaussian copula correlation");
  app.add_option("--sparsity-f", s.sparsity_f)->capture_default_str();
  app.add_option("--sparsity-tau", s.sparsity_tau)->capture_default_str();
}

void resolve(hsforest::ScenarioSpec& s, const ScenarioArgs& a) {
  s.family = hsforest::parse_family(a.family);
  s.error = hsforest::parse_error(a.error);
  s.copula_rho = a.rho;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") + 1 - b);
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// Expands `--config FILE` into `--key=value` arguments. Keys already present on the
// command line are skipped so explicit flags win. Blank lines and `#` comments are ignored.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw hsforest::InputError("cannot open config file '" + path + "'");
  std::vector<std::string> extra;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw hsforest::InputError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || key == "config") {
      throw hsforest::InputError("config line " + std::to_string(line_no) + ": invalid key");
    }
    if (!given_on_command_line(args, key)) extra.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Horseshoe forests for causal survival analysis"};
  app.require_subcommand(1);
  std::string config_path;

  hsforest::ScenarioSpec sim_spec;
  ScenarioArgs sim_args;
  std::string sim_data = "data.csv";
  std::string sim_truth = "truth.csv";
  auto* simulate = app.add_subcommand("simulate", "Generate a simulated dataset with ground truth");
  simulate->add_option("--config", config_path, "Flat key=value file with long option names");
  add_scenario_options(*simulate, sim_spec, sim_args);
  simulate->add_option("--seed", sim_spec.seed)->capture_default_str();
  simulate->add_option("--out-data", sim_data)->capture_default_str();
  simulate->add_option("--out-truth", sim_truth)->capture_default_str();

  hsforest::FitOptions fit_opts;
  std::string outcome = "survival";
  bool fit_progress = false;
  auto* fit = app.add_subcommand("fit", "Fit a dataset and write summary.json and draws.csv");
  fit->add_option("--config", config_path, "Flat key=value file with long option names");
  fit->add_option("--data", fit_opts.data_path, "Dataset CSV")->required();
  fit->add_option("--out-dir", fit_opts.out_dir)->capture_default_str();
  fit->add_flag("--single", fit_opts.single, "Single horseshoe forest on the outcome");
  fit->add_option("--outcome", outcome, "survival, continuous or binary")->capture_default_str();
  fit->add_option("--level", fit_opts.level, "Credible level")->capture_default_str();
  fit->add_option("--seed", fit_opts.chain.seed)->capture_default_str();
  fit->add_flag("--progress", fit_progress, "Print progress to stderr");
  add_chain_options(*fit, fit_opts.chain);

  hsforest::ReplicateOptions rep_opts;
  ScenarioArgs rep_args;
  std::uint64_t rep_seed = 0;
  auto* replicate = app.add_subcommand("replicate", "Repeated simulate-fit-evaluate runs");
  replicate->add_option("--config", config_path, "Flat key=value file with long option names");
  add_scenario_options(*replicate, rep_opts.spec, rep_args);
  add_chain_options(*replicate, rep_opts.chain);
  replicate->add_option("--seed", rep_seed, "Base seed; rep r uses seed + r")->capture_default_str();
  replicate->add_option("--reps", rep_opts.reps)->capture_default_str();
  replicate->add_option("--threads", rep_opts.threads)->capture_default_str();
  replicate->add_option("--level", rep_opts.level)->capture_default_str();
  replicate->add_option("--out", rep_opts.out_path)->capture_default_str();

  hsforest::CvOptions cv_opts;
  auto* cv = app.add_subcommand("cv", "Cross-validated C-index over a grid of k");
  cv->add_option("--config", config_path, "Flat key=value file with long option names");
  cv->add_option("--data", cv_opts.data_path, "Dataset CSV")->required();
  cv->add_option("--k-grid", cv_opts.k_grid, "Shrinkage levels to compare")->delimiter(',');
  cv->add_option("--folds", cv_opts.folds)->capture_default_str();
  cv->add_option("--repeats", cv_opts.repeats)->capture_default_str();
  cv->add_option("--threads", cv_opts.threads)->capture_default_str();
  cv->add_option("--out", cv_opts.out_path)->capture_default_str();
  cv->add_option("--seed", cv_opts.chain.seed)->capture_default_str();
  add_chain_options(*cv, cv_opts.chain);

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const hsforest::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*simulate) {
      resolve(sim_spec, sim_args);
      const auto r = hsforest::cmd_simulate(sim_spec, sim_data, sim_truth);
      std::cout << "wrote " << sim_data << " and " << sim_truth << " (censoring "
                << r.generated.censoring_rate << ", eta " << r.generated.eta << ")\n";
    } else if (*fit) {
      fit_opts.outcome = hsforest::parse_outcome(outcome);
      if (fit_progress && fit_opts.chain.progress_every == 0) fit_opts.chain.progress_every = 100;
      const auto summary = hsforest::cmd_fit(fit_opts, fit_progress ? &std::cerr : nullptr);
      std::cout << "wrote " << (std::filesystem::path(fit_opts.out_dir) / "summary.json").string()
                << " (" << summary["draws"].get<std::size_t>() << " draws)\n";
    } else if (*replicate) {
      resolve(rep_opts.spec, rep_args);
      rep_opts.spec.seed = rep_seed;
      rep_opts.chain.seed = rep_seed;
      const auto r = hsforest::cmd_replicate(rep_opts, &std::cerr);
      std::cout << "wrote " << rep_opts.out_path << " (" << r.failures << " of " << rep_opts.reps
                << " reps failed)\n";
      if (10 * r.failures > rep_opts.reps) return kExitNumerical;
    } else if (*cv) {
      const auto r = hsforest::cmd_cv(cv_opts, &std::cerr);
      std::cout << "best_k=" << r.best_k << '\n';
    }
  } catch (const hsforest::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const hsforest::TailOverflowError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const hsforest::EstimationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const hsforest::CalibrationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
