#include "hsforest/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "hsforest/errors.hpp"
#include "hsforest/io.hpp"

namespace hsforest {
namespace {

nlohmann::json move_rates(const MoveCounters& c) {
  nlohmann::json j;
  for (MoveKind k : {MoveKind::Grow, MoveKind::Prune, MoveKind::Change}) {
    const auto idx = static_cast<std::size_t>(k);
    j[move_name(k)] = {{"proposed", c.proposed[idx]},
                       {"accepted", c.accepted[idx]},
                       {"rate", c.rate(k)}};
  }
  return j;
}

nlohmann::json interval_json(const IntervalSummary& s) {
  return {{"mean", s.mean}, {"lower", s.lower}, {"upper", s.upper}, {"level", s.level}};
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double t = 0.0;
  for (double x : v) t += x;
  return t / static_cast<double>(v.size());
}

Dataset subset(const Dataset& d, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.outcome = d.outcome;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.X.resize(n, d.p());
  out.time.resize(n);
  out.status.resize(n);
  out.treatment.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = rows[static_cast<std::size_t>(i)];
    out.X.row(i) = d.X.row(r);
    out.time[i] = d.time[r];
    out.status[i] = d.status.size() ? d.status[r] : 1;
    out.treatment[i] = d.treatment[r];
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const ChainConfig& c) {
  return {{"m_f", c.m_f},
          {"m_tau", c.m_tau},
          {"k", c.k},
          {"a", c.a},
          {"b", c.b},
          {"max_depth", c.max_depth},
          {"p_grow", c.moves.p_grow},
          {"p_prune", c.moves.p_prune},
          {"p_change", c.moves.p_change},
          {"omega_f", c.omega_f},
          {"omega_tau", c.omega_tau},
          {"omega_single", c.omega_single},
          {"iterations", c.iterations},
          {"burnin", c.burnin},
          {"thin", c.thin},
          {"nu_prior", c.nu_prior},
          {"psi_prior", c.psi_prior},
          {"seed", c.seed},
          {"invariant_codes", c.invariant_codes},
          {"propensity", c.propensity},
          {"propensity_trees", c.propensity_trees},
          {"propensity_iterations", c.propensity_iterations},
          {"propensity_burnin", c.propensity_burnin}};
}

nlohmann::json to_json(const ScenarioSpec& s) {
  nlohmann::json j = {{"family", family_name(s.family)},
                      {"n", s.n},
                      {"p", s.p},
                      {"noise_var", s.noise_var},
                      {"censor_target", s.censor_target},
                      {"error", error_name(s.error)},
                      {"sparsity_f", s.sparsity_f},
                      {"sparsity_tau", s.sparsity_tau},
                      {"seed", s.seed}};
  j["copula_rho"] = s.copula_rho ? nlohmann::json(*s.copula_rho) : nlohmann::json(nullptr);
  return j;
}

void parallel_for(int count, int threads, const std::function<void(int)>& task) {
  if (count <= 0) return;
  const int workers = std::clamp(threads, 1, count);
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

SimulateResult cmd_simulate(const ScenarioSpec& spec, const std::string& data_path,
                            const std::string& truth_path) {
  SimulateResult r;
  r.generated = generate(spec);
  write_dataset_csv(data_path, r.generated.data);
  write_truth_csv(truth_path, r.generated.truth_cate, r.generated.truth_ate);
  return r;
}

nlohmann::json cmd_fit(const FitOptions& opts, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset data = read_dataset_csv(opts.data_path, opts.outcome);
  ProgressCallback progress;
  if (log != nullptr) {
    progress = [log](const Progress& p) {
      *log << "iter " << p.iteration << " sigma2=" << p.sigma2 << " f[grow "
           << p.prognostic.rate(MoveKind::Grow) << " prune " << p.prognostic.rate(MoveKind::Prune)
           << " change " << p.prognostic.rate(MoveKind::Change) << "]";
      if (p.treatment.proposed[0] + p.treatment.proposed[1] + p.treatment.proposed[2] > 0) {
        *log << " tau[grow " << p.treatment.rate(MoveKind::Grow) << " prune "
             << p.treatment.rate(MoveKind::Prune) << " change "
             << p.treatment.rate(MoveKind::Change) << "]";
      }
      *log << '\n';
    };
  }
  const PosteriorDraws draws = opts.single ? run_horseshoe_forest(data, opts.chain, nullptr, progress)
                                           : run_causal_chain(data, opts.chain, nullptr, progress);

  nlohmann::json summary;
  summary["draws"] = draws.draws();
  summary["sigma2_mean"] = mean_of(draws.sigma2);
  if (!opts.single) {
    if (draws.ate.size() >= 2) {
      const DrawSummary s = summarize(draws, opts.level);
      summary["ate"] = interval_json(s.ate);
      nlohmann::json cate = nlohmann::json::array();
      for (const auto& c : s.cate) cate.push_back({{"mean", c.mean}, {"lower", c.lower}, {"upper", c.upper}});
      summary["cate"] = cate;
    } else {
      summary["ate"] = nullptr;
      summary["cate"] = nullptr;
    }
  }
  summary["c_index"] = nullptr;
  if (draws.fit_mean.size() == data.n() && draws.draws() > 0 && data.outcome != OutcomeKind::Binary) {
    std::vector<double> scores(draws.fit_mean.data(), draws.fit_mean.data() + data.n());
    std::vector<double> y(data.time.data(), data.time.data() + data.n());
    std::vector<int> delta(static_cast<std::size_t>(data.n()), 1);
    if (data.outcome == OutcomeKind::Survival) {
      for (Eigen::Index i = 0; i < data.n(); ++i) delta[static_cast<std::size_t>(i)] = data.status[i];
    }
    try {
      summary["c_index"] = c_index(scores, y, delta);
    } catch (const EstimationError&) {
    }
  }
  summary["acceptance"] = {{"prognostic", move_rates(draws.prognostic_moves)}};
  if (!opts.single) summary["acceptance"]["treatment"] = move_rates(draws.treatment_moves);
  summary["standardizer"] = {{"center", draws.standardizer.center},
                             {"scale", draws.standardizer.scale}};
  nlohmann::json config = to_json(opts.chain);
  config["data"] = opts.data_path;
  config["single"] = opts.single;
  config["outcome"] = outcome_name(opts.outcome);
  config["level"] = opts.level;
  summary["config"] = config;

  std::filesystem::create_directories(opts.out_dir);
  const std::filesystem::path dir(opts.out_dir);
  write_draws_csv((dir / "draws.csv").string(), draws);
  summary["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");
  return summary;
}

ReplicateResult run_replications(const ReplicateOptions& opts, std::ostream* log) {
  if (opts.reps < 1) throw InputError("replicate: reps must be at least 1");
  opts.spec.validate();
  opts.chain.validate();
  ReplicateResult result;
  result.rows.resize(static_cast<std::size_t>(opts.reps));
  std::mutex log_mutex;
  parallel_for(opts.reps, opts.threads, [&](int idx) {
    const int rep = idx + 1;
    ReplicateRow& row = result.rows[static_cast<std::size_t>(idx)];
    row.rep = rep;
    try {
      ScenarioSpec spec = opts.spec;
      spec.seed = opts.spec.seed + static_cast<std::uint64_t>(rep);
      ChainConfig chain = opts.chain;
      chain.seed = opts.chain.seed + static_cast<std::uint64_t>(rep);
      const GeneratedData g = generate(spec);
      const PosteriorDraws d = run_causal_chain(g.data, chain);
      const DrawSummary s = summarize(d, opts.level);
      std::vector<double> truth(g.truth_cate.data(), g.truth_cate.data() + g.truth_cate.size());
      row.metrics = evaluate(s, truth, g.truth_ate);
      row.ate_mean = s.ate.mean;
      row.ate_half_width = 0.5 * s.ate.length();
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    if (log != nullptr) {
      std::lock_guard<std::mutex> lock(log_mutex);
      if (row.ok) {
        *log << "rep " << rep << " rmse_cate=" << row.metrics.rmse_cate
             << " cover_ate=" << row.metrics.cover_ate << '\n';
      } else {
        *log << "rep " << rep << " failed: " << row.error << '\n';
      }
    }
  });
  int ok = 0;
  for (const auto& row : result.rows) {
    if (!row.ok) {
      ++result.failures;
      continue;
    }
    ++ok;
    result.mean.rmse_cate += row.metrics.rmse_cate;
    result.mean.cover_cate += row.metrics.cover_cate;
    result.mean.len_cate += row.metrics.len_cate;
    result.mean.rmse_ate += row.metrics.rmse_ate;
    result.mean.cover_ate += row.metrics.cover_ate;
    result.mean.len_ate += row.metrics.len_ate;
  }
  if (ok > 0) {
    const double k = ok;
    result.mean.rmse_cate /= k;
    result.mean.cover_cate /= k;
    result.mean.len_cate /= k;
    result.mean.rmse_ate /= k;
    result.mean.cover_ate /= k;
    result.mean.len_ate /= k;
  }
  return result;
}

std::string replicate_csv(const ReplicateResult& result) {
  std::string out = "rep,rmse_cate,cover_cate,len_cate,rmse_ate,cover_ate,len_ate\n";
  auto line = [](const std::string& label, const Metrics& m) {
    return label + ',' + format_double(m.rmse_cate) + ',' + format_double(m.cover_cate) + ',' +
           format_double(m.len_cate) + ',' + format_double(m.rmse_ate) + ',' +
           format_double(m.cover_ate) + ',' + format_double(m.len_ate) + '\n';
  };
  for (const auto& row : result.rows) {
    if (row.ok) out += line(std::to_string(row.rep), row.metrics);
  }
  out += line("mean", result.mean);
  return out;
}

ReplicateResult cmd_replicate(const ReplicateOptions& opts, std::ostream* log) {
  ReplicateResult r = run_replications(opts, log);
  write_text_file(opts.out_path, replicate_csv(r));
  return r;
}

std::vector<int> stratified_folds(const Eigen::VectorXi& status, int folds, RngStream& rng) {
  if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
  std::vector<int> assignment(static_cast<std::size_t>(status.size()), 0);
  for (int stratum = 1; stratum >= 0; --stratum) {
    std::vector<std::size_t> rows;
    for (Eigen::Index i = 0; i < status.size(); ++i) {
      if (status[i] == stratum) rows.push_back(static_cast<std::size_t>(i));
    }
    std::shuffle(rows.begin(), rows.end(), rng.engine());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      assignment[rows[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    }
  }
  return assignment;
}

CvResult run_cv(const Dataset& data, const CvOptions& opts, std::ostream* log) {
  if (opts.folds < 2) throw InputError("cross-validation needs at least 2 folds");
  if (opts.repeats < 1) throw InputError("cross-validation needs at least 1 repeat");
  if (opts.k_grid.empty()) throw InputError("cross-validation needs a non-empty k grid");
  data.validate(true);
  opts.chain.validate();

  // fold assignments depend only on (seed, repeat)
  std::vector<std::vector<int>> assignments;
  for (int r = 0; r < opts.repeats; ++r) {
    RngStream rng(opts.chain.seed, 1000 + static_cast<std::uint64_t>(r));
    Eigen::VectorXi status = data.status.size() ? data.status : Eigen::VectorXi::Ones(data.n());
    assignments.push_back(stratified_folds(status, opts.folds, rng));
  }

  const int per_k = opts.repeats * opts.folds;
  const int tasks = static_cast<int>(opts.k_grid.size()) * per_k;
  std::vector<double> scores(static_cast<std::size_t>(tasks), std::nan(""));
  std::mutex log_mutex;
  parallel_for(tasks, opts.threads, [&](int t) {
    const int ki = t / per_k;
    const int rep = (t % per_k) / opts.folds;
    const int fold = t % opts.folds;
    const auto& assign = assignments[static_cast<std::size_t>(rep)];
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> test_rows;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      (assign[static_cast<std::size_t>(i)] == fold ? test_rows : train_rows).push_back(i);
    }
    const Dataset train = subset(data, train_rows);
    const Dataset test = subset(data, test_rows);
    auto warn = [&](const std::string& msg) {
      if (log == nullptr) return;
      std::lock_guard<std::mutex> lock(log_mutex);
      *log << "warning: k=" << opts.k_grid[static_cast<std::size_t>(ki)] << " repeat " << rep + 1
           << " fold " << fold + 1 << ": " << msg << '\n';
    };
    if (test.status.sum() == 0) {
      warn("no events in the test fold, skipped");
      return;
    }
    ChainConfig chain = opts.chain;
    chain.k = opts.k_grid[static_cast<std::size_t>(ki)];
    chain.seed = opts.chain.seed + static_cast<std::uint64_t>(t) + 1;
    PredictionSet pred{test.X, test.treatment};
    try {
      const PosteriorDraws d = run_causal_chain(train, chain, &pred);
      std::vector<double> s(d.test_fit_mean.data(), d.test_fit_mean.data() + d.test_fit_mean.size());
      std::vector<double> y(test.time.data(), test.time.data() + test.n());
      std::vector<int> delta(test.status.data(), test.status.data() + test.n());
      scores[static_cast<std::size_t>(t)] = c_index(s, y, delta);
    } catch (const std::exception& e) {
      warn(std::string("fit failed, skipped: ") + e.what());
    }
  });

  CvResult result;
  double best = -1.0;
  for (std::size_t ki = 0; ki < opts.k_grid.size(); ++ki) {
    CvRow row;
    row.k = opts.k_grid[ki];
    std::vector<double> vals;
    for (int j = 0; j < per_k; ++j) {
      const double v = scores[ki * static_cast<std::size_t>(per_k) + static_cast<std::size_t>(j)];
      if (std::isfinite(v)) vals.push_back(v);
    }
    row.folds_used = static_cast<int>(vals.size());
    row.mean = vals.empty() ? std::nan("") : mean_of(vals);
    if (vals.size() > 1) {
      double ss = 0.0;
      for (double v : vals) ss += (v - row.mean) * (v - row.mean);
      row.sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
    }
    if (std::isfinite(row.mean) && row.mean > best) {
      best = row.mean;
      result.best_k = row.k;
    }
    result.rows.push_back(row);
  }
  if (best < 0.0) throw EstimationError("cross-validation: no fold produced a C-index");
  return result;
}

std::string cv_csv(const CvResult& result) {
  std::string out = "k,mean,sd,folds_used\n";
  for (const auto& r : result.rows) {
    out += format_double(r.k) + ',' + format_double(r.mean) + ',' + format_double(r.sd) + ',' +
           std::to_string(r.folds_used) + '\n';
  }
  out += "# best_k=" + format_double(result.best_k) + '\n';
  return out;
}

CvResult cmd_cv(const CvOptions& opts, std::ostream* log) {
  const Dataset data = read_dataset_csv(opts.data_path);
  CvResult r = run_cv(data, opts, log);
  write_text_file(opts.out_path, cv_csv(r));
  return r;
}

}  // namespace hsforest
