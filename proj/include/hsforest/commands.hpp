#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsforest/estimands.hpp"
#include "hsforest/sampler.hpp"
#include "hsforest/simgen.hpp"

namespace hsforest {

nlohmann::json to_json(const ChainConfig& cfg);
nlohmann::json to_json(const ScenarioSpec& spec);

// Runs `count` independent tasks on up to `threads` workers. Each task writes only
// its own slot, so results do not depend on the number of workers. The first
// exception thrown by a task is rethrown after all workers finish.
void parallel_for(int count, int threads, const std::function<void(int)>& task);

struct SimulateResult {
  GeneratedData generated;
};

// Writes the dataset and the truth sidecar.
SimulateResult cmd_simulate(const ScenarioSpec& spec, const std::string& data_path,
                            const std::string& truth_path);

struct FitOptions {
  std::string data_path;
  std::string out_dir = ".";
  ChainConfig chain;
  bool single = false;
  OutcomeKind outcome = OutcomeKind::Survival;
  double level = 0.95;
};

// Fits the data file and writes summary.json and draws.csv into out_dir.
nlohmann::json cmd_fit(const FitOptions& opts, std::ostream* log = nullptr);

struct ReplicateOptions {
  ScenarioSpec spec;
  ChainConfig chain;
  int reps = 10;
  int threads = 1;
  double level = 0.95;
  std::string out_path = "replicate.csv";
};

struct ReplicateRow {
  int rep = 0;
  bool ok = false;
  std::string error;
  Metrics metrics;
  double ate_mean = 0.0;
  double ate_half_width = 0.0;
};

struct ReplicateResult {
  std::vector<ReplicateRow> rows;
  Metrics mean;
  int failures = 0;
};

// Rep r uses scenario seed spec.seed + r and chain seed chain.seed + r.
ReplicateResult run_replications(const ReplicateOptions& opts, std::ostream* log = nullptr);
std::string replicate_csv(const ReplicateResult& result);
ReplicateResult cmd_replicate(const ReplicateOptions& opts, std::ostream* log = nullptr);

struct CvOptions {
  std::string data_path;
  std::vector<double> k_grid{0.1};
  int folds = 5;
  int repeats = 1;
  int threads = 1;
  ChainConfig chain;
  std::string out_path = "cv.csv";
};

struct CvRow {
  double k = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  int folds_used = 0;
};

struct CvResult {
  std::vector<CvRow> rows;
  double best_k = 0.0;
};

// Fold assignment stratified on the event indicator: events and censored rows are
// shuffled separately and dealt round-robin over the folds.
std::vector<int> stratified_folds(const Eigen::VectorXi& status, int folds, RngStream& rng);

CvResult run_cv(const Dataset& data, const CvOptions& opts, std::ostream* log = nullptr);
std::string cv_csv(const CvResult& result);
CvResult cmd_cv(const CvOptions& opts, std::ostream* log = nullptr);

}  // namespace hsforest
