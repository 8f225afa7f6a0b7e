#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvee/algo.hpp"
#include "lsvee/envgen.hpp"
#include "lsvee/schedule.hpp"

namespace lsvee {

struct GeneratorSpec {
  std::string family;  // "randomRealizable" | "disjointObs" | "lock"
  int M = 2, K = 2, H = 2, N = 4, obsPerState = 1;
  double lockEpsilon = 0.1;
  Path lockPStar;           // defaults to the all-zero path of length H
  std::uint64_t envSeed = 0;  // used only when perSeedEnv is false
  bool perSeedEnv = true;     // derive a fresh instance from each run seed
};

// Fully serializable; a run is a pure function of (config, seed).
struct ExperimentConfig {
  // Environment: either a generator spec or a pair of files.
  std::optional<GeneratorSpec> generator;
  std::string envFile;
  std::string funcsFile;

  AlgoParams algo;
  std::vector<std::uint64_t> seeds{1};
  std::string outputDir;  // empty = no files written
  int workers = 1;

  static ExperimentConfig fromJson(const nlohmann::json& j);
  nlohmann::json toJson() const;
};

struct ResultRow {
  std::uint64_t seed = 0;
  std::uint64_t episodesTotal = 0;
  std::uint64_t episodesConsensus = 0;
  std::uint64_t episodesTdElim = 0;
  std::uint64_t episodesMcPolicyEval = 0;
  int tdElimCalls = 0;
  int onDemandIterations = 0;
  double suboptimality = std::numeric_limits<double>::quiet_NaN();  // vs exact oracle
  std::optional<bool> fStarSurvived;
  std::string outcome;
  std::int64_t wallClockMs = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<RunReport> reports;  // aligned with rows
};

// Executes lsvee per seed (worker pool, results merged by seed order),
// computes oracle suboptimality, and writes results.csv plus per-run JSON
// event logs under outputDir when set. Per-seed failures are recorded in the
// outcome column; the sweep never aborts.
ExperimentResult runExperiment(const ExperimentConfig& config);

enum class BaselineKind { EnumerateAll, EpsilonGreedy };

BaselineKind baselineFromString(const std::string& s);

// enumerateAll: Monte-Carlo evaluates every pi_f with n1 episodes each and
// returns the empirical best (cost N*n1). epsilonGreedy: tabular-on-token
// Q-learning with epsilon-greedy exploration over `episodeBudget` episodes
// (defaults to the config budget).
ExperimentResult runBaseline(const ExperimentConfig& config, BaselineKind kind,
                             std::optional<std::uint64_t> episodeBudget = std::nullopt);

// CSV persistence; the column set is fixed and round-trip parse = identity.
std::string resultCsvHeader();
std::string toCsv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parseResultCsv(const std::string& text);

}  // namespace lsvee
