#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvee/cdp.hpp"
#include "lsvee/funcclass.hpp"
#include "lsvee/rng.hpp"
#include "lsvee/schedule.hpp"

namespace lsvee {

enum class Outcome { Success, BudgetExceeded, ClassEmptied, IterationGuardExceeded };

std::string toString(Outcome o);

struct EliminationEvent {
  int seq = 0;
  int treeId = 0;  // which dfsLearn application this belongs to
  Path path;
  StateId state;
  long nTrain = 0;
  double threshold = 0.0;
  std::vector<int> survivorsBefore;
  std::vector<int> survivorsAfter;
  std::vector<double> risks;  // aligned with survivorsBefore
  bool childEstimatesCached = false;
  std::optional<bool> fStarSurvived;  // filled only when the harness supplied the star id
};

struct ConsensusEvent {
  int seq = 0;
  int treeId = 0;
  Path path;
  long nTest = 0;
  double epsTest = 0.0;
  double spread = 0.0;
  bool agreed = false;
};

struct OnDemandEvent {
  int seq = 0;
  int iteration = 0;
  int functionId = -1;
  long n1 = 0;
  double vHatPolicy = 0.0;
  double vHatStar = 0.0;
  bool accepted = false;
};

struct RunReport {
  Outcome outcome = Outcome::Success;
  std::string abortReason;
  std::optional<int> returnedFunctionId;
  double vHatStar = std::numeric_limits<double>::quiet_NaN();

  std::uint64_t episodesTotal = 0;
  std::uint64_t episodesConsensus = 0;
  std::uint64_t episodesTdElim = 0;
  std::uint64_t episodesMcPolicyEval = 0;

  int tdElimCallCount = 0;
  int dfsInvocations = 0;       // external dfsLearn applications (trees)
  int onDemandIterations = 0;
  int maxTdElimPerDfsTree = 0;
  // Times tdElim hit a state already eliminated within the same tree; zero
  // under successful consensus behaviour.
  int duplicateTdElimInTree = 0;

  std::vector<int> finalSurvivorIds;
  std::vector<EliminationEvent> eliminationTrace;
  std::vector<ConsensusEvent> consensusTrace;
  std::vector<OnDemandEvent> onDemandTrace;

  nlohmann::json toJson() const;
  // One JSON record per consensus / tdElim / on-demand event, in order.
  std::string eventsJsonl() const;
};

// Mutable per-run state: meter, RNG substreams, the value cache, and the
// report being accumulated. One run is a single logical thread of control.
class RunContext {
 public:
  RunContext(const LayeredCdp& cdp, const Schedule& schedule, std::uint64_t seed,
             std::optional<std::uint64_t> budget, std::optional<int> starId = std::nullopt);

  const LayeredCdp& cdp() const { return *cdp_; }
  const Schedule& schedule() const { return sched_; }
  EpisodeMeter& meter() { return meter_; }
  RngFactory& rng() { return rng_; }
  ValueCache& cache() { return cache_; }
  RunReport& report() { return report_; }
  std::optional<int> starId() const { return starId_; }

  // Tree bookkeeping for dfsLearn applications.
  int beginTree();
  void endTree();
  int currentTree() const { return currentTree_; }
  bool treeOpen() const { return treeOpen_; }
  void noteTdElimAt(StateId s);

  int nextSeq() { return seq_++; }

  void chargeConsensus(std::uint64_t n);
  void chargeTdElim(std::uint64_t n);
  void chargeMcPolicyEval(std::uint64_t n);

 private:
  const LayeredCdp* cdp_;
  Schedule sched_;
  EpisodeMeter meter_;
  RngFactory rng_;
  ValueCache cache_;
  RunReport report_;
  std::optional<int> starId_;
  int seq_ = 0;
  int currentTree_ = -1;
  int nextTreeId_ = 0;
  bool treeOpen_ = false;
  int treeTdElimCalls_ = 0;
  std::set<StateId> treeStates_;
};

// Monte-Carlo agreement test at path p (|p| >= 1): estimates V^f(p, pi_f) for
// every member with nTest(deltaCall) samples, writes them to the cache, and
// returns true iff the pairwise spread is at most epsTest.
bool consensus(const Path& p, const FunctionClass& F, double epsTest, double phi, double deltaCall,
               RunContext& ctx);

// The elimination step: requires child estimates in the cache (terminal
// children use 0), collects nTrain(deltaCall) tuples (x, a, r) with uniform
// actions, filters by the TD squared loss, and re-estimates V^f(p, pi_f) for
// survivors from the same draws.
FunctionClass tdElim(const Path& p, const FunctionClass& F, double phi, double deltaCall,
                     ValueCache& cache, RunContext& ctx);

// Depth-first learning: consensus-gated recursion over descendants followed by
// one elimination step at p. Opens a new tree when called externally.
FunctionClass dfsLearn(const Path& p, FunctionClass F, double epsilon, double deltaCall, RunContext& ctx);

// Tests the lowest-id surviving policy by Monte-Carlo rollouts; on failure,
// trains on prefixes of the collected trajectories. Returns the accepted
// function id. Throws IterationGuardExceeded after 2 M H iterations.
int exploreOnDemand(FunctionClass& F, double vHatStar, double epsilon, double delta, RunContext& ctx);

// The full algorithm: DFS-Learn at the empty path with delta/2, the cached
// root estimate of the lowest-id survivor as vHatStar, then Explore-on-Demand
// with delta/2. Never throws for budget/class/guard conditions; they become
// report outcomes.
RunReport lsvee(const LayeredCdp& cdp, const FunctionClass& F, double epsilon, double delta,
                const AlgoParams& params, std::uint64_t seed, std::optional<int> starId = std::nullopt);

}  // namespace lsvee
