#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvee/common.hpp"
#include "lsvee/rng.hpp"

namespace lsvee {

enum class RewardNoise { Deterministic, Bernoulli };

// One point of a state's observation-reward distribution: the observation,
// its probability mass, and per-action reward means with a noise kind each.
struct SupportEntry {
  std::int64_t token = 0;
  std::vector<double> features;          // optional, may be empty
  double prob = 1.0;
  std::vector<double> rewardMean;        // size K, each in [0,1]
  std::vector<RewardNoise> rewardNoise;  // size K
};

struct ObsRewardDist {
  std::vector<SupportEntry> support;
};

// Layered deterministic-transition environment over hidden states. Immutable
// after construction and safely shareable across threads; runs own their
// meters and RNG streams.
class LayeredCdp {
 public:
  // transitions[h-1][i][a] is the next-level state index for levels h in
  // [1, H-1]; every action from level H goes to the terminal pseudo-state.
  // Construction validates layering, probability normalization, reward
  // ranges, and that realized reward sums lie in [0,1] on every path.
  LayeredCdp(int horizon, int numActions, std::vector<int> statesPerLevel,
             std::vector<std::vector<std::vector<int>>> transitions,
             std::vector<std::vector<ObsRewardDist>> observations,
             bool historyInObservation = false);

  int horizon() const { return horizon_; }
  int numActions() const { return numActions_; }
  const std::vector<int>& statesPerLevel() const { return statesPerLevel_; }
  int maxStatesPerLevel() const { return maxStatesPerLevel_; }
  bool historyInObservation() const { return historyInObservation_; }

  StateId start() const { return {1, 0}; }
  StateId terminal() const { return {horizon_ + 1, 0}; }
  bool isTerminal(StateId s) const { return s.level == horizon_ + 1; }

  StateId transition(StateId s, int action) const;
  const ObsRewardDist& obsDist(StateId s) const;

  // Injective path code (leading-1 base-K integer); used for cache keys and
  // RNG substream derivation. Construction rejects K^H beyond 2^62.
  std::uint64_t encodePath(const Path& p) const;

 private:
  int horizon_;
  int numActions_;
  std::vector<int> statesPerLevel_;
  int maxStatesPerLevel_;
  std::vector<std::vector<std::vector<int>>> transitions_;
  std::vector<std::vector<ObsRewardDist>> observations_;
  bool historyInObservation_;
};

// State reached by executing p from the start state; resolve(cdp, {}) = start.
StateId resolve(const LayeredCdp& cdp, const Path& p);

// reachable(cdp)[level-1][index] != 0 iff the state can be reached from the root.
std::vector<std::vector<char>> reachableStates(const LayeredCdp& cdp);

// The materialized observation for support entry j of the state reached by p
// (attaches the action history when the environment opts in).
Observation observationAt(const LayeredCdp& cdp, const Path& p, int supportIdx);

// Counts episodes: every environment sampling that starts from the root
// charges exactly one unit. Charging past the budget throws BudgetExceeded.
struct EpisodeMeter {
  std::uint64_t episodesUsed = 0;
  std::optional<std::uint64_t> budget;

  void charge(std::uint64_t n = 1) {
    if (budget && episodesUsed + n > *budget) {
      episodesUsed = *budget;
      throw BudgetExceeded("episode budget exhausted");
    }
    episodesUsed += n;
  }
};

struct TrajectoryStep {
  StateId state;  // hidden from the agent; recorded for the harness/oracle
  Observation obs;
  int action = 0;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double totalReward = 0.0;

  Path actions() const;
};

// Draws (x, r) at the state reached by p; one root-to-p traversal = one
// metered episode. The returned vector holds the realized reward for every
// action.
std::pair<Observation, std::vector<double>> sampleObsReward(const LayeredCdp& cdp, const Path& p,
                                                            RngStream& rng, EpisodeMeter& meter);

// Runs one full length-H episode following the policy; one metered episode.
Trajectory runEpisode(const LayeredCdp& cdp, const std::function<int(const Observation&)>& policy,
                      RngStream& rng, EpisodeMeter& meter);

// JSON serialization. Round-trips bit-exactly on numeric fields.
nlohmann::json cdpToJson(const LayeredCdp& cdp);
LayeredCdp cdpFromJson(const nlohmann::json& j);
void saveCdp(const LayeredCdp& cdp, const std::string& path);
LayeredCdp loadCdp(const std::string& path);

}  // namespace lsvee
