#include "doctest.h"
#include "helpers.hpp"
#include "lsvee/cdp.hpp"
#include "lsvee/envgen.hpp"
#include "lsvee/oracle.hpp"

#include <cmath>
#include <map>

using namespace lsvee;
using testenv::bandit;
using testenv::entry;

TEST_CASE("resolve walks the deterministic tree") {
  auto lock = makeLock(2, 2, 0.1, {0, 0}, 1);
  CHECK(resolve(lock.cdp, {}) == lock.cdp.start());
  // Following the secret prefix stays on the good chain; deviating drops to bad.
  CHECK(resolve(lock.cdp, {0}) == StateId{2, 0});
  CHECK(resolve(lock.cdp, {1}) == StateId{2, 1});
  CHECK(resolve(lock.cdp, {0, 0}) == StateId{3, 0});  // terminal
  CHECK_THROWS_AS(resolve(lock.cdp, {2}), InvalidAction);
  CHECK_THROWS_AS(resolve(lock.cdp, {0, 0, 0}), InvalidAction);
}

TEST_CASE("sampleObsReward on a deterministic single-support state") {
  LayeredCdp cdp = bandit({0.2, 0.8});
  RngFactory rng(7);
  EpisodeMeter meter;
  for (int i = 0; i < 5; ++i) {
    auto stream = rng.stream(StreamOp::SampleObsReward, cdp.encodePath({}));
    auto [x, r] = sampleObsReward(cdp, {}, stream, meter);
    CHECK(x.token == 1);
    CHECK(r == std::vector<double>{0.2, 0.8});
  }
  CHECK(meter.episodesUsed == 5);
}

TEST_CASE("lock states before the final level pay zero reward") {
  auto lock = makeLock(3, 2, 0.1, {0, 1, 0}, 1);
  RngFactory rng(3);
  EpisodeMeter meter;
  for (const Path& p : {Path{}, Path{1}, Path{0, 1}}) {
    auto stream = rng.stream(StreamOp::SampleObsReward, lock.cdp.encodePath(p));
    auto [x, r] = sampleObsReward(lock.cdp, p, stream, meter);
    if (p.size() + 1 < 3) {
      for (double v : r) CHECK(v == 0.0);
    }
    CHECK(x.history == p);  // the lock attaches the action history
  }
}

TEST_CASE("empirical support frequencies match the declared masses") {
  // Three-point support {0.2, 0.3, 0.5}; 1e5 draws within +-0.01 per mass.
  ObsRewardDist d;
  d.support.push_back(entry(1, 0.2, {0.0}));
  d.support.push_back(entry(2, 0.3, {0.0}));
  d.support.push_back(entry(3, 0.5, {0.0}));
  LayeredCdp cdp(1, 1, {1}, {}, {{d}}, false);

  RngFactory rng(12345);
  EpisodeMeter meter;
  auto stream = rng.stream(StreamOp::SampleObsReward, 1);
  const long n = 100000;
  std::map<std::int64_t, long> hits;
  for (long i = 0; i < n; ++i) {
    auto [x, r] = sampleObsReward(cdp, {}, stream, meter);
    ++hits[x.token];
  }
  CHECK(std::abs(hits[1] / double(n) - 0.2) < 0.01);
  CHECK(std::abs(hits[2] / double(n) - 0.3) < 0.01);
  CHECK(std::abs(hits[3] / double(n) - 0.5) < 0.01);
  CHECK(meter.episodesUsed == n);
}

TEST_CASE("runEpisode totals the realized rewards") {
  LayeredCdp cdp = bandit({0.7});
  RngFactory rng(1);
  EpisodeMeter meter;
  auto stream = rng.stream(StreamOp::RunEpisode, 1);
  Trajectory t = runEpisode(cdp, [](const Observation&) { return 0; }, stream, meter);
  CHECK(t.totalReward == doctest::Approx(0.7));
  CHECK(t.steps.size() == 1);
  CHECK(meter.episodesUsed == 1);
}

TEST_CASE("lock payoffs are Bernoulli(1/2+eps) on the secret path and Bernoulli(1/2) off it") {
  const double eps = 0.1;
  auto lock = makeLock(2, 2, eps, {0, 0}, 1);
  RngFactory rng(99);
  EpisodeMeter meter;
  const long n = 200000;

  auto meanReturn = [&](int firstAction) {
    auto stream = rng.stream(StreamOp::RunEpisode, static_cast<std::uint64_t>(firstAction));
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
      Trajectory t = runEpisode(
          lock.cdp, [&](const Observation& x) { return x.history.empty() ? firstAction : 0; }, stream, meter);
      sum += t.totalReward;
    }
    return sum / static_cast<double>(n);
  };

  // 3-sigma bands: sigma <= 0.5/sqrt(n) ~ 0.0011.
  CHECK(std::abs(meanReturn(0) - (0.5 + eps)) < 0.004);
  CHECK(std::abs(meanReturn(1) - 0.5) < 0.004);
}

TEST_CASE("episode budget exhaustion aborts with BudgetExceeded") {
  LayeredCdp cdp = bandit({0.5});
  RngFactory rng(1);
  EpisodeMeter meter;
  meter.budget = 3;
  auto stream = rng.stream(StreamOp::RunEpisode, 1);
  for (int i = 0; i < 3; ++i) runEpisode(cdp, [](const Observation&) { return 0; }, stream, meter);
  CHECK_THROWS_AS(runEpisode(cdp, [](const Observation&) { return 0; }, stream, meter), BudgetExceeded);
  CHECK(meter.episodesUsed == 3);
}

TEST_CASE("identical seed and call sequence give bit-identical trajectories") {
  auto inst = makeRandomRealizable(3, 2, 3, 4, 2, 11);
  Policy pi(inst.funcs.members.front());

  auto record = [&](std::uint64_t seed) {
    RngFactory rng(seed);
    EpisodeMeter meter;
    std::vector<double> rewards;
    std::vector<Path> actions;
    for (int i = 0; i < 50; ++i) {
      auto stream = rng.stream(StreamOp::RunEpisode, 1);
      Trajectory t = runEpisode(inst.cdp, [&pi](const Observation& x) { return pi(x); }, stream, meter);
      rewards.push_back(t.totalReward);
      actions.push_back(t.actions());
    }
    return std::make_pair(rewards, actions);
  };

  auto a = record(42);
  auto b = record(42);
  auto c = record(43);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("substreams do not depend on call interleaving") {
  LayeredCdp cdp = bandit({0.5}, RewardNoise::Bernoulli);

  auto drawAt = [&](bool interleave) {
    RngFactory rng(5);
    EpisodeMeter meter;
    if (interleave) {
      auto other = rng.stream(StreamOp::SampleObsReward, 999);
      (void)other();
    }
    auto stream = rng.stream(StreamOp::RunEpisode, 1);
    return runEpisode(cdp, [](const Observation&) { return 0; }, stream, meter).totalReward;
  };
  CHECK(drawAt(false) == drawAt(true));
}

TEST_CASE("construction rejects malformed environments") {
  ObsRewardDist ok;
  ok.support.push_back(entry(1, 1.0, {0.0}));

  SUBCASE("layering violation") {
    CHECK_THROWS_AS(LayeredCdp(2, 1, {1, 1}, {{{1}}}, {{ok}, {ok}}, false), ValidationFailed);
  }
  SUBCASE("probabilities must sum to one") {
    ObsRewardDist bad;
    bad.support.push_back(entry(1, 0.6, {0.0}));
    bad.support.push_back(entry(2, 0.6, {0.0}));
    CHECK_THROWS_AS(LayeredCdp(1, 1, {1}, {}, {{bad}}, false), ValidationFailed);
  }
  SUBCASE("reward means outside [0,1]") {
    ObsRewardDist bad;
    bad.support.push_back(entry(1, 1.0, {1.2}));
    CHECK_THROWS_AS(LayeredCdp(1, 1, {1}, {}, {{bad}}, false), ValidationFailed);
  }
  SUBCASE("realized reward sums can exceed 1") {
    ObsRewardDist half;
    half.support.push_back(entry(1, 1.0, {0.6}));
    CHECK_THROWS_AS(LayeredCdp(2, 1, {1, 1}, {{{0}}}, {{half}, {half}}, false), ValidationFailed);
  }
}

TEST_CASE("realized trajectory rewards stay in [0,1] on generated instances") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto inst = makeRandomRealizable(3, 2, 3, 3, 2, seed);
    RngFactory rng(seed);
    EpisodeMeter meter;
    auto stream = rng.stream(StreamOp::RunEpisode, 1);
    for (int i = 0; i < 500; ++i) {
      int arm = i % inst.cdp.numActions();
      Trajectory t = runEpisode(inst.cdp, [&](const Observation&) { return arm; }, stream, meter);
      CHECK(t.totalReward >= 0.0);
      CHECK(t.totalReward <= 1.0);
    }
  }
}

TEST_CASE("CDP serialization round-trips bit-exactly") {
  auto inst = makeDisjointObs(3, 2, 3, 2, 4, 21);
  nlohmann::json j1 = cdpToJson(inst.cdp);
  LayeredCdp again = cdpFromJson(j1);
  nlohmann::json j2 = cdpToJson(again);
  CHECK(j1.dump() == j2.dump());

  // Numeric fields compare exactly after the round trip.
  ExactValues a = computeExactValues(inst.cdp);
  ExactValues b = computeExactValues(again);
  CHECK(a.vStarRoot == b.vStarRoot);

  auto lock = makeLock(3, 2, 0.1, {0, 1, 1}, 1);
  nlohmann::json l1 = cdpToJson(lock.cdp);
  CHECK(cdpToJson(cdpFromJson(l1)).dump() == l1.dump());
  CHECK(cdpFromJson(l1).historyInObservation());
}
