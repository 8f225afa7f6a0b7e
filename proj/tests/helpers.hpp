#pragma once

#include <memory>
#include <unordered_map>
#include <vector>

#include "lsvee/cdp.hpp"
#include "lsvee/funcclass.hpp"

namespace testenv {

using namespace lsvee;

inline SupportEntry entry(std::int64_t token, double prob, std::vector<double> means,
                          RewardNoise noise = RewardNoise::Deterministic) {
  SupportEntry e;
  e.token = token;
  e.prob = prob;
  e.rewardMean = std::move(means);
  e.rewardNoise.assign(e.rewardMean.size(), noise);
  return e;
}

// One state, one level, K actions with the given deterministic rewards.
inline LayeredCdp bandit(std::vector<double> means, RewardNoise noise = RewardNoise::Deterministic) {
  int K = static_cast<int>(means.size());
  ObsRewardDist d;
  d.support.push_back(entry(1, 1.0, std::move(means), noise));
  return LayeredCdp(1, K, {1}, {}, {{d}}, false);
}

// Two levels, one state each, K=2, zero reward at level 1 and the given
// deterministic level-2 rewards; an optional two-point level-2 observation mix.
inline LayeredCdp chainTwoLevels(std::vector<double> leafMeansA, std::vector<double> leafMeansB = {},
                                 double probA = 1.0, RewardNoise noise = RewardNoise::Deterministic) {
  ObsRewardDist top;
  top.support.push_back(entry(1, 1.0, {0.0, 0.0}));
  ObsRewardDist leaf;
  if (leafMeansB.empty()) {
    leaf.support.push_back(entry(2, 1.0, std::move(leafMeansA), noise));
  } else {
    leaf.support.push_back(entry(2, probA, std::move(leafMeansA), noise));
    leaf.support.push_back(entry(3, 1.0 - probA, std::move(leafMeansB), noise));
  }
  return LayeredCdp(2, 2, {1, 1}, {{{0, 0}}}, {{top}, {leaf}}, false);
}

inline std::shared_ptr<const TableQ> tableQ(int id, int K,
                                            std::unordered_map<std::int64_t, std::vector<double>> rows,
                                            double fallback = 0.0) {
  return std::make_shared<TableQ>(id, K, std::move(rows), fallback);
}

// A function that evaluates to the same row on every token it has seen.
inline std::shared_ptr<const TableQ> constantQ(int id, int K, double value,
                                               const std::vector<std::int64_t>& tokens) {
  std::unordered_map<std::int64_t, std::vector<double>> rows;
  for (auto t : tokens) rows[t] = std::vector<double>(static_cast<std::size_t>(K), value);
  return tableQ(id, K, std::move(rows), value);
}

}  // namespace testenv
