#include "lsvee/cdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lsvee {

std::string pathToString(const Path& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(p[i]);
  }
  return out;
}

namespace {

void validateDist(const ObsRewardDist& d, int K, int level, int index) {
  auto where = [&] { return " at state (" + std::to_string(level) + "," + std::to_string(index) + ")"; };
  if (d.support.empty()) throw ValidationFailed("empty observation support" + where());
  double mass = 0.0;
  for (const auto& e : d.support) {
    if (e.prob < 0.0) throw ValidationFailed("negative probability" + where());
    mass += e.prob;
    if (static_cast<int>(e.rewardMean.size()) != K || static_cast<int>(e.rewardNoise.size()) != K)
      throw ValidationFailed("reward vectors must have one entry per action" + where());
    for (double m : e.rewardMean)
      if (!(m >= 0.0 && m <= 1.0)) throw ValidationFailed("reward mean outside [0,1]" + where());
  }
  if (std::abs(mass - 1.0) > 1e-12) throw ValidationFailed("probabilities do not sum to 1" + where());
}

double maxRealizedReward(const SupportEntry& e, int a) {
  if (e.rewardNoise[static_cast<std::size_t>(a)] == RewardNoise::Deterministic)
    return e.rewardMean[static_cast<std::size_t>(a)];
  return e.rewardMean[static_cast<std::size_t>(a)] > 0.0 ? 1.0 : 0.0;
}

}  // namespace

LayeredCdp::LayeredCdp(int horizon, int numActions, std::vector<int> statesPerLevel,
                       std::vector<std::vector<std::vector<int>>> transitions,
                       std::vector<std::vector<ObsRewardDist>> observations, bool historyInObservation)
    : horizon_(horizon),
      numActions_(numActions),
      statesPerLevel_(std::move(statesPerLevel)),
      transitions_(std::move(transitions)),
      observations_(std::move(observations)),
      historyInObservation_(historyInObservation) {
  if (horizon_ < 1) throw ValidationFailed("horizon must be >= 1");
  if (numActions_ < 1) throw ValidationFailed("need at least one action");
  if (static_cast<int>(statesPerLevel_.size()) != horizon_)
    throw ValidationFailed("statesPerLevel must have one entry per level");
  for (int m : statesPerLevel_)
    if (m < 1) throw ValidationFailed("every level needs at least one state");
  maxStatesPerLevel_ = *std::max_element(statesPerLevel_.begin(), statesPerLevel_.end());

  // Path codes must stay injective in 64 bits.
  double bits = static_cast<double>(horizon_) * std::log2(static_cast<double>(numActions_) + 1e-16);
  if (numActions_ > 1 && bits > 62.0) throw ValidationFailed("K^H too large for path encoding");

  if (static_cast<int>(transitions_.size()) != std::max(0, horizon_ - 1))
    throw ValidationFailed("transitions must cover levels 1..H-1");
  for (int h = 1; h <= horizon_ - 1; ++h) {
    const auto& lvl = transitions_[static_cast<std::size_t>(h - 1)];
    if (static_cast<int>(lvl.size()) != statesPerLevel_[static_cast<std::size_t>(h - 1)])
      throw ValidationFailed("transition rows must match level size");
    for (const auto& row : lvl) {
      if (static_cast<int>(row.size()) != numActions_)
        throw ValidationFailed("transition rows must have one target per action");
      for (int nxt : row)
        if (nxt < 0 || nxt >= statesPerLevel_[static_cast<std::size_t>(h)])
          throw ValidationFailed("transition target outside next level (layering violated)");
    }
  }

  if (static_cast<int>(observations_.size()) != horizon_)
    throw ValidationFailed("observations must cover levels 1..H");
  for (int h = 1; h <= horizon_; ++h) {
    const auto& lvl = observations_[static_cast<std::size_t>(h - 1)];
    if (static_cast<int>(lvl.size()) != statesPerLevel_[static_cast<std::size_t>(h - 1)])
      throw ValidationFailed("observation rows must match level size");
    for (int i = 0; i < static_cast<int>(lvl.size()); ++i)
      validateDist(lvl[static_cast<std::size_t>(i)], numActions_, h, i);
  }

  // Realized reward sums must lie in [0,1] on every action sequence, almost
  // surely. DP over states on the worst realizable per-step reward.
  std::vector<std::vector<double>> worst(static_cast<std::size_t>(horizon_) + 1);
  worst[static_cast<std::size_t>(horizon_)].assign(1, 0.0);  // terminal
  for (int h = horizon_; h >= 1; --h) {
    auto& cur = worst[static_cast<std::size_t>(h - 1)];
    cur.assign(static_cast<std::size_t>(statesPerLevel_[static_cast<std::size_t>(h - 1)]), 0.0);
    for (int i = 0; i < statesPerLevel_[static_cast<std::size_t>(h - 1)]; ++i) {
      double w = 0.0;
      for (const auto& e : observations_[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)].support) {
        for (int a = 0; a < numActions_; ++a) {
          double tail = 0.0;
          if (h < horizon_) {
            int nxt = transitions_[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
            tail = worst[static_cast<std::size_t>(h)][static_cast<std::size_t>(nxt)];
          }
          w = std::max(w, maxRealizedReward(e, a) + tail);
        }
      }
      cur[static_cast<std::size_t>(i)] = w;
    }
  }
  if (worst[0][0] > 1.0 + 1e-9)
    throw ValidationFailed("realized reward sum can exceed 1 along some action sequence");
}

StateId LayeredCdp::transition(StateId s, int action) const {
  if (action < 0 || action >= numActions_) throw InvalidAction("action index out of range");
  if (isTerminal(s)) throw InvalidAction("no transitions from the terminal state");
  if (s.level == horizon_) return terminal();
  return {s.level + 1,
          transitions_[static_cast<std::size_t>(s.level - 1)][static_cast<std::size_t>(s.index)][static_cast<std::size_t>(action)]};
}

const ObsRewardDist& LayeredCdp::obsDist(StateId s) const {
  if (isTerminal(s)) throw InvalidAction("the terminal state has no observation distribution");
  return observations_[static_cast<std::size_t>(s.level - 1)][static_cast<std::size_t>(s.index)];
}

std::uint64_t LayeredCdp::encodePath(const Path& p) const {
  std::uint64_t code = 1;
  std::uint64_t base = static_cast<std::uint64_t>(std::max(numActions_, 2));
  for (int a : p) {
    if (a < 0 || a >= numActions_) throw InvalidAction("action index out of range in path");
    code = code * base + static_cast<std::uint64_t>(a);
  }
  return code;
}

StateId resolve(const LayeredCdp& cdp, const Path& p) {
  if (static_cast<int>(p.size()) > cdp.horizon()) throw InvalidAction("path longer than the horizon");
  StateId s = cdp.start();
  for (int a : p) s = cdp.transition(s, a);
  return s;
}

std::vector<std::vector<char>> reachableStates(const LayeredCdp& cdp) {
  std::vector<std::vector<char>> reach(static_cast<std::size_t>(cdp.horizon()));
  for (int h = 1; h <= cdp.horizon(); ++h)
    reach[static_cast<std::size_t>(h - 1)].assign(static_cast<std::size_t>(cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]), 0);
  reach[0][0] = 1;
  for (int h = 1; h < cdp.horizon(); ++h)
    for (int i = 0; i < cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]; ++i)
      if (reach[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)])
        for (int a = 0; a < cdp.numActions(); ++a) {
          StateId nxt = cdp.transition({h, i}, a);
          reach[static_cast<std::size_t>(h)][static_cast<std::size_t>(nxt.index)] = 1;
        }
  return reach;
}

Observation observationAt(const LayeredCdp& cdp, const Path& p, int supportIdx) {
  StateId s = resolve(cdp, p);
  const auto& e = cdp.obsDist(s).support[static_cast<std::size_t>(supportIdx)];
  Observation x;
  x.token = e.token;
  x.features = e.features;
  if (cdp.historyInObservation()) x.history = p;
  return x;
}

Path Trajectory::actions() const {
  Path p;
  p.reserve(steps.size());
  for (const auto& st : steps) p.push_back(st.action);
  return p;
}

namespace {

int drawSupportIndex(const ObsRewardDist& d, RngStream& rng) {
  double u = u01(rng);
  double acc = 0.0;
  int last = static_cast<int>(d.support.size()) - 1;
  for (int j = 0; j <= last; ++j) {
    acc += d.support[static_cast<std::size_t>(j)].prob;
    if (u < acc) return j;
  }
  return last;
}

double realizeReward(const SupportEntry& e, int a, RngStream& rng) {
  double m = e.rewardMean[static_cast<std::size_t>(a)];
  if (e.rewardNoise[static_cast<std::size_t>(a)] == RewardNoise::Deterministic) return m;
  return bernoulliDraw(rng, m) ? 1.0 : 0.0;
}

}  // namespace

std::pair<Observation, std::vector<double>> sampleObsReward(const LayeredCdp& cdp, const Path& p,
                                                            RngStream& rng, EpisodeMeter& meter) {
  if (static_cast<int>(p.size()) > cdp.horizon() - 1)
    throw InvalidAction("sampleObsReward needs a non-terminal state (|p| <= H-1)");
  StateId s = resolve(cdp, p);
  meter.charge();
  const auto& d = cdp.obsDist(s);
  int j = drawSupportIndex(d, rng);
  const auto& e = d.support[static_cast<std::size_t>(j)];
  Observation x;
  x.token = e.token;
  x.features = e.features;
  if (cdp.historyInObservation()) x.history = p;
  std::vector<double> r(static_cast<std::size_t>(cdp.numActions()));
  for (int a = 0; a < cdp.numActions(); ++a) r[static_cast<std::size_t>(a)] = realizeReward(e, a, rng);
  return {std::move(x), std::move(r)};
}

Trajectory runEpisode(const LayeredCdp& cdp, const std::function<int(const Observation&)>& policy,
                      RngStream& rng, EpisodeMeter& meter) {
  meter.charge();
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(cdp.horizon()));
  StateId s = cdp.start();
  Path history;
  for (int h = 1; h <= cdp.horizon(); ++h) {
    const auto& d = cdp.obsDist(s);
    int j = drawSupportIndex(d, rng);
    const auto& e = d.support[static_cast<std::size_t>(j)];
    Observation x;
    x.token = e.token;
    x.features = e.features;
    if (cdp.historyInObservation()) x.history = history;
    int a = policy(x);
    if (a < 0 || a >= cdp.numActions()) throw InvalidAction("policy returned an invalid action");
    double r = realizeReward(e, a, rng);
    traj.steps.push_back({s, std::move(x), a, r});
    traj.totalReward += r;
    history.push_back(a);
    s = cdp.transition(s, a);
  }
  return traj;
}

// --- serialization ---

nlohmann::json cdpToJson(const LayeredCdp& cdp) {
  nlohmann::json j;
  j["horizon"] = cdp.horizon();
  j["numActions"] = cdp.numActions();
  j["levels"] = cdp.statesPerLevel();
  j["start"] = {{"level", 1}, {"index", 0}};
  j["historyInObservation"] = cdp.historyInObservation();

  nlohmann::json transitions = nlohmann::json::array();
  for (int h = 1; h < cdp.horizon(); ++h) {
    nlohmann::json lvl = nlohmann::json::array();
    for (int i = 0; i < cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int a = 0; a < cdp.numActions(); ++a) row.push_back(cdp.transition({h, i}, a).index);
      lvl.push_back(std::move(row));
    }
    transitions.push_back(std::move(lvl));
  }
  j["transitions"] = std::move(transitions);

  nlohmann::json observations = nlohmann::json::array();
  for (int h = 1; h <= cdp.horizon(); ++h) {
    nlohmann::json lvl = nlohmann::json::array();
    for (int i = 0; i < cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]; ++i) {
      nlohmann::json support = nlohmann::json::array();
      for (const auto& e : cdp.obsDist({h, i}).support) {
        nlohmann::json entry;
        entry["token"] = e.token;
        entry["prob"] = e.prob;
        if (!e.features.empty()) entry["features"] = e.features;
        nlohmann::json rewards = nlohmann::json::array();
        for (int a = 0; a < cdp.numActions(); ++a) {
          rewards.push_back({{"mean", e.rewardMean[static_cast<std::size_t>(a)]},
                             {"noise", e.rewardNoise[static_cast<std::size_t>(a)] == RewardNoise::Bernoulli
                                           ? "bernoulli"
                                           : "deterministic"}});
        }
        entry["rewards"] = std::move(rewards);
        support.push_back(std::move(entry));
      }
      lvl.push_back({{"support", std::move(support)}});
    }
    observations.push_back(std::move(lvl));
  }
  j["observations"] = std::move(observations);
  return j;
}

LayeredCdp cdpFromJson(const nlohmann::json& j) {
  try {
    int H = j.at("horizon").get<int>();
    int K = j.at("numActions").get<int>();
    auto levels = j.at("levels").get<std::vector<int>>();
    bool hist = j.value("historyInObservation", false);

    std::vector<std::vector<std::vector<int>>> transitions;
    for (const auto& lvl : j.at("transitions")) {
      std::vector<std::vector<int>> rows;
      for (const auto& row : lvl) rows.push_back(row.get<std::vector<int>>());
      transitions.push_back(std::move(rows));
    }

    std::vector<std::vector<ObsRewardDist>> observations;
    for (const auto& lvl : j.at("observations")) {
      std::vector<ObsRewardDist> dists;
      for (const auto& state : lvl) {
        ObsRewardDist d;
        for (const auto& entry : state.at("support")) {
          SupportEntry e;
          e.token = entry.at("token").get<std::int64_t>();
          e.prob = entry.at("prob").get<double>();
          if (entry.contains("features")) e.features = entry.at("features").get<std::vector<double>>();
          for (const auto& r : entry.at("rewards")) {
            e.rewardMean.push_back(r.at("mean").get<double>());
            std::string noise = r.at("noise").get<std::string>();
            if (noise == "bernoulli")
              e.rewardNoise.push_back(RewardNoise::Bernoulli);
            else if (noise == "deterministic")
              e.rewardNoise.push_back(RewardNoise::Deterministic);
            else
              throw ConfigError("unknown reward noise kind: " + noise);
          }
          d.support.push_back(std::move(e));
        }
        dists.push_back(std::move(d));
      }
      observations.push_back(std::move(dists));
    }
    return LayeredCdp(H, K, std::move(levels), std::move(transitions), std::move(observations), hist);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed CDP document: ") + e.what());
  }
}

void saveCdp(const LayeredCdp& cdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << cdpToJson(cdp).dump(2) << '\n';
}

LayeredCdp loadCdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cannot parse ") + path + ": " + e.what());
  }
  return cdpFromJson(j);
}

}  // namespace lsvee
