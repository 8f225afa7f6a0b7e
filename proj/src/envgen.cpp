#include "lsvee/envgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lsvee/oracle.hpp"

namespace lsvee {

namespace {

void fisherYates(std::vector<int>& v, RngStream& g) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(uniformInt(g, i + 1))]);
}

std::vector<int> levelSizes(int M, int K, int H) {
  std::vector<int> sizes(static_cast<std::size_t>(H), 1);
  for (int h = 2; h <= H; ++h) {
    long cap = static_cast<long>(sizes[static_cast<std::size_t>(h - 2)]) * K;
    sizes[static_cast<std::size_t>(h - 1)] = static_cast<int>(std::min<long>(M, cap));
  }
  return sizes;
}

// Token-keyed value rows in a deterministic order.
struct TokenRows {
  std::vector<std::pair<std::int64_t, std::vector<double>>> rows;

  std::unordered_map<std::int64_t, std::vector<double>> toMap() const {
    std::unordered_map<std::int64_t, std::vector<double>> m;
    for (const auto& [t, v] : rows) m.emplace(t, v);
    return m;
  }
};

double maxDeviation(const TokenRows& a, const TokenRows& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    for (std::size_t k = 0; k < a.rows[i].second.size(); ++k)
      worst = std::max(worst, std::abs(a.rows[i].second[k] - b.rows[i].second[k]));
  return worst;
}

GeneratedInstance buildDisjointFamily(int M, int K, int H, int N, int obsPerState, std::uint64_t seed,
                                      bool perObsRewards) {
  if (M < 1 || K < 1 || H < 1 || N < 1 || obsPerState < 1)
    throw ValidationFailed("generator parameters must be positive");

  std::string lastFailure;
  for (int attempt = 0; attempt < 100; ++attempt) {
    RngStream g(mixSeed(mixSeed(seed, static_cast<std::uint64_t>(StreamOp::Generator)),
                        static_cast<std::uint64_t>(attempt)));
    std::vector<int> sizes = levelSizes(M, K, H);

    // Random layered transitions; every next-level state gets at least one
    // incoming edge (a random permutation seeds the first edges).
    std::vector<std::vector<std::vector<int>>> transitions;
    for (int h = 1; h < H; ++h) {
      int from = sizes[static_cast<std::size_t>(h - 1)];
      int to = sizes[static_cast<std::size_t>(h)];
      int edges = from * K;
      std::vector<int> assign(static_cast<std::size_t>(edges));
      std::vector<int> perm(static_cast<std::size_t>(to));
      for (int i = 0; i < to; ++i) perm[static_cast<std::size_t>(i)] = i;
      fisherYates(perm, g);
      for (int i = 0; i < edges; ++i)
        assign[static_cast<std::size_t>(i)] = i < to ? perm[static_cast<std::size_t>(i)] : uniformInt(g, to);
      fisherYates(assign, g);
      std::vector<std::vector<int>> lvl(static_cast<std::size_t>(from), std::vector<int>(static_cast<std::size_t>(K)));
      for (int i = 0; i < from; ++i)
        for (int a = 0; a < K; ++a) lvl[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = assign[static_cast<std::size_t>(i * K + a)];
      transitions.push_back(std::move(lvl));
    }

    // Globally disjoint tokens; random but comparable observation masses;
    // Bernoulli rewards only at the final level.
    std::int64_t nextToken = 1;
    std::vector<std::vector<ObsRewardDist>> observations;
    for (int h = 1; h <= H; ++h) {
      std::vector<ObsRewardDist> lvl;
      for (int i = 0; i < sizes[static_cast<std::size_t>(h - 1)]; ++i) {
        ObsRewardDist d;
        std::vector<double> weights(static_cast<std::size_t>(obsPerState));
        double total = 0.0;
        for (auto& w : weights) {
          w = 0.5 + u01(g);
          total += w;
        }
        std::vector<double> stateMeans;
        if (h == H && !perObsRewards) {
          stateMeans.resize(static_cast<std::size_t>(K));
          for (auto& m : stateMeans) m = u01(g);
        }
        for (int o = 0; o < obsPerState; ++o) {
          SupportEntry e;
          e.token = nextToken++;
          e.prob = weights[static_cast<std::size_t>(o)] / total;
          if (h == H) {
            if (perObsRewards) {
              e.rewardMean.resize(static_cast<std::size_t>(K));
              for (auto& m : e.rewardMean) m = u01(g);
            } else {
              e.rewardMean = stateMeans;
            }
            e.rewardNoise.assign(static_cast<std::size_t>(K), RewardNoise::Bernoulli);
          } else {
            e.rewardMean.assign(static_cast<std::size_t>(K), 0.0);
            e.rewardNoise.assign(static_cast<std::size_t>(K), RewardNoise::Deterministic);
          }
          d.support.push_back(std::move(e));
        }
        lvl.push_back(std::move(d));
      }
      observations.push_back(std::move(lvl));
    }

    LayeredCdp cdp(H, K, sizes, std::move(transitions), std::move(observations), false);
    ExactValues exact = computeExactValues(cdp);

    // Q* as a token-keyed table (tokens are disjoint, so this is well-defined).
    TokenRows star;
    for (int h = 1; h <= H; ++h)
      for (int i = 0; i < sizes[static_cast<std::size_t>(h - 1)]; ++i) {
        const auto& d = cdp.obsDist({h, i});
        for (std::size_t j = 0; j < d.support.size(); ++j)
          star.rows.emplace_back(d.support[j].token,
                                 exact.qStar[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)][j]);
      }

    // Distractors, mixed 50/50: perturbed copies of Q* and exact Q-functions
    // of random other policies (the hard ones). Anything within 0.05 of Q*
    // pointwise gets redrawn.
    std::vector<TokenRows> sources(1, star);
    bool failed = false;
    for (int d = 1; d < N && !failed; ++d) {
      bool wantPolicyQ = (d % 2 == 0);
      bool found = false;
      for (int round = 0; round < 200 && !found; ++round) {
        bool policyQ = wantPolicyQ && round < 100;  // falls back to perturbations
        TokenRows cand;
        if (policyQ) {
          std::unordered_map<std::int64_t, int> act;
          for (const auto& [t, _] : star.rows) act[t] = uniformInt(g, K);
          PolicyValues pv = computePolicyValues(cdp, [&act](const Observation& x) { return act.at(x.token); });
          for (int h = 1; h <= H; ++h)
            for (int i = 0; i < sizes[static_cast<std::size_t>(h - 1)]; ++i) {
              const auto& dd = cdp.obsDist({h, i});
              for (std::size_t j = 0; j < dd.support.size(); ++j)
                cand.rows.emplace_back(dd.support[j].token,
                                       pv.q[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)][j]);
            }
        } else {
          cand = star;
          for (auto& [t, vals] : cand.rows)
            for (auto& v : vals) v = std::clamp(v + (u01(g) * 0.6 - 0.3), 0.0, 1.0);
        }
        if (maxDeviation(cand, star) >= 0.05) {
          sources.push_back(std::move(cand));
          found = true;
        }
      }
      if (!found) {
        lastFailure = "could not draw a distractor at least 0.05 away from Q*";
        failed = true;
      }
    }
    if (failed) continue;

    std::vector<int> order(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;
    fisherYates(order, g);

    FunctionClass F;
    for (int idx = 0; idx < N; ++idx) {
      int src = order[static_cast<std::size_t>(idx)];
      F.members.push_back(std::make_shared<TableQ>(idx, K, sources[static_cast<std::size_t>(src)].toMap()));
      if (src == 0) F.starIndex = idx;
    }

    AssumptionReport rep = validateAssumptions(cdp, F);
    if (!rep.allPass()) {
      lastFailure = "assumption validation failed: " + rep.reactiveCounterexample + rep.realizabilityNote;
      continue;
    }
    double starValue = policyValueExact(cdp, [&F](const Observation& x) {
      return greedyAction(*F.members[static_cast<std::size_t>(*F.starIndex)], x);
    });
    if (std::abs(starValue - exact.vStarRoot) > 1e-9) {
      lastFailure = "greedy-on-Q* does not attain V*";
      continue;
    }
    return {std::move(cdp), std::move(F)};
  }
  throw ValidationFailed("makeRandomRealizable: no valid instance after 100 attempts (" + lastFailure + ")");
}

}  // namespace

GeneratedInstance makeRandomRealizable(int M, int K, int H, int N, int obsPerState, std::uint64_t seed) {
  return buildDisjointFamily(M, K, H, N, obsPerState, seed, /*perObsRewards=*/false);
}

GeneratedInstance makeDisjointObs(int M, int K, int H, int obsPerState, int N, std::uint64_t seed) {
  return buildDisjointFamily(M, K, H, N, obsPerState, seed, /*perObsRewards=*/true);
}

LockInstance makeLock(int H, int K, double epsilon, const Path& pStar, std::uint64_t seed) {
  (void)seed;  // the construction is deterministic
  if (!(epsilon > 0.0 && epsilon < std::sqrt(0.125)))
    throw ValidationFailed("lock epsilon must lie in (0, sqrt(1/8))");
  if (static_cast<int>(pStar.size()) != H) throw ValidationFailed("pStar must have length H");
  for (int a : pStar)
    if (a < 0 || a >= K) throw InvalidAction("pStar contains an invalid action");
  double count = std::pow(static_cast<double>(K), H);
  if (count > 1e5) throw SizeGuardExceeded("lock class K^H exceeds 1e5");
  int numPolicies = static_cast<int>(std::llround(count));

  // Two states per level: index 0 = "good", index 1 = "bad".
  std::vector<int> sizes(static_cast<std::size_t>(H), 2);
  std::vector<std::vector<std::vector<int>>> transitions;
  for (int h = 1; h < H; ++h) {
    std::vector<std::vector<int>> lvl(2, std::vector<int>(static_cast<std::size_t>(K), 1));
    lvl[0][static_cast<std::size_t>(pStar[static_cast<std::size_t>(h - 1)])] = 0;
    transitions.push_back(std::move(lvl));
  }

  std::vector<std::vector<ObsRewardDist>> observations;
  for (int h = 1; h <= H; ++h) {
    std::vector<ObsRewardDist> lvl;
    for (int i = 0; i < 2; ++i) {
      SupportEntry e;
      e.token = h;  // one uninformative token per level, shared by both states
      e.prob = 1.0;
      if (h == H) {
        e.rewardMean.assign(static_cast<std::size_t>(K), 0.5);
        if (i == 0) e.rewardMean[static_cast<std::size_t>(pStar[static_cast<std::size_t>(H - 1)])] = 0.5 + epsilon;
        e.rewardNoise.assign(static_cast<std::size_t>(K), RewardNoise::Bernoulli);
      } else {
        e.rewardMean.assign(static_cast<std::size_t>(K), 0.0);
        e.rewardNoise.assign(static_cast<std::size_t>(K), RewardNoise::Deterministic);
      }
      ObsRewardDist d;
      d.support.push_back(std::move(e));
      lvl.push_back(std::move(d));
    }
    observations.push_back(std::move(lvl));
  }

  LockInstance out{LayeredCdp(H, K, std::move(sizes), std::move(transitions), std::move(observations),
                              /*historyInObservation=*/true),
                   {}, {}};

  // All K^H path-indexed regressors and all K^H open-loop policies, both in
  // lexicographic path order.
  Path p(static_cast<std::size_t>(H), 0);
  for (int id = 0; id < numPolicies; ++id) {
    out.funcs.members.push_back(std::make_shared<PathIndexedQ>(id, K, p, epsilon));
    if (p == pStar) out.funcs.starIndex = id;

    std::unordered_map<std::int64_t, std::vector<double>> rows;
    for (int h = 1; h <= H; ++h) {
      std::vector<double> row(static_cast<std::size_t>(K), 0.0);
      row[static_cast<std::size_t>(p[static_cast<std::size_t>(h - 1)])] = 1.0;
      rows[h] = std::move(row);
    }
    out.openLoopPolicies.emplace_back(std::make_shared<TableQ>(id, K, std::move(rows)));

    for (int pos = H - 1; pos >= 0; --pos) {  // odometer
      if (++p[static_cast<std::size_t>(pos)] < K) break;
      p[static_cast<std::size_t>(pos)] = 0;
    }
  }
  return out;
}

AssumptionReport validateAssumptions(const LayeredCdp& cdp, const FunctionClass& F) {
  AssumptionReport rep;
  ExactValues exact = computeExactValues(cdp);
  int H = cdp.horizon();
  int K = cdp.numActions();

  // Assumption 3: the representation only admits layered deterministic
  // transition tables with a point-mass start; construction already validated.
  rep.layeredDeterministic = true;
  rep.structureNote = "layered deterministic transitions with a point-mass start";

  // Assumption 1: Q* must agree across states sharing a declared token.
  rep.reactiveQStar = true;
  std::map<std::int64_t, std::vector<std::pair<StateId, std::size_t>>> byToken;
  for (int h = 1; h <= H; ++h)
    for (int i = 0; i < cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]; ++i) {
      const auto& d = cdp.obsDist({h, i});
      for (std::size_t j = 0; j < d.support.size(); ++j) byToken[d.support[j].token].push_back({{h, i}, j});
    }
  for (const auto& [token, holders] : byToken) {
    if (!rep.reactiveQStar) break;
    for (std::size_t u = 0; u + 1 < holders.size() && rep.reactiveQStar; ++u)
      for (std::size_t v = u + 1; v < holders.size() && rep.reactiveQStar; ++v) {
        auto [s1, j1] = holders[u];
        auto [s2, j2] = holders[v];
        if (s1 == s2) continue;
        for (int a = 0; a < K; ++a) {
          double q1 = exact.qStar[static_cast<std::size_t>(s1.level - 1)][static_cast<std::size_t>(s1.index)][j1]
                                 [static_cast<std::size_t>(a)];
          double q2 = exact.qStar[static_cast<std::size_t>(s2.level - 1)][static_cast<std::size_t>(s2.index)][j2]
                                 [static_cast<std::size_t>(a)];
          if (std::abs(q1 - q2) > 1e-9) {
            rep.reactiveQStar = false;
            std::ostringstream msg;
            msg << "states (" << s1.level << "," << s1.index << ") and (" << s2.level << "," << s2.index
                << ") share token " << token << " but Q* differs at action " << a << ": " << q1 << " vs " << q2;
            rep.reactiveCounterexample = msg.str();
            break;
          }
        }
      }
  }

  // Assumption 2: some member must equal Q* pointwise on reachable
  // (observation, action) pairs. Walk reachable paths so history-augmented
  // observations get their histories.
  rep.realizable = false;
  long budget = 1000000;
  for (int fi = 0; fi < F.size() && !rep.realizable; ++fi) {
    const QFunction& f = *F.members[static_cast<std::size_t>(fi)];
    double worst = 0.0;
    // Walk reachable paths; for state-pure observations one visit per state
    // suffices, with history-augmented observations every path is its own
    // observation point.
    std::set<StateId> seen;
    std::vector<Path> frontier{{}};
    while (!frontier.empty()) {
      Path p = std::move(frontier.back());
      frontier.pop_back();
      StateId s = resolve(cdp, p);
      if (cdp.isTerminal(s)) continue;
      if (!cdp.historyInObservation() && !seen.insert(s).second) continue;
      if (--budget < 0) throw SizeGuardExceeded("realizability sweep too large");
      const auto& d = cdp.obsDist(s);
      for (std::size_t j = 0; j < d.support.size(); ++j) {
        Observation x = observationAt(cdp, p, static_cast<int>(j));
        for (int a = 0; a < K; ++a)
          worst = std::max(worst,
                           std::abs(f.eval(x, a) -
                                    exact.qStar[static_cast<std::size_t>(s.level - 1)][static_cast<std::size_t>(
                                        s.index)][j][static_cast<std::size_t>(a)]));
      }
      if (static_cast<int>(p.size()) < H) {
        Path child = p;
        child.push_back(0);
        for (int a = 0; a < K; ++a) {
          child.back() = a;
          frontier.push_back(child);
        }
      }
    }
    if (worst <= 1e-9) {
      rep.realizable = true;
      rep.realizedMemberIndex = fi;
    }
  }
  if (!rep.realizable) rep.realizabilityNote = "no member matches Q* pointwise within 1e-9";
  return rep;
}

}  // namespace lsvee
