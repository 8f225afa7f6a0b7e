#include "lsvee/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace lsvee {

namespace {

constexpr double kSizeGuard = 1e7;  // elementary operations

void checkGuard(const LayeredCdp& cdp) {
  double ops = 0.0;
  for (int h = 1; h <= cdp.horizon(); ++h) {
    int maxSupport = 1;
    for (int i = 0; i < cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]; ++i)
      maxSupport = std::max(maxSupport, static_cast<int>(cdp.obsDist({h, i}).support.size()));
    ops += static_cast<double>(cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]) * cdp.numActions() * maxSupport;
  }
  if (ops > kSizeGuard) throw SizeGuardExceeded("environment too large for exact dynamic programming");
}

Observation plainObservation(const SupportEntry& e) {
  Observation x;
  x.token = e.token;
  x.features = e.features;
  return x;
}

}  // namespace

ExactValues computeExactValues(const LayeredCdp& cdp) {
  checkGuard(cdp);
  int H = cdp.horizon();
  int K = cdp.numActions();

  ExactValues out;
  out.vStar.assign(static_cast<std::size_t>(H) + 1, {});
  out.vStar[static_cast<std::size_t>(H)].assign(1, 0.0);  // terminal
  out.qStar.assign(static_cast<std::size_t>(H), {});

  for (int h = H; h >= 1; --h) {
    int levelSize = cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)];
    out.vStar[static_cast<std::size_t>(h - 1)].assign(static_cast<std::size_t>(levelSize), 0.0);
    out.qStar[static_cast<std::size_t>(h - 1)].assign(static_cast<std::size_t>(levelSize), {});
    for (int i = 0; i < levelSize; ++i) {
      const auto& d = cdp.obsDist({h, i});
      auto& qRows = out.qStar[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)];
      qRows.assign(d.support.size(), std::vector<double>(static_cast<std::size_t>(K), 0.0));
      double v = 0.0;
      for (std::size_t j = 0; j < d.support.size(); ++j) {
        const auto& e = d.support[j];
        double best = 0.0;
        for (int a = 0; a < K; ++a) {
          StateId nxt = cdp.transition({h, i}, a);
          double vNext = cdp.isTerminal(nxt)
                             ? 0.0
                             : out.vStar[static_cast<std::size_t>(h)][static_cast<std::size_t>(nxt.index)];
          double q = e.rewardMean[static_cast<std::size_t>(a)] + vNext;
          qRows[j][static_cast<std::size_t>(a)] = q;
          if (a == 0 || q > best) best = q;
        }
        v += e.prob * best;
      }
      out.vStar[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)] = v;
    }
  }
  out.vStarRoot = out.vStar[0][0];
  return out;
}

namespace {

// Exact policy value over the path tree with memoization: by state when
// observations are state-pure, by path when the environment attaches action
// histories.
class PolicyValueWalker {
 public:
  PolicyValueWalker(const LayeredCdp& cdp, const PolicyFn& policy) : cdp_(cdp), policy_(policy) {}

  double value(const Path& p) {
    StateId s = resolve(cdp_, p);
    if (cdp_.isTerminal(s)) return 0.0;
    std::uint64_t key = cdp_.historyInObservation()
                            ? cdp_.encodePath(p)
                            : (static_cast<std::uint64_t>(s.level) << 32) | static_cast<std::uint64_t>(s.index);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    if (++nodes_ > static_cast<long>(kSizeGuard))
      throw SizeGuardExceeded("policy evaluation tree too large");

    const auto& d = cdp_.obsDist(s);
    double v = 0.0;
    Path child = p;
    child.push_back(0);
    for (std::size_t j = 0; j < d.support.size(); ++j) {
      Observation x = observationAt(cdp_, p, static_cast<int>(j));
      int a = policy_(x);
      if (a < 0 || a >= cdp_.numActions()) throw InvalidAction("policy returned an invalid action");
      child.back() = a;
      v += d.support[j].prob * (d.support[j].rewardMean[static_cast<std::size_t>(a)] + value(child));
    }
    memo_[key] = v;
    return v;
  }

 private:
  const LayeredCdp& cdp_;
  const PolicyFn& policy_;
  std::unordered_map<std::uint64_t, double> memo_;
  long nodes_ = 0;
};

}  // namespace

double policyValueExact(const LayeredCdp& cdp, const PolicyFn& policy) {
  checkGuard(cdp);
  PolicyValueWalker walker(cdp, policy);
  return walker.value({});
}

double valuePredictionExact(const LayeredCdp& cdp, const Path& p, const QFunction& f) {
  return valuePredictionExact(cdp, p, f, [&f](const Observation& x) { return greedyAction(f, x); });
}

double valuePredictionExact(const LayeredCdp& cdp, const Path& p, const QFunction& f, const PolicyFn& act) {
  checkGuard(cdp);
  if (static_cast<int>(p.size()) > cdp.horizon()) throw InvalidAction("path longer than the horizon");
  if (static_cast<int>(p.size()) == cdp.horizon()) return 0.0;  // terminal convention
  StateId s = resolve(cdp, p);
  const auto& d = cdp.obsDist(s);
  double v = 0.0;
  for (std::size_t j = 0; j < d.support.size(); ++j) {
    Observation x = observationAt(cdp, p, static_cast<int>(j));
    v += d.support[j].prob * f.eval(x, act(x));
  }
  return v;
}

std::pair<int, double> bruteForcePolicySearch(const LayeredCdp& cdp, const FunctionClass& F) {
  if (F.members.empty()) throw Error("bruteForcePolicySearch needs a nonempty class");
  int bestId = -1;
  double bestVal = 0.0;
  for (const auto& f : F.members) {
    double v = policyValueExact(cdp, [&f](const Observation& x) { return greedyAction(*f, x); });
    if (bestId < 0 || v > bestVal || (v == bestVal && f->id() < bestId)) {
      bestId = f->id();
      bestVal = v;
    }
  }
  return {bestId, bestVal};
}

LearnedSetRisk learnedSetRisk(const LayeredCdp& cdp, const ExactValues& exact, const QFunction& f,
                              const std::set<StateId>& learned) {
  checkGuard(cdp);
  if (cdp.historyInObservation())
    throw ValidationFailed("learnedSetRisk is not defined for history-augmented observations");
  int H = cdp.horizon();

  // Backward induction for V(s, pi_f) and the exit probability q[s -> outside L].
  std::vector<std::vector<double>> v(static_cast<std::size_t>(H) + 1), q(static_cast<std::size_t>(H) + 1);
  v[static_cast<std::size_t>(H)].assign(1, 0.0);
  q[static_cast<std::size_t>(H)].assign(1, 0.0);  // the terminal pseudo-state is always "learned"
  for (int h = H; h >= 1; --h) {
    int levelSize = cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)];
    v[static_cast<std::size_t>(h - 1)].assign(static_cast<std::size_t>(levelSize), 0.0);
    q[static_cast<std::size_t>(h - 1)].assign(static_cast<std::size_t>(levelSize), 0.0);
    for (int i = 0; i < levelSize; ++i) {
      const auto& d = cdp.obsDist({h, i});
      double vs = 0.0, qs = 0.0;
      for (std::size_t j = 0; j < d.support.size(); ++j) {
        Observation x = plainObservation(d.support[j]);
        int a = greedyAction(f, x);
        StateId nxt = cdp.transition({h, i}, a);
        double vNext = cdp.isTerminal(nxt) ? 0.0 : v[static_cast<std::size_t>(h)][static_cast<std::size_t>(nxt.index)];
        double qNext = cdp.isTerminal(nxt) ? 0.0 : q[static_cast<std::size_t>(h)][static_cast<std::size_t>(nxt.index)];
        vs += d.support[j].prob * (d.support[j].rewardMean[static_cast<std::size_t>(a)] + vNext);
        qs += d.support[j].prob * qNext;
      }
      if (learned.find(StateId{h, i}) == learned.end()) qs = 1.0;  // visiting this state already exits L
      v[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)] = vs;
      q[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)] = qs;
    }
  }
  return {exact.vStarRoot - v[0][0], q[0][0]};
}

std::set<StateId> learnedSet(const LayeredCdp& cdp, const ExactValues& exact, const FunctionClass& survivors,
                             double phi) {
  checkGuard(cdp);
  if (cdp.historyInObservation())
    throw ValidationFailed("learnedSet is not defined for history-augmented observations");
  int H = cdp.horizon();
  int K = cdp.numActions();
  std::set<StateId> out;
  for (int h = 1; h <= H; ++h) {
    double threshold = 4.0 * phi * std::sqrt(2.0 * K) + 2.0 * phi + 40.0 * (H - h) * std::sqrt(static_cast<double>(K)) * phi;
    for (int i = 0; i < cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]; ++i) {
      const auto& d = cdp.obsDist({h, i});
      double worst = 0.0;
      for (const auto& f : survivors.members) {
        // E_x Q*(x, pi_f(x)): act once like pi_f, then optimally.
        double pred = 0.0;
        for (std::size_t j = 0; j < d.support.size(); ++j) {
          Observation x = plainObservation(d.support[j]);
          int a = greedyAction(*f, x);
          pred += d.support[j].prob *
                  exact.qStar[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)][j][static_cast<std::size_t>(a)];
        }
        worst = std::max(worst, exact.vStarOf({h, i}) - pred);
      }
      if (worst <= threshold) out.insert({h, i});
    }
  }
  return out;
}

double maxBellmanResidual(const LayeredCdp& cdp, const ExactValues& exact) {
  checkGuard(cdp);
  auto reach = reachableStates(cdp);
  double worst = 0.0;
  for (int h = 1; h <= cdp.horizon(); ++h) {
    for (int i = 0; i < cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)]; ++i) {
      if (!reach[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)]) continue;
      const auto& d = cdp.obsDist({h, i});
      for (std::size_t j = 0; j < d.support.size(); ++j) {
        for (int a = 0; a < cdp.numActions(); ++a) {
          double lhs =
              exact.qStar[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)][j][static_cast<std::size_t>(a)];
          StateId nxt = cdp.transition({h, i}, a);
          double cont = 0.0;
          if (!cdp.isTerminal(nxt)) {
            const auto& dn = cdp.obsDist(nxt);
            for (std::size_t j2 = 0; j2 < dn.support.size(); ++j2) {
              const auto& qRow =
                  exact.qStar[static_cast<std::size_t>(nxt.level - 1)][static_cast<std::size_t>(nxt.index)][j2];
              cont += dn.support[j2].prob * *std::max_element(qRow.begin(), qRow.end());
            }
          }
          double rhs = d.support[j].rewardMean[static_cast<std::size_t>(a)] + cont;
          worst = std::max(worst, std::abs(lhs - rhs));
        }
      }
    }
  }
  return worst;
}

PolicyValues computePolicyValues(const LayeredCdp& cdp, const PolicyFn& policy) {
  checkGuard(cdp);
  if (cdp.historyInObservation())
    throw ValidationFailed("computePolicyValues is not defined for history-augmented observations");
  int H = cdp.horizon();
  int K = cdp.numActions();
  PolicyValues out;
  out.v.assign(static_cast<std::size_t>(H) + 1, {});
  out.v[static_cast<std::size_t>(H)].assign(1, 0.0);
  out.q.assign(static_cast<std::size_t>(H), {});
  for (int h = H; h >= 1; --h) {
    int levelSize = cdp.statesPerLevel()[static_cast<std::size_t>(h - 1)];
    out.v[static_cast<std::size_t>(h - 1)].assign(static_cast<std::size_t>(levelSize), 0.0);
    out.q[static_cast<std::size_t>(h - 1)].assign(static_cast<std::size_t>(levelSize), {});
    for (int i = 0; i < levelSize; ++i) {
      const auto& d = cdp.obsDist({h, i});
      auto& qRows = out.q[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)];
      qRows.assign(d.support.size(), std::vector<double>(static_cast<std::size_t>(K), 0.0));
      double vs = 0.0;
      for (std::size_t j = 0; j < d.support.size(); ++j) {
        const auto& e = d.support[j];
        for (int a = 0; a < K; ++a) {
          StateId nxt = cdp.transition({h, i}, a);
          double vNext =
              cdp.isTerminal(nxt) ? 0.0 : out.v[static_cast<std::size_t>(h)][static_cast<std::size_t>(nxt.index)];
          qRows[j][static_cast<std::size_t>(a)] = e.rewardMean[static_cast<std::size_t>(a)] + vNext;
        }
        Observation x = plainObservation(e);
        int a = policy(x);
        if (a < 0 || a >= K) throw InvalidAction("policy returned an invalid action");
        vs += e.prob * qRows[j][static_cast<std::size_t>(a)];
      }
      out.v[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i)] = vs;
    }
  }
  out.vRoot = out.v[0][0];
  return out;
}

}  // namespace lsvee
