#pragma once

#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "lsvee/cdp.hpp"
#include "lsvee/funcclass.hpp"

namespace lsvee {

// Exact dynamic programming on the (small) deterministic tree. All
// expectations are exact sums over declared finite supports; pure functions
// over immutable inputs, freely parallelizable.

using PolicyFn = std::function<int(const Observation&)>;

struct ExactValues {
  double vStarRoot = 0.0;
  // vStar[level-1][index] for levels 1..H+1 (terminal row is all zeros).
  std::vector<std::vector<double>> vStar;
  // qStar[level-1][index][supportIdx][action], aligned with the declared
  // observation support of each state.
  std::vector<std::vector<std::vector<std::vector<double>>>> qStar;

  double vStarOf(StateId s) const { return vStar[static_cast<std::size_t>(s.level - 1)][static_cast<std::size_t>(s.index)]; }
};

// Backward induction of V* and Q* (guard: sum_h M_h * K * maxSupport <= 1e7).
ExactValues computeExactValues(const LayeredCdp& cdp);

// Exact V(pi) by backward induction with per-state expectation over
// observations. Policies may read the attached action history; memoization
// falls back from states to paths in that case.
double policyValueExact(const LayeredCdp& cdp, const PolicyFn& policy);

// E_{x ~ D_p} f(x, pi_f(x)); the |p| = H convention gives 0.
double valuePredictionExact(const LayeredCdp& cdp, const Path& p, const QFunction& f);

// E_{x ~ D_p} f(x, act(x)) for an arbitrary action rule.
double valuePredictionExact(const LayeredCdp& cdp, const Path& p, const QFunction& f, const PolicyFn& act);

// argmax over F of policyValueExact(pi_f); lowest id on ties.
std::pair<int, double> bruteForcePolicySearch(const LayeredCdp& cdp, const FunctionClass& F);

struct LearnedSetRisk {
  double suboptimality = 0.0;  // V* - V(pi_f)
  double exitProb = 0.0;       // probability pi_f visits a state outside L
};

// Exact suboptimality of pi_f and the exact probability that pi_f visits a
// state outside `learned`, both by backward induction. Not defined for
// history-augmented environments.
LearnedSetRisk learnedSetRisk(const LayeredCdp& cdp, const ExactValues& exact, const QFunction& f,
                              const std::set<StateId>& learned);

// The learned-state set induced by a survivor class: states s at level h with
// max_f [V*(s) - E_{x~D_s} Q*(x, pi_f(x))] <= 4 phi sqrt(2K) + 2 phi
// + 40 (H-h) sqrt(K) phi. Not defined for history-augmented environments.
std::set<StateId> learnedSet(const LayeredCdp& cdp, const ExactValues& exact, const FunctionClass& survivors,
                             double phi);

// Max over reachable (s, x, a) of |Q*(s,x,a) - (E r(a) + E_{x'} Q*(s',x',argmax))|.
double maxBellmanResidual(const LayeredCdp& cdp, const ExactValues& exact);

// Exact V and Q of an arbitrary reactive policy (per state / per support
// point). Used for hard distractor construction and cross-checks.
struct PolicyValues {
  std::vector<std::vector<double>> v;                             // [level-1][index]
  std::vector<std::vector<std::vector<std::vector<double>>>> q;   // like ExactValues::qStar
  double vRoot = 0.0;
};
PolicyValues computePolicyValues(const LayeredCdp& cdp, const PolicyFn& policy);

}  // namespace lsvee
