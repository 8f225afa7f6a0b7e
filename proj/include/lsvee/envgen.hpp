#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsvee/cdp.hpp"
#include "lsvee/funcclass.hpp"

namespace lsvee {

struct GeneratedInstance {
  LayeredCdp cdp;
  FunctionClass funcs;
};

// Random layered deterministic environment with disjoint observation tokens
// (so the reactive-Q* assumption holds by construction), Bernoulli rewards
// only at the final level, and F = {Q*} + N-1 distractors at a seeded random
// position. Level sizes are size(1)=1, size(h)=min(M, K*size(h-1)) so every
// state is reachable. Validates its own assumptions before returning.
GeneratedInstance makeRandomRealizable(int M, int K, int H, int N, int obsPerState, std::uint64_t seed);

// Same family with several observations per state and richer per-observation
// reward conditioning (means and noise kinds drawn per observation). With
// obsPerState = 1 it produces the identical instance as makeRandomRealizable.
GeneratedInstance makeDisjointObs(int M, int K, int H, int obsPerState, int N, std::uint64_t seed);

struct LockInstance {
  LayeredCdp cdp;
  FunctionClass funcs;                  // all K^H path-indexed regressors
  std::vector<Policy> openLoopPolicies; // all K^H open-loop policies, lexicographic
};

// The combination-lock family: two states per level sharing one observation
// token, zero reward everywhere except the final level, Ber(1/2+eps) on the
// secret path and Ber(1/2) otherwise. Observations carry the action history so
// the path-indexed regressors stay reactive. Guard: K^H <= 1e5.
LockInstance makeLock(int H, int K, double epsilon, const Path& pStar, std::uint64_t seed);

struct AssumptionReport {
  bool reactiveQStar = false;      // Assumption: Q* agrees across states sharing a token
  std::string reactiveCounterexample;
  bool realizable = false;         // Assumption: some f in F equals Q* pointwise
  std::optional<int> realizedMemberIndex;
  std::string realizabilityNote;
  bool layeredDeterministic = false;
  std::string structureNote;

  bool allPass() const { return reactiveQStar && realizable && layeredDeterministic; }
};

// Checks the three model assumptions against the declared environment,
// returning pass/fail with counterexamples. The reactive-Q* check compares
// declared observation tokens (what a reactive class would key on), so the
// lock family fails it with a (g_h, b_h, x_h) counterexample.
AssumptionReport validateAssumptions(const LayeredCdp& cdp, const FunctionClass& F);

}  // namespace lsvee
