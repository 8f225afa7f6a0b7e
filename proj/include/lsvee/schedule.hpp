#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsvee/common.hpp"

namespace lsvee {

// Theory mode uses the published constants; they make even H=3 runs need
// >1e9 episodes, so a practical mode keeps the same formula shapes with
// configurable leading multipliers (defaults below).
enum class ConstantsMode { Theory, Practical };

std::string toString(ConstantsMode m);
ConstantsMode constantsModeFromString(const std::string& s);

struct AlgoParams {
  double epsilon = 0.1;
  double delta = 0.05;
  ConstantsMode mode = ConstantsMode::Practical;
  // Practical-mode multipliers; ignored in theory mode.
  double cPhi = 4.0;     // phi = eps / (cPhi * H^2 * sqrt(K))     (theory constant: 320)
  double cNtrain = 8.0;  // nTrain = ceil(cNtrain log(4N/d') / phi^2)   (theory: 24)
  double cNtest = 2.0;   // nTest  = ceil(cNtest  log(2N/d') / phi^2)   (theory: 2)
  double cN1 = 8.0;      // n1 = ceil(cN1 log(6MH/d) / eps^2)           (theory: 32)
  double cN2 = 4.0;      // n2 = ceil(cN2 log(3MH/d) / eps)             (theory: 8)
  std::optional<std::uint64_t> budget;  // episode cap
};

// All sample sizes and thresholds of the algorithm, resolved for one
// environment shape. Pure arithmetic; delta arguments are the per-call
// allocations decided by the callers.
class Schedule {
 public:
  Schedule(const AlgoParams& params, int H, int K, int M, int N);

  double phi() const { return phi_; }
  double epsilon() const { return params_.epsilon; }
  int horizon() const { return H_; }
  int numActions() const { return K_; }
  int statesPerLevelBound() const { return M_; }
  int classSize() const { return N_; }
  const AlgoParams& params() const { return params_; }

  // epsTest for consensus tests spawned while processing a path of length
  // pathLen: 20 (H - pathLen - 5/4) sqrt(K) phi.
  double epsTest(int pathLen) const;

  long nTrain(double deltaPrime) const;
  long nTest(double deltaPrime) const;
  double elimThreshold(double deltaPrime, long nTrain) const;  // 2 phi^2 + 22 log(2N/d')/nTrain

  double epsDemand() const { return params_.epsilon / 2.0; }
  long n1(double delta) const;
  long n2(double delta) const;

  // Per-call failure-probability allocations (Appendix-style accounting).
  double consensusDelta(double dfsDelta) const { return (dfsDelta / 2.0) / (static_cast<double>(M_) * K_ * H_); }
  double tdElimDelta(double dfsDelta) const { return (dfsDelta / 2.0) / (static_cast<double>(M_) * H_); }
  double onDemandDfsDelta(double eodDelta, long nTwo) const {
    return eodDelta / (3.0 * M_ * H_ * H_ * static_cast<double>(nTwo));
  }

 private:
  AlgoParams params_;
  int H_, K_, M_, N_;
  double phi_;
};

// Snapshot of every resolved sample size and threshold for a full run at
// total failure probability delta (root DFS gets delta/2, on-demand delta/2).
struct ResolvedParams {
  double epsilon = 0, delta = 0, phi = 0, epsDemand = 0;
  ConstantsMode mode = ConstantsMode::Practical;
  std::vector<double> epsTestPerLen;  // index = |p| of the processing path, 0..H-2
  double deltaConsensusRoot = 0, deltaTdElimRoot = 0;
  long nTestRoot = 0, nTrainRoot = 0;
  double thresholdRoot = 0;
  long n1 = 0, n2 = 0;
  double deltaDfsOnDemand = 0, deltaConsensusOnDemand = 0, deltaTdElimOnDemand = 0;
  long nTestOnDemand = 0, nTrainOnDemand = 0;
  double thresholdOnDemand = 0;
};

ResolvedParams computeParams(double epsilon, double delta, int H, int K, int M, int N,
                             const AlgoParams& modeAndMultipliers);

}  // namespace lsvee
