#include "lsvee/schedule.hpp"

#include <cmath>

namespace lsvee {

std::string toString(ConstantsMode m) { return m == ConstantsMode::Theory ? "theory" : "practical"; }

ConstantsMode constantsModeFromString(const std::string& s) {
  if (s == "theory") return ConstantsMode::Theory;
  if (s == "practical") return ConstantsMode::Practical;
  throw ConfigError("unknown constants mode: " + s);
}

namespace {

long ceilToLong(double x) { return static_cast<long>(std::ceil(x)); }

}  // namespace

Schedule::Schedule(const AlgoParams& params, int H, int K, int M, int N)
    : params_(params), H_(H), K_(K), M_(M), N_(N) {
  if (!(params_.epsilon > 0.0 && params_.epsilon < 1.0) || !(params_.delta > 0.0 && params_.delta < 1.0))
    throw ConfigError("epsilon and delta must lie in (0,1)");
  if (H_ < 1 || K_ < 1 || M_ < 1 || N_ < 1) throw ConfigError("H, K, M, N must be positive");
  double sqrtK = std::sqrt(static_cast<double>(K_));
  if (params_.mode == ConstantsMode::Theory)
    phi_ = params_.epsilon / (320.0 * H_ * H_ * sqrtK);
  else
    phi_ = params_.epsilon / (params_.cPhi * H_ * H_ * sqrtK);
}

double Schedule::epsTest(int pathLen) const {
  return 20.0 * (H_ - pathLen - 1.25) * std::sqrt(static_cast<double>(K_)) * phi_;
}

long Schedule::nTrain(double deltaPrime) const {
  double c = params_.mode == ConstantsMode::Theory ? 24.0 : params_.cNtrain;
  return ceilToLong(c * std::log(4.0 * N_ / deltaPrime) / (phi_ * phi_));
}

long Schedule::nTest(double deltaPrime) const {
  double c = params_.mode == ConstantsMode::Theory ? 2.0 : params_.cNtest;
  return ceilToLong(c * std::log(2.0 * N_ / deltaPrime) / (phi_ * phi_));
}

double Schedule::elimThreshold(double deltaPrime, long nTrain) const {
  return 2.0 * phi_ * phi_ + 22.0 * std::log(2.0 * N_ / deltaPrime) / static_cast<double>(nTrain);
}

long Schedule::n1(double delta) const {
  double c = params_.mode == ConstantsMode::Theory ? 32.0 : params_.cN1;
  return ceilToLong(c * std::log(6.0 * M_ * H_ / delta) / (params_.epsilon * params_.epsilon));
}

long Schedule::n2(double delta) const {
  double c = params_.mode == ConstantsMode::Theory ? 8.0 : params_.cN2;
  return ceilToLong(c * std::log(3.0 * M_ * H_ / delta) / params_.epsilon);
}

ResolvedParams computeParams(double epsilon, double delta, int H, int K, int M, int N,
                             const AlgoParams& modeAndMultipliers) {
  AlgoParams p = modeAndMultipliers;
  p.epsilon = epsilon;
  p.delta = delta;
  Schedule s(p, H, K, M, N);

  ResolvedParams out;
  out.epsilon = epsilon;
  out.delta = delta;
  out.mode = p.mode;
  out.phi = s.phi();
  out.epsDemand = s.epsDemand();
  for (int len = 0; len <= H - 2; ++len) out.epsTestPerLen.push_back(s.epsTest(len));

  double dfsDelta = delta / 2.0;
  out.deltaConsensusRoot = s.consensusDelta(dfsDelta);
  out.deltaTdElimRoot = s.tdElimDelta(dfsDelta);
  out.nTestRoot = s.nTest(out.deltaConsensusRoot);
  out.nTrainRoot = s.nTrain(out.deltaTdElimRoot);
  out.thresholdRoot = s.elimThreshold(out.deltaTdElimRoot, out.nTrainRoot);

  double eodDelta = delta / 2.0;
  out.n1 = s.n1(eodDelta);
  out.n2 = s.n2(eodDelta);
  out.deltaDfsOnDemand = s.onDemandDfsDelta(eodDelta, out.n2);
  out.deltaConsensusOnDemand = s.consensusDelta(out.deltaDfsOnDemand);
  out.deltaTdElimOnDemand = s.tdElimDelta(out.deltaDfsOnDemand);
  out.nTestOnDemand = s.nTest(out.deltaConsensusOnDemand);
  out.nTrainOnDemand = s.nTrain(out.deltaTdElimOnDemand);
  out.thresholdOnDemand = s.elimThreshold(out.deltaTdElimOnDemand, out.nTrainOnDemand);
  return out;
}

}  // namespace lsvee
