#include "lsvee/algo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lsvee {

std::string toString(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::BudgetExceeded: return "budgetExceeded";
    case Outcome::ClassEmptied: return "classEmptied";
    case Outcome::IterationGuardExceeded: return "iterationGuardExceeded";
  }
  return "unknown";
}

RunContext::RunContext(const LayeredCdp& cdp, const Schedule& schedule, std::uint64_t seed,
                       std::optional<std::uint64_t> budget, std::optional<int> starId)
    : cdp_(&cdp), sched_(schedule), rng_(seed), starId_(starId) {
  meter_.budget = budget;
}

int RunContext::beginTree() {
  currentTree_ = nextTreeId_++;
  treeOpen_ = true;
  treeTdElimCalls_ = 0;
  treeStates_.clear();
  ++report_.dfsInvocations;
  return currentTree_;
}

void RunContext::endTree() {
  treeOpen_ = false;
  currentTree_ = -1;
}

void RunContext::noteTdElimAt(StateId s) {
  ++report_.tdElimCallCount;
  if (!treeOpen_) return;
  ++treeTdElimCalls_;
  report_.maxTdElimPerDfsTree = std::max(report_.maxTdElimPerDfsTree, treeTdElimCalls_);
  if (!treeStates_.insert(s).second) ++report_.duplicateTdElimInTree;
}

namespace {

// Attributes episodes consumed in a scope to one report bucket; exception safe
// so aborted batches still account for what they burned.
class EpisodeScope {
 public:
  EpisodeScope(RunContext& ctx, std::uint64_t RunReport::*bucket)
      : ctx_(ctx), bucket_(bucket), before_(ctx.meter().episodesUsed) {}
  ~EpisodeScope() {
    ctx_.report().*bucket_ += ctx_.meter().episodesUsed - before_;
    ctx_.report().episodesTotal = ctx_.meter().episodesUsed;
  }

 private:
  RunContext& ctx_;
  std::uint64_t RunReport::*bucket_;
  std::uint64_t before_;
};

std::vector<int> memberIds(const FunctionClass& F) {
  std::vector<int> ids;
  ids.reserve(F.members.size());
  for (const auto& f : F.members) ids.push_back(f->id());
  return ids;
}

int lowestIdIndex(const FunctionClass& F) {
  int best = 0;
  for (int i = 1; i < F.size(); ++i)
    if (F.members[static_cast<std::size_t>(i)]->id() < F.members[static_cast<std::size_t>(best)]->id()) best = i;
  return best;
}

}  // namespace

bool consensus(const Path& p, const FunctionClass& F, double epsTest, double phi, double deltaCall,
               RunContext& ctx) {
  (void)phi;  // phi fixes nTest through the schedule; kept for the published signature
  if (p.empty()) throw Error("consensus is only called on descendants (|p| >= 1)");
  if (F.members.empty()) throw ClassEmptied("consensus on an empty class");
  long n = ctx.schedule().nTest(deltaCall);

  std::map<int, double> est;
  {
    EpisodeScope scope(ctx, &RunReport::episodesConsensus);
    est = mcValuePrediction(ctx.cdp(), p, F, n, ctx.rng(), ctx.meter(), ctx.cache());
  }

  double lo = est.begin()->second, hi = est.begin()->second;
  for (const auto& [id, v] : est) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double spread = hi - lo;
  bool agreed = spread <= epsTest;

  ConsensusEvent ev;
  ev.seq = ctx.nextSeq();
  ev.treeId = ctx.currentTree();
  ev.path = p;
  ev.nTest = n;
  ev.epsTest = epsTest;
  ev.spread = spread;
  ev.agreed = agreed;
  ctx.report().consensusTrace.push_back(std::move(ev));
  return agreed;
}

FunctionClass tdElim(const Path& p, const FunctionClass& F, double phi, double deltaCall,
                     ValueCache& cache, RunContext& ctx) {
  (void)phi;  // fixes nTrain and the threshold through the schedule
  const LayeredCdp& cdp = ctx.cdp();
  int K = cdp.numActions();
  int H = cdp.horizon();
  if (static_cast<int>(p.size()) > H - 1) throw InvalidAction("tdElim needs a non-terminal state");
  if (F.members.empty()) throw ClassEmptied("tdElim on an empty class");

  StateId s = resolve(cdp, p);
  std::uint64_t pathCode = cdp.encodePath(p);
  long nTrain = ctx.schedule().nTrain(deltaCall);
  double threshold = ctx.schedule().elimThreshold(deltaCall, nTrain);
  int numF = F.size();
  bool terminalChildren = static_cast<int>(p.size()) == H - 1;

  // Estimation precondition: V^f(p.a, pi_f) for every member and action must
  // be cached (terminal children use the V=0 convention instead).
  std::vector<std::vector<double>> childV(static_cast<std::size_t>(numF),
                                          std::vector<double>(static_cast<std::size_t>(K), 0.0));
  if (!terminalChildren) {
    Path child = p;
    child.push_back(0);
    for (int a = 0; a < K; ++a) {
      child.back() = a;
      std::uint64_t code = cdp.encodePath(child);
      for (int fi = 0; fi < numF; ++fi) {
        const CacheEntry* e = cache.find(code, F.members[static_cast<std::size_t>(fi)]->id());
        if (e == nullptr)
          throw Error("estimation precondition violated: no cached estimate for function " +
                      std::to_string(F.members[static_cast<std::size_t>(fi)]->id()) + " at path " +
                      pathToString(child));
        childV[static_cast<std::size_t>(fi)][static_cast<std::size_t>(a)] = e->estimate;
      }
    }
  }

  const auto& dist = cdp.obsDist(s);
  int S = static_cast<int>(dist.support.size());

  std::vector<Observation> obs(static_cast<std::size_t>(S));
  std::vector<double> cum(static_cast<std::size_t>(S));
  double acc = 0.0;
  for (int j = 0; j < S; ++j) {
    obs[static_cast<std::size_t>(j)] = observationAt(cdp, p, j);
    acc += dist.support[static_cast<std::size_t>(j)].prob;
    cum[static_cast<std::size_t>(j)] = acc;
  }

  // f(x_j, a) and f(x_j, pi_f(x_j)) depend only on the support point, so the
  // sample loop reduces to counting (observation, action, realized-reward)
  // cells.
  std::vector<std::vector<double>> fval(static_cast<std::size_t>(numF),
                                        std::vector<double>(static_cast<std::size_t>(S * K)));
  std::vector<std::vector<double>> greedyVal(static_cast<std::size_t>(numF),
                                             std::vector<double>(static_cast<std::size_t>(S)));
  for (int fi = 0; fi < numF; ++fi) {
    const QFunction& f = *F.members[static_cast<std::size_t>(fi)];
    for (int j = 0; j < S; ++j) {
      int ga = greedyAction(f, obs[static_cast<std::size_t>(j)]);
      greedyVal[static_cast<std::size_t>(fi)][static_cast<std::size_t>(j)] =
          f.eval(obs[static_cast<std::size_t>(j)], ga);
      for (int a = 0; a < K; ++a)
        fval[static_cast<std::size_t>(fi)][static_cast<std::size_t>(j * K + a)] =
            f.eval(obs[static_cast<std::size_t>(j)], a);
    }
  }

  std::vector<long> cnt0(static_cast<std::size_t>(S * K), 0);  // reward 0 (or the deterministic cell)
  std::vector<long> cnt1(static_cast<std::size_t>(S * K), 0);  // reward 1
  std::vector<long> marginal(static_cast<std::size_t>(S), 0);
  {
    EpisodeScope scope(ctx, &RunReport::episodesTdElim);
    ctx.meter().charge(static_cast<std::uint64_t>(nTrain));  // one root traversal per tuple
    RngStream stream = ctx.rng().stream(StreamOp::TdElimDraws, pathCode);
    for (long i = 0; i < nTrain; ++i) {
      double u = u01(stream);
      int j = 0;
      while (j + 1 < S && u >= cum[static_cast<std::size_t>(j)]) ++j;
      int a = uniformInt(stream, K);
      ++marginal[static_cast<std::size_t>(j)];
      const auto& e = dist.support[static_cast<std::size_t>(j)];
      if (e.rewardNoise[static_cast<std::size_t>(a)] == RewardNoise::Bernoulli) {
        if (bernoulliDraw(stream, e.rewardMean[static_cast<std::size_t>(a)]))
          ++cnt1[static_cast<std::size_t>(j * K + a)];
        else
          ++cnt0[static_cast<std::size_t>(j * K + a)];
      } else {
        ++cnt0[static_cast<std::size_t>(j * K + a)];
      }
    }
  }

  std::vector<double> risks(static_cast<std::size_t>(numF), 0.0);
  for (int fi = 0; fi < numF; ++fi) {
    double sum = 0.0;
    for (int j = 0; j < S; ++j) {
      const auto& e = dist.support[static_cast<std::size_t>(j)];
      for (int a = 0; a < K; ++a) {
        std::size_t cell = static_cast<std::size_t>(j * K + a);
        long c0 = cnt0[cell], c1 = cnt1[cell];
        if (c0 == 0 && c1 == 0) continue;
        double base = fval[static_cast<std::size_t>(fi)][cell] -
                      childV[static_cast<std::size_t>(fi)][static_cast<std::size_t>(a)];
        if (e.rewardNoise[static_cast<std::size_t>(a)] == RewardNoise::Bernoulli) {
          double r0 = base, r1 = base - 1.0;
          sum += static_cast<double>(c0) * r0 * r0 + static_cast<double>(c1) * r1 * r1;
        } else {
          double r = base - e.rewardMean[static_cast<std::size_t>(a)];
          sum += static_cast<double>(c0) * r * r;
        }
      }
    }
    risks[static_cast<std::size_t>(fi)] = sum / static_cast<double>(nTrain);
  }

  double minRisk = *std::min_element(risks.begin(), risks.end());
  FunctionClass survivors;
  for (int fi = 0; fi < numF; ++fi)
    if (risks[static_cast<std::size_t>(fi)] <= minRisk + threshold)
      survivors.members.push_back(F.members[static_cast<std::size_t>(fi)]);
  if (survivors.members.empty()) throw ClassEmptied("tdElim eliminated every regressor at " + pathToString(p));

  // Estimation bound: V^f(p, pi_f) for survivors from the same observations.
  for (const auto& f : survivors.members) {
    int fi = 0;
    while (F.members[static_cast<std::size_t>(fi)]->id() != f->id()) ++fi;
    double sum = 0.0;
    for (int j = 0; j < S; ++j)
      sum += static_cast<double>(marginal[static_cast<std::size_t>(j)]) *
             greedyVal[static_cast<std::size_t>(fi)][static_cast<std::size_t>(j)];
    cache.put(pathCode, f->id(), sum / static_cast<double>(nTrain), nTrain);
  }

  ctx.noteTdElimAt(s);
  EliminationEvent ev;
  ev.seq = ctx.nextSeq();
  ev.treeId = ctx.currentTree();
  ev.path = p;
  ev.state = s;
  ev.nTrain = nTrain;
  ev.threshold = threshold;
  ev.survivorsBefore = memberIds(F);
  ev.survivorsAfter = memberIds(survivors);
  ev.risks = risks;
  // Reaching this point means the precondition held (the lookup above throws
  // otherwise); terminal children use the V=0 convention.
  ev.childEstimatesCached = true;
  if (ctx.starId()) {
    bool inBefore = std::find(ev.survivorsBefore.begin(), ev.survivorsBefore.end(), *ctx.starId()) !=
                    ev.survivorsBefore.end();
    if (inBefore)
      ev.fStarSurvived = std::find(ev.survivorsAfter.begin(), ev.survivorsAfter.end(), *ctx.starId()) !=
                         ev.survivorsAfter.end();
  }
  ctx.report().eliminationTrace.push_back(std::move(ev));
  ctx.report().finalSurvivorIds = memberIds(survivors);
  return survivors;
}

namespace {

FunctionClass dfsLearnImpl(const Path& p, FunctionClass F, double epsilon, double deltaCall, RunContext& ctx) {
  const LayeredCdp& cdp = ctx.cdp();
  int H = cdp.horizon();
  int K = cdp.numActions();
  if (static_cast<int>(p.size()) > H - 1) throw InvalidAction("dfsLearn needs |p| <= H-1");
  const Schedule& sch = ctx.schedule();

  Path child = p;
  child.push_back(0);
  for (int a = 0; a < K; ++a) {
    child.back() = a;
    if (static_cast<int>(child.size()) == H) continue;  // terminal children: skip, V=0 convention
    if (!consensus(child, F, sch.epsTest(static_cast<int>(p.size())), sch.phi(),
                   sch.consensusDelta(deltaCall), ctx))
      F = dfsLearnImpl(child, std::move(F), epsilon, deltaCall, ctx);
  }
  return tdElim(p, F, sch.phi(), sch.tdElimDelta(deltaCall), ctx.cache(), ctx);
}

}  // namespace

FunctionClass dfsLearn(const Path& p, FunctionClass F, double epsilon, double deltaCall, RunContext& ctx) {
  if (ctx.treeOpen()) return dfsLearnImpl(p, std::move(F), epsilon, deltaCall, ctx);
  struct TreeGuard {
    RunContext& ctx;
    ~TreeGuard() { ctx.endTree(); }
  };
  ctx.beginTree();
  TreeGuard guard{ctx};
  return dfsLearnImpl(p, std::move(F), epsilon, deltaCall, ctx);
}

int exploreOnDemand(FunctionClass& F, double vHatStar, double epsilon, double delta, RunContext& ctx) {
  const LayeredCdp& cdp = ctx.cdp();
  const Schedule& sch = ctx.schedule();
  int H = cdp.horizon();
  long n1 = sch.n1(delta);
  long n2 = sch.n2(delta);
  int guard = 2 * sch.statesPerLevelBound() * H;
  double dfsDelta = sch.onDemandDfsDelta(delta, n2);
  std::uint64_t rootCode = cdp.encodePath({});

  for (int iter = 1;; ++iter) {
    if (iter > guard)
      throw IterationGuardExceeded("explore-on-demand exceeded " + std::to_string(guard) + " iterations");
    ctx.report().onDemandIterations = iter;
    if (F.members.empty()) throw ClassEmptied("explore-on-demand with an empty class");

    int idx = lowestIdIndex(F);
    Policy pi = F.policyOf(idx);
    int fid = F.members[static_cast<std::size_t>(idx)]->id();

    double sum = 0.0;
    std::vector<Path> collected;
    collected.reserve(static_cast<std::size_t>(std::min(n1, n2)));
    {
      EpisodeScope scope(ctx, &RunReport::episodesMcPolicyEval);
      RngStream stream = ctx.rng().stream(StreamOp::OnDemandRollout, rootCode);
      for (long i = 0; i < n1; ++i) {
        Trajectory traj = runEpisode(cdp, [&pi](const Observation& x) { return pi(x); }, stream, ctx.meter());
        sum += traj.totalReward;
        if (static_cast<long>(collected.size()) < n2) collected.push_back(traj.actions());
      }
    }
    double vHat = sum / static_cast<double>(n1);
    bool accepted = std::abs(vHat - vHatStar) <= sch.epsDemand();

    OnDemandEvent ev;
    ev.seq = ctx.nextSeq();
    ev.iteration = iter;
    ev.functionId = fid;
    ev.n1 = n1;
    ev.vHatPolicy = vHat;
    ev.vHatStar = vHatStar;
    ev.accepted = accepted;
    ctx.report().onDemandTrace.push_back(std::move(ev));

    if (accepted) return fid;

    // Train on every nonempty proper prefix of the first n2 collected paths.
    for (const Path& traj : collected)
      for (int len = 1; len <= H - 1; ++len) {
        Path prefix(traj.begin(), traj.begin() + len);
        F = dfsLearn(prefix, std::move(F), epsilon, dfsDelta, ctx);
      }
  }
}

RunReport lsvee(const LayeredCdp& cdp, const FunctionClass& F, double epsilon, double delta,
                const AlgoParams& params, std::uint64_t seed, std::optional<int> starId) {
  AlgoParams p = params;
  p.epsilon = epsilon;
  p.delta = delta;
  Schedule sched(p, cdp.horizon(), cdp.numActions(), cdp.maxStatesPerLevel(), F.size());
  RunContext ctx(cdp, sched, seed, p.budget, starId);
  ctx.report().finalSurvivorIds = memberIds(F);

  FunctionClass cur;
  cur.members = F.members;
  try {
    cur = dfsLearn({}, std::move(cur), epsilon, delta / 2.0, ctx);
    int idx = lowestIdIndex(cur);
    const CacheEntry* root = ctx.cache().find(cdp.encodePath({}), cur.members[static_cast<std::size_t>(idx)]->id());
    if (root == nullptr) throw Error("tdElim at the root did not record a value estimate");
    ctx.report().vHatStar = root->estimate;
    int chosen = exploreOnDemand(cur, root->estimate, epsilon, delta / 2.0, ctx);
    ctx.report().returnedFunctionId = chosen;
    ctx.report().outcome = Outcome::Success;
  } catch (const BudgetExceeded& ex) {
    ctx.report().outcome = Outcome::BudgetExceeded;
    ctx.report().abortReason = ex.what();
  } catch (const ClassEmptied& ex) {
    ctx.report().outcome = Outcome::ClassEmptied;
    ctx.report().abortReason = ex.what();
  } catch (const IterationGuardExceeded& ex) {
    ctx.report().outcome = Outcome::IterationGuardExceeded;
    ctx.report().abortReason = ex.what();
  }
  ctx.report().episodesTotal = ctx.meter().episodesUsed;
  return std::move(ctx.report());
}

// --- report serialization ---

namespace {

nlohmann::json toJson(const StateId& s) { return {{"level", s.level}, {"index", s.index}}; }

nlohmann::json toJson(const EliminationEvent& e) {
  nlohmann::json j{{"type", "tdElim"},     {"seq", e.seq},
                   {"tree", e.treeId},     {"path", e.path},
                   {"state", toJson(e.state)}, {"nTrain", e.nTrain},
                   {"threshold", e.threshold}, {"survivorsBefore", e.survivorsBefore},
                   {"survivorsAfter", e.survivorsAfter}, {"risks", e.risks},
                   {"childEstimatesCached", e.childEstimatesCached}};
  if (e.fStarSurvived) j["fStarSurvived"] = *e.fStarSurvived;
  return j;
}

nlohmann::json toJson(const ConsensusEvent& e) {
  return {{"type", "consensus"}, {"seq", e.seq},       {"tree", e.treeId},  {"path", e.path},
          {"nTest", e.nTest},    {"epsTest", e.epsTest}, {"spread", e.spread}, {"agreed", e.agreed}};
}

nlohmann::json toJson(const OnDemandEvent& e) {
  return {{"type", "onDemand"},      {"seq", e.seq},           {"iteration", e.iteration},
          {"functionId", e.functionId}, {"n1", e.n1},          {"vHatPolicy", e.vHatPolicy},
          {"vHatStar", e.vHatStar},  {"accepted", e.accepted}};
}

}  // namespace

nlohmann::json RunReport::toJson() const {
  nlohmann::json j;
  j["outcome"] = lsvee::toString(outcome);
  if (!abortReason.empty()) j["abortReason"] = abortReason;
  if (returnedFunctionId) j["returnedFunctionId"] = *returnedFunctionId;
  if (!std::isnan(vHatStar)) j["vHatStar"] = vHatStar;
  j["episodes"] = {{"total", episodesTotal},
                   {"consensus", episodesConsensus},
                   {"tdElim", episodesTdElim},
                   {"mcPolicyEval", episodesMcPolicyEval}};
  j["tdElimCallCount"] = tdElimCallCount;
  j["dfsInvocations"] = dfsInvocations;
  j["onDemandIterations"] = onDemandIterations;
  j["maxTdElimPerDfsTree"] = maxTdElimPerDfsTree;
  j["duplicateTdElimInTree"] = duplicateTdElimInTree;
  j["finalSurvivorIds"] = finalSurvivorIds;
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : eliminationTrace) events.push_back(lsvee::toJson(e));
  for (const auto& e : consensusTrace) events.push_back(lsvee::toJson(e));
  for (const auto& e : onDemandTrace) events.push_back(lsvee::toJson(e));
  std::sort(events.begin(), events.end(),
            [](const nlohmann::json& a, const nlohmann::json& b) { return a["seq"] < b["seq"]; });
  j["events"] = std::move(events);
  return j;
}

std::string RunReport::eventsJsonl() const {
  nlohmann::json j = toJson();
  std::ostringstream out;
  for (const auto& e : j["events"]) out << e.dump() << '\n';
  return out.str();
}

}  // namespace lsvee
