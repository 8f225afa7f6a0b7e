#include "lsvee/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "lsvee/oracle.hpp"

namespace lsvee {

namespace {

std::string formatDouble(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

double parseDouble(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

std::string sanitizeCell(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::fromJson(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    if (j.contains("environment")) {
      const auto& env = j.at("environment");
      if (env.contains("file")) {
        cfg.envFile = env.at("file").get<std::string>();
        cfg.funcsFile = env.at("functions").get<std::string>();
      } else {
        GeneratorSpec g;
        g.family = env.at("generator").get<std::string>();
        g.M = env.value("M", g.M);
        g.K = env.value("K", g.K);
        g.H = env.value("H", g.H);
        g.N = env.value("N", g.N);
        g.obsPerState = env.value("obsPerState", g.obsPerState);
        g.lockEpsilon = env.value("lockEpsilon", g.lockEpsilon);
        if (env.contains("pStar")) g.lockPStar = env.at("pStar").get<Path>();
        g.perSeedEnv = env.value("perSeedEnv", true);
        g.envSeed = env.value("envSeed", 0);
        cfg.generator = std::move(g);
      }
    }
    if (j.contains("algorithm")) {
      const auto& a = j.at("algorithm");
      cfg.algo.epsilon = a.value("epsilon", cfg.algo.epsilon);
      cfg.algo.delta = a.value("delta", cfg.algo.delta);
      if (a.contains("constantsMode")) cfg.algo.mode = constantsModeFromString(a.at("constantsMode").get<std::string>());
      cfg.algo.cPhi = a.value("cPhi", cfg.algo.cPhi);
      cfg.algo.cNtrain = a.value("cNtrain", cfg.algo.cNtrain);
      cfg.algo.cNtest = a.value("cNtest", cfg.algo.cNtest);
      cfg.algo.cN1 = a.value("cN1", cfg.algo.cN1);
      cfg.algo.cN2 = a.value("cN2", cfg.algo.cN2);
      if (a.contains("budget")) cfg.algo.budget = a.at("budget").get<std::uint64_t>();
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.outputDir = j.value("outputDir", std::string());
    cfg.workers = j.value("workers", 1);
    if (cfg.seeds.empty()) throw ConfigError("config needs at least one seed");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
}

nlohmann::json ExperimentConfig::toJson() const {
  nlohmann::json j;
  if (generator) {
    j["environment"] = {{"generator", generator->family}, {"M", generator->M},
                        {"K", generator->K},              {"H", generator->H},
                        {"N", generator->N},              {"obsPerState", generator->obsPerState},
                        {"lockEpsilon", generator->lockEpsilon}, {"pStar", generator->lockPStar},
                        {"perSeedEnv", generator->perSeedEnv},   {"envSeed", generator->envSeed}};
  } else {
    j["environment"] = {{"file", envFile}, {"functions", funcsFile}};
  }
  j["algorithm"] = {{"epsilon", algo.epsilon}, {"delta", algo.delta},
                    {"constantsMode", toString(algo.mode)}, {"cPhi", algo.cPhi},
                    {"cNtrain", algo.cNtrain}, {"cNtest", algo.cNtest},
                    {"cN1", algo.cN1},         {"cN2", algo.cN2}};
  if (algo.budget) j["algorithm"]["budget"] = *algo.budget;
  j["seeds"] = seeds;
  j["outputDir"] = outputDir;
  j["workers"] = workers;
  return j;
}

namespace {

constexpr std::uint64_t kDefaultBudget = 100000000ULL;  // 1e8 episodes per run, hard abort

GeneratedInstance instantiate(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.generator) {
    const GeneratorSpec& g = *cfg.generator;
    std::uint64_t envSeed = g.perSeedEnv ? mixSeed(seed, 0x656e76ULL) : g.envSeed;
    if (g.family == "randomRealizable") return makeRandomRealizable(g.M, g.K, g.H, g.N, g.obsPerState, envSeed);
    if (g.family == "disjointObs") return makeDisjointObs(g.M, g.K, g.H, g.obsPerState, g.N, envSeed);
    if (g.family == "lock") {
      Path p = g.lockPStar;
      if (p.empty()) p.assign(static_cast<std::size_t>(g.H), 0);
      LockInstance lock = makeLock(g.H, g.K, g.lockEpsilon, p, envSeed);
      return {std::move(lock.cdp), std::move(lock.funcs)};
    }
    throw ConfigError("unknown generator family: " + g.family);
  }
  if (cfg.envFile.empty() || cfg.funcsFile.empty())
    throw ConfigError("config needs either a generator or environment/function files");
  return {loadCdp(cfg.envFile), loadFunctionClass(cfg.funcsFile)};
}

double oracleSuboptimality(const LayeredCdp& cdp, const FunctionClass& F, const RunReport& report) {
  if (!report.returnedFunctionId) return std::numeric_limits<double>::quiet_NaN();
  for (const auto& f : F.members) {
    if (f->id() != *report.returnedFunctionId) continue;
    try {
      ExactValues exact = computeExactValues(cdp);
      double v = policyValueExact(cdp, [&f](const Observation& x) { return greedyAction(*f, x); });
      return exact.vStarRoot - v;
    } catch (const SizeGuardExceeded&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::optional<bool> starSurvivedAll(const RunReport& report, std::optional<int> starId) {
  if (!starId) return std::nullopt;
  for (const auto& ev : report.eliminationTrace)
    if (ev.fStarSurvived && !*ev.fStarSurvived) return false;
  // Star absent from every event's before-set means it was never at risk
  // after being eliminated; distinguish by scanning for presence.
  bool seen = false;
  for (const auto& ev : report.eliminationTrace)
    if (std::find(ev.survivorsBefore.begin(), ev.survivorsBefore.end(), *starId) != ev.survivorsBefore.end())
      seen = true;
  if (!seen && !report.eliminationTrace.empty()) return false;
  return true;
}

ResultRow rowFromReport(std::uint64_t seed, const RunReport& rep, double subopt, std::optional<bool> star,
                        std::int64_t wallMs) {
  ResultRow row;
  row.seed = seed;
  row.episodesTotal = rep.episodesTotal;
  row.episodesConsensus = rep.episodesConsensus;
  row.episodesTdElim = rep.episodesTdElim;
  row.episodesMcPolicyEval = rep.episodesMcPolicyEval;
  row.tdElimCalls = rep.tdElimCallCount;
  row.onDemandIterations = rep.onDemandIterations;
  row.suboptimality = subopt;
  row.fStarSurvived = star;
  row.outcome = toString(rep.outcome);
  row.wallClockMs = wallMs;
  if (!std::isnan(subopt) && subopt < -1e-9)
    throw Error("oracle suboptimality fell below -1e-9; value table inconsistency");
  return row;
}

void writeOutputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  if (cfg.outputDir.empty()) return;
  std::filesystem::create_directories(cfg.outputDir);
  std::ofstream csv(cfg.outputDir + "/results.csv");
  csv << resultCsvHeader() << toCsv(result.rows);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    std::string stem = cfg.outputDir + "/run_" + std::to_string(result.rows[i].seed);
    std::ofstream rj(stem + ".report.json");
    rj << result.reports[i].toJson().dump(2) << '\n';
    std::ofstream ev(stem + ".events.jsonl");
    ev << result.reports[i].eventsJsonl();
  }
}

// Runs one job per seed on a small worker pool; rows land at their seed's
// index so merged output is deterministic.
template <typename Job>
void forEachSeed(const ExperimentConfig& cfg, Job job) {
  int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < cfg.seeds.size(); i = next.fetch_add(1)) job(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

ExperimentResult runExperiment(const ExperimentConfig& config) {
  ExperimentResult result;
  result.rows.resize(config.seeds.size());
  result.reports.resize(config.seeds.size());

  forEachSeed(config, [&](std::size_t i) {
    std::uint64_t seed = config.seeds[i];
    auto t0 = std::chrono::steady_clock::now();
    try {
      GeneratedInstance inst = instantiate(config, seed);
      AlgoParams algo = config.algo;
      if (!algo.budget) algo.budget = kDefaultBudget;
      RunReport rep = lsvee(inst.cdp, inst.funcs, algo.epsilon, algo.delta, algo, seed, inst.funcs.starId());
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
      double subopt = oracleSuboptimality(inst.cdp, inst.funcs, rep);
      result.rows[i] = rowFromReport(seed, rep, subopt, starSurvivedAll(rep, inst.funcs.starId()), ms);
      result.reports[i] = std::move(rep);
    } catch (const std::exception& e) {
      // Per-seed failures never abort the sweep.
      result.rows[i].seed = seed;
      result.rows[i].outcome = sanitizeCell(std::string("error: ") + e.what());
    }
  });

  writeOutputs(config, result);
  return result;
}

BaselineKind baselineFromString(const std::string& s) {
  if (s == "enumerateAll") return BaselineKind::EnumerateAll;
  if (s == "epsilonGreedy") return BaselineKind::EpsilonGreedy;
  throw ConfigError("unknown baseline: " + s);
}

namespace {

RunReport enumerateAllBaseline(const LayeredCdp& cdp, const FunctionClass& F, const AlgoParams& algo,
                               std::uint64_t seed) {
  Schedule sched(algo, cdp.horizon(), cdp.numActions(), cdp.maxStatesPerLevel(), F.size());
  RunContext ctx(cdp, sched, seed, algo.budget);
  long n1 = sched.n1(algo.delta);
  RunReport& rep = ctx.report();
  try {
    double bestVal = -1.0;
    int bestId = -1;
    for (const auto& f : F.members) {
      RngStream stream = ctx.rng().stream(StreamOp::Baseline, static_cast<std::uint64_t>(f->id()));
      double sum = 0.0;
      for (long i = 0; i < n1; ++i) {
        Trajectory traj =
            runEpisode(cdp, [&f](const Observation& x) { return greedyAction(*f, x); }, stream, ctx.meter());
        sum += traj.totalReward;
      }
      rep.episodesMcPolicyEval = ctx.meter().episodesUsed;
      double v = sum / static_cast<double>(n1);
      if (v > bestVal || (v == bestVal && f->id() < bestId)) {
        bestVal = v;
        bestId = f->id();
      }
    }
    rep.returnedFunctionId = bestId;
    rep.vHatStar = bestVal;
    rep.outcome = Outcome::Success;
  } catch (const BudgetExceeded& ex) {
    rep.outcome = Outcome::BudgetExceeded;
    rep.abortReason = ex.what();
  }
  rep.episodesTotal = ctx.meter().episodesUsed;
  return std::move(rep);
}

// Tabular Q-learning on observation tokens with epsilon-greedy exploration.
// Deliberately simple; it contextualizes episode counts.
RunReport epsilonGreedyBaseline(const LayeredCdp& cdp, FunctionClass& F, std::uint64_t seed,
                                std::uint64_t episodes) {
  RunReport rep;
  RngFactory rng(seed);
  EpisodeMeter meter;
  meter.budget = episodes;
  RngStream stream = rng.stream(StreamOp::Baseline, 0);
  int K = cdp.numActions();

  std::unordered_map<std::int64_t, std::vector<double>> q;
  std::unordered_map<std::int64_t, std::vector<long>> visits;
  const double explore = 0.1;
  auto greedyOf = [&](std::int64_t token) {
    auto it = q.find(token);
    if (it == q.end()) return 0;
    int best = 0;
    for (int a = 1; a < K; ++a)
      if (it->second[static_cast<std::size_t>(a)] > it->second[static_cast<std::size_t>(best)]) best = a;
    return best;
  };

  try {
    while (true) {
      meter.charge();
      StateId s = cdp.start();
      std::vector<std::tuple<std::int64_t, int, double, std::int64_t>> steps;  // token, action, reward, next token
      for (int h = 1; h <= cdp.horizon(); ++h) {
        const auto& d = cdp.obsDist(s);
        double u = u01(stream);
        double acc = 0.0;
        int j = 0;
        for (; j + 1 < static_cast<int>(d.support.size()); ++j) {
          acc += d.support[static_cast<std::size_t>(j)].prob;
          if (u < acc) break;
        }
        const auto& e = d.support[static_cast<std::size_t>(j)];
        q.try_emplace(e.token, std::vector<double>(static_cast<std::size_t>(K), 0.0));
        visits.try_emplace(e.token, std::vector<long>(static_cast<std::size_t>(K), 0));
        int a = bernoulliDraw(stream, explore) ? uniformInt(stream, K) : greedyOf(e.token);
        double m = e.rewardMean[static_cast<std::size_t>(a)];
        double r = e.rewardNoise[static_cast<std::size_t>(a)] == RewardNoise::Bernoulli
                       ? (bernoulliDraw(stream, m) ? 1.0 : 0.0)
                       : m;
        if (!steps.empty()) std::get<3>(steps.back()) = e.token;
        steps.emplace_back(e.token, a, r, -1);
        s = cdp.transition(s, a);
      }
      for (auto& [token, a, r, nextToken] : steps) {
        long n = ++visits[token][static_cast<std::size_t>(a)];
        double alpha = 1.0 / (1.0 + 0.1 * static_cast<double>(n));
        double bootstrap = 0.0;
        if (nextToken >= 0) {
          const auto& row = q[nextToken];
          bootstrap = *std::max_element(row.begin(), row.end());
        }
        double& cell = q[token][static_cast<std::size_t>(a)];
        cell += alpha * (r + bootstrap - cell);
      }
    }
  } catch (const BudgetExceeded&) {
    // budget spent = training finished
  }

  std::unordered_map<std::int64_t, std::vector<double>> clipped;
  for (auto& [token, row] : q) {
    std::vector<double> c = row;
    for (auto& v : c) v = std::clamp(v, 0.0, 1.0);
    clipped.emplace(token, std::move(c));
  }
  int learnedId = F.members.empty() ? 0 : F.members.back()->id() + 1;
  F.members.push_back(std::make_shared<TableQ>(learnedId, K, std::move(clipped)));
  rep.returnedFunctionId = learnedId;
  rep.outcome = Outcome::Success;
  rep.episodesTotal = meter.episodesUsed;
  rep.episodesMcPolicyEval = meter.episodesUsed;
  return rep;
}

}  // namespace

ExperimentResult runBaseline(const ExperimentConfig& config, BaselineKind kind,
                             std::optional<std::uint64_t> episodeBudget) {
  ExperimentResult result;
  result.rows.resize(config.seeds.size());
  result.reports.resize(config.seeds.size());

  forEachSeed(config, [&](std::size_t i) {
    std::uint64_t seed = config.seeds[i];
    auto t0 = std::chrono::steady_clock::now();
    try {
      GeneratedInstance inst = instantiate(config, seed);
      AlgoParams algo = config.algo;
      if (!algo.budget) algo.budget = kDefaultBudget;
      RunReport rep;
      if (kind == BaselineKind::EnumerateAll) {
        rep = enumerateAllBaseline(inst.cdp, inst.funcs, algo, seed);
      } else {
        std::uint64_t budget = episodeBudget.value_or(*algo.budget);
        rep = epsilonGreedyBaseline(inst.cdp, inst.funcs, seed, budget);
      }
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
      double subopt = oracleSuboptimality(inst.cdp, inst.funcs, rep);
      result.rows[i] = rowFromReport(seed, rep, subopt, std::nullopt, ms);
      result.reports[i] = std::move(rep);
    } catch (const std::exception& e) {
      result.rows[i].seed = seed;
      result.rows[i].outcome = sanitizeCell(std::string("error: ") + e.what());
    }
  });

  writeOutputs(config, result);
  return result;
}

// --- CSV ---

std::string resultCsvHeader() {
  return "seed,episodesTotal,episodesConsensus,episodesTdElim,episodesMcPolicyEval,"
         "tdElimCalls,onDemandIterations,suboptimality,fStarSurvived,outcome,wallClockMs\n";
}

std::string toCsv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) {
    out << r.seed << ',' << r.episodesTotal << ',' << r.episodesConsensus << ',' << r.episodesTdElim << ','
        << r.episodesMcPolicyEval << ',' << r.tdElimCalls << ',' << r.onDemandIterations << ','
        << formatDouble(r.suboptimality) << ',' << (r.fStarSurvived ? (*r.fStarSurvived ? "true" : "false") : "na")
        << ',' << r.outcome << ',' << r.wallClockMs << '\n';
  }
  return out.str();
}

std::vector<ResultRow> parseResultCsv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.find("seed,") == 0) continue;  // header
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw ConfigError("malformed results CSV row: " + line);
    ResultRow r;
    r.seed = std::stoull(cells[0]);
    r.episodesTotal = std::stoull(cells[1]);
    r.episodesConsensus = std::stoull(cells[2]);
    r.episodesTdElim = std::stoull(cells[3]);
    r.episodesMcPolicyEval = std::stoull(cells[4]);
    r.tdElimCalls = std::stoi(cells[5]);
    r.onDemandIterations = std::stoi(cells[6]);
    r.suboptimality = parseDouble(cells[7]);
    if (cells[8] == "true")
      r.fStarSurvived = true;
    else if (cells[8] == "false")
      r.fStarSurvived = false;
    r.outcome = cells[9];
    r.wallClockMs = std::stoll(cells[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace lsvee
