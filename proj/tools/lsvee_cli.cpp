#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsvee/envgen.hpp"
#include "lsvee/harness.hpp"
#include "lsvee/oracle.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBudget = 3;
constexpr int kExitValidation = 4;

struct EnvFlags {
  std::string family;
  int M = 2, K = 2, H = 2, N = 4, obsPerState = 1;
  double lockEpsilon = 0.1;
  std::vector<int> pStar;
  std::uint64_t seed = 1;
};

void addEnvFlags(CLI::App* cmd, EnvFlags& f, bool requireFamily) {
  auto* fam = cmd->add_option("--family", f.family, "generator family: randomRealizable | disjointObs | lock");
  if (requireFamily) fam->required();
  cmd->add_option("--M", f.M, "max states per level");
  cmd->add_option("--K", f.K, "number of actions");
  cmd->add_option("--H", f.H, "horizon");
  cmd->add_option("--N", f.N, "function class size");
  cmd->add_option("--obs-per-state", f.obsPerState, "observations per state");
  cmd->add_option("--epsilon-gap", f.lockEpsilon, "lock reward gap");
  cmd->add_option("--pstar", f.pStar, "lock secret path (space separated)");
  cmd->add_option("--seed", f.seed, "generator seed");
}

lsvee::GeneratedInstance generateFromFlags(const EnvFlags& f) {
  if (f.family == "randomRealizable") return lsvee::makeRandomRealizable(f.M, f.K, f.H, f.N, f.obsPerState, f.seed);
  if (f.family == "disjointObs") return lsvee::makeDisjointObs(f.M, f.K, f.H, f.obsPerState, f.N, f.seed);
  if (f.family == "lock") {
    lsvee::Path p(f.pStar.begin(), f.pStar.end());
    if (p.empty()) p.assign(static_cast<std::size_t>(f.H), 0);
    auto lock = lsvee::makeLock(f.H, f.K, f.lockEpsilon, p, f.seed);
    return {std::move(lock.cdp), std::move(lock.funcs)};
  }
  throw lsvee::ConfigError("unknown generator family: " + f.family);
}

// Defaults < config file < flags.
lsvee::ExperimentConfig assembleConfig(const std::string& configPath, const std::string& envFile,
                                       const std::string& funcsFile, const EnvFlags& env, bool envFlagsUsed,
                                       const std::vector<std::uint64_t>& seeds, double epsilon, double delta,
                                       const std::string& mode, std::uint64_t budget, const std::string& outDir,
                                       int workers, const CLI::App* cmd) {
  lsvee::ExperimentConfig cfg;
  if (!configPath.empty()) {
    std::ifstream in(configPath);
    if (!in) throw lsvee::ConfigError("cannot open config: " + configPath);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw lsvee::ConfigError(std::string("cannot parse config: ") + e.what());
    }
    cfg = lsvee::ExperimentConfig::fromJson(j);
  }
  if (!envFile.empty()) {
    cfg.envFile = envFile;
    cfg.funcsFile = funcsFile;
    cfg.generator.reset();
  } else if (envFlagsUsed) {
    lsvee::GeneratorSpec g;
    g.family = env.family;
    g.M = env.M;
    g.K = env.K;
    g.H = env.H;
    g.N = env.N;
    g.obsPerState = env.obsPerState;
    g.lockEpsilon = env.lockEpsilon;
    g.lockPStar.assign(env.pStar.begin(), env.pStar.end());
    cfg.generator = std::move(g);
  }
  if (cmd->count("--seeds")) cfg.seeds = seeds;
  if (cmd->count("--epsilon")) cfg.algo.epsilon = epsilon;
  if (cmd->count("--delta")) cfg.algo.delta = delta;
  if (cmd->count("--mode")) cfg.algo.mode = lsvee::constantsModeFromString(mode);
  if (cmd->count("--budget")) cfg.algo.budget = budget;
  if (cmd->count("--out-dir")) cfg.outputDir = outDir;
  if (cmd->count("--workers")) cfg.workers = workers;
  if (!cfg.generator && cfg.envFile.empty())
    throw lsvee::ConfigError("specify an environment: --env/--funcs, --family, or a config file");
  return cfg;
}

int summarize(const lsvee::ExperimentResult& result) {
  std::size_t budgetFailures = 0;
  for (const auto& row : result.rows) {
    std::cout << "seed " << row.seed << ": outcome=" << row.outcome << " episodes=" << row.episodesTotal
              << " suboptimality=" << row.suboptimality << '\n';
    if (row.outcome == "budgetExceeded") ++budgetFailures;
  }
  if (!result.rows.empty() && budgetFailures == result.rows.size()) return kExitBudget;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSVEE: PAC reinforcement learning over layered deterministic decision processes"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "generate an environment and function class");
  EnvFlags genFlags;
  addEnvFlags(gen, genFlags, true);
  std::string genOut = "env.json", genFuncs = "funcs.json";
  gen->add_option("--out", genOut, "environment output file");
  gen->add_option("--funcs-out", genFuncs, "function-class output file");

  // run
  auto* run = app.add_subcommand("run", "run the learning algorithm");
  EnvFlags runFlags;
  addEnvFlags(run, runFlags, false);
  std::string runConfig, runEnv, runFuncs, runMode = "practical", runOut;
  std::vector<std::uint64_t> runSeeds{1};
  double runEps = 0.4, runDelta = 0.1;
  std::uint64_t runBudget = 100000000ULL;
  int runWorkers = 1;
  run->add_option("--config", runConfig, "experiment config JSON (flags override it)");
  run->add_option("--env", runEnv, "environment file");
  run->add_option("--funcs", runFuncs, "function-class file");
  run->add_option("--seeds", runSeeds, "run seeds");
  run->add_option("--epsilon", runEps, "target suboptimality");
  run->add_option("--delta", runDelta, "failure probability");
  run->add_option("--mode", runMode, "constants mode: theory | practical");
  run->add_option("--budget", runBudget, "episode budget per run");
  run->add_option("--out-dir", runOut, "output directory for CSV and event logs");
  run->add_option("--workers", runWorkers, "parallel seed workers");

  // baseline
  auto* base = app.add_subcommand("baseline", "run a baseline learner");
  EnvFlags baseFlags;
  addEnvFlags(base, baseFlags, false);
  std::string baseConfig, baseEnv, baseFuncs, baseMode = "practical", baseOut, baseKind = "enumerateAll";
  std::vector<std::uint64_t> baseSeeds{1};
  double baseEps = 0.4, baseDelta = 0.1;
  std::uint64_t baseBudget = 100000000ULL, baseEpisodes = 0;
  int baseWorkers = 1;
  base->add_option("--baseline", baseKind, "enumerateAll | epsilonGreedy");
  base->add_option("--config", baseConfig, "experiment config JSON (flags override it)");
  base->add_option("--env", baseEnv, "environment file");
  base->add_option("--funcs", baseFuncs, "function-class file");
  base->add_option("--seeds", baseSeeds, "run seeds");
  base->add_option("--epsilon", baseEps, "target suboptimality");
  base->add_option("--delta", baseDelta, "failure probability");
  base->add_option("--mode", baseMode, "constants mode: theory | practical");
  base->add_option("--budget", baseBudget, "episode budget per run");
  base->add_option("--episodes", baseEpisodes, "episode budget for epsilonGreedy training");
  base->add_option("--out-dir", baseOut, "output directory");
  base->add_option("--workers", baseWorkers, "parallel seed workers");

  // oracle
  auto* ora = app.add_subcommand("oracle", "exact values for an environment file");
  std::string oraEnv, oraFuncs;
  ora->add_option("--env", oraEnv, "environment file")->required();
  ora->add_option("--funcs", oraFuncs, "optional function-class file for per-policy values");

  // validate
  auto* val = app.add_subcommand("validate", "assumption checks for an environment + class");
  std::string valEnv, valFuncs;
  val->add_option("--env", valEnv, "environment file")->required();
  val->add_option("--funcs", valFuncs, "function-class file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto inst = generateFromFlags(genFlags);
      lsvee::saveCdp(inst.cdp, genOut);
      lsvee::saveFunctionClass(inst.funcs, genFuncs);
      std::cout << "wrote " << genOut << " and " << genFuncs << '\n';
      return kExitOk;
    }

    if (run->parsed()) {
      auto cfg = assembleConfig(runConfig, runEnv, runFuncs, runFlags, run->count("--family") > 0, runSeeds,
                                runEps, runDelta, runMode, runBudget, runOut, runWorkers, run);
      auto result = lsvee::runExperiment(cfg);
      return summarize(result);
    }

    if (base->parsed()) {
      auto cfg = assembleConfig(baseConfig, baseEnv, baseFuncs, baseFlags, base->count("--family") > 0, baseSeeds,
                                baseEps, baseDelta, baseMode, baseBudget, baseOut, baseWorkers, base);
      std::optional<std::uint64_t> episodes;
      if (base->count("--episodes")) episodes = baseEpisodes;
      auto result = lsvee::runBaseline(cfg, lsvee::baselineFromString(baseKind), episodes);
      return summarize(result);
    }

    if (ora->parsed()) {
      lsvee::LayeredCdp cdp = lsvee::loadCdp(oraEnv);
      lsvee::ExactValues exact = lsvee::computeExactValues(cdp);
      nlohmann::json out;
      out["vStarRoot"] = exact.vStarRoot;
      out["vStar"] = exact.vStar;
      out["maxBellmanResidual"] = lsvee::maxBellmanResidual(cdp, exact);
      if (!oraFuncs.empty()) {
        lsvee::FunctionClass F = lsvee::loadFunctionClass(oraFuncs);
        nlohmann::json perPolicy = nlohmann::json::array();
        for (const auto& f : F.members) {
          double v = lsvee::policyValueExact(cdp, [&f](const lsvee::Observation& x) { return greedyAction(*f, x); });
          perPolicy.push_back({{"id", f->id()}, {"policyValue", v}});
        }
        out["policies"] = std::move(perPolicy);
        auto [bestId, bestVal] = lsvee::bruteForcePolicySearch(cdp, F);
        out["bestPolicy"] = {{"id", bestId}, {"value", bestVal}};
      }
      std::cout << out.dump(2) << '\n';
      return kExitOk;
    }

    if (val->parsed()) {
      lsvee::LayeredCdp cdp = lsvee::loadCdp(valEnv);
      lsvee::FunctionClass F = lsvee::loadFunctionClass(valFuncs);
      lsvee::AssumptionReport rep = lsvee::validateAssumptions(cdp, F);
      nlohmann::json out;
      out["reactiveQStar"] = {{"pass", rep.reactiveQStar}, {"counterexample", rep.reactiveCounterexample}};
      out["realizability"] = {{"pass", rep.realizable}, {"note", rep.realizabilityNote}};
      if (rep.realizedMemberIndex) out["realizability"]["memberIndex"] = *rep.realizedMemberIndex;
      out["deterministicTransitions"] = {{"pass", rep.layeredDeterministic}, {"note", rep.structureNote}};
      std::cout << out.dump(2) << '\n';
      return rep.allPass() ? kExitOk : kExitValidation;
    }
  } catch (const lsvee::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const lsvee::ValidationFailed& e) {
    std::cerr << "validation failure: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
