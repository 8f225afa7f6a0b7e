#include "lsvee/funcclass.hpp"

#include <algorithm>
#include <fstream>

namespace lsvee {

TableQ::TableQ(int id, int numActions, std::unordered_map<std::int64_t, std::vector<double>> rows,
               double fallback)
    : QFunction(id, numActions), rows_(std::move(rows)), fallback_(fallback) {
  for (const auto& [token, vals] : rows_) {
    if (static_cast<int>(vals.size()) != numActions)
      throw ValidationFailed("table row size must equal the action count");
    for (double v : vals)
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationFailed("predictor values must lie in [0,1]");
  }
  if (!(fallback_ >= 0.0 && fallback_ <= 1.0)) throw ValidationFailed("fallback outside [0,1]");
}

double TableQ::eval(const Observation& x, int action) const {
  auto it = rows_.find(x.token);
  if (it == rows_.end()) return fallback_;
  return it->second[static_cast<std::size_t>(action)];
}

nlohmann::json TableQ::toJson() const {
  nlohmann::json entries = nlohmann::json::array();
  // Sorted for a deterministic serialization.
  std::vector<std::int64_t> tokens;
  tokens.reserve(rows_.size());
  for (const auto& [t, _] : rows_) tokens.push_back(t);
  std::sort(tokens.begin(), tokens.end());
  for (std::int64_t t : tokens) entries.push_back({{"token", t}, {"values", rows_.at(t)}});
  return {{"id", id()}, {"type", "table"}, {"fallback", fallback_}, {"entries", std::move(entries)}};
}

LinearQ::LinearQ(int id, int numActions, std::vector<std::vector<double>> weights, std::vector<double> bias)
    : QFunction(id, numActions), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (static_cast<int>(weights_.size()) != numActions || static_cast<int>(bias_.size()) != numActions)
    throw ValidationFailed("linear predictor needs one weight row and bias per action");
}

double LinearQ::eval(const Observation& x, int action) const {
  const auto& w = weights_[static_cast<std::size_t>(action)];
  double v = bias_[static_cast<std::size_t>(action)];
  std::size_t d = std::min(w.size(), x.features.size());
  for (std::size_t i = 0; i < d; ++i) v += w[i] * x.features[i];
  return std::clamp(v, 0.0, 1.0);
}

nlohmann::json LinearQ::toJson() const {
  return {{"id", id()}, {"type", "linear"}, {"weights", weights_}, {"bias", bias_}};
}

PathIndexedQ::PathIndexedQ(int id, int numActions, Path path, double epsilon)
    : QFunction(id, numActions), path_(std::move(path)), epsilon_(epsilon) {
  if (!(epsilon_ > 0.0 && epsilon_ <= 0.5)) throw ValidationFailed("path-indexed epsilon outside (0, 0.5]");
}

double PathIndexedQ::eval(const Observation& x, int action) const {
  std::size_t n = x.history.size();
  bool prefix = n + 1 <= path_.size();
  for (std::size_t i = 0; prefix && i < n; ++i) prefix = (x.history[i] == path_[i]);
  prefix = prefix && n < path_.size() && path_[n] == action;
  return 0.5 + (prefix ? epsilon_ : 0.0);
}

nlohmann::json PathIndexedQ::toJson() const {
  return {{"id", id()}, {"type", "pathIndexed"}, {"path", path_}, {"epsilon", epsilon_}};
}

int greedyAction(const QFunction& f, const Observation& x) {
  int best = 0;
  double bestVal = f.eval(x, 0);
  for (int a = 1; a < f.numActions(); ++a) {
    double v = f.eval(x, a);
    if (v > bestVal) {
      bestVal = v;
      best = a;
    }
  }
  return best;
}

std::map<int, double> mcValuePrediction(const LayeredCdp& cdp, const Path& p, const FunctionClass& F,
                                        long n, RngFactory& rng, EpisodeMeter& meter, ValueCache& cache) {
  if (n < 1) throw Error("mcValuePrediction needs n >= 1");
  if (static_cast<int>(p.size()) > cdp.horizon()) throw InvalidAction("path longer than the horizon");

  std::uint64_t pathCode = cdp.encodePath(p);
  std::map<int, double> estimates;

  if (static_cast<int>(p.size()) == cdp.horizon()) {
    // Terminal convention: V(s_{H+1}) = 0; nothing to draw.
    for (const auto& f : F.members) {
      estimates[f->id()] = 0.0;
      cache.put(pathCode, f->id(), 0.0, 0);
    }
    return estimates;
  }

  StateId s = resolve(cdp, p);
  const auto& dist = cdp.obsDist(s);
  int S = static_cast<int>(dist.support.size());

  // f(x, pi_f(x)) only depends on the support point, so draw counts and fold.
  std::vector<Observation> obs(static_cast<std::size_t>(S));
  std::vector<double> cum(static_cast<std::size_t>(S));
  double acc = 0.0;
  for (int j = 0; j < S; ++j) {
    obs[static_cast<std::size_t>(j)] = observationAt(cdp, p, j);
    acc += dist.support[static_cast<std::size_t>(j)].prob;
    cum[static_cast<std::size_t>(j)] = acc;
  }

  std::vector<std::vector<double>> greedyVal(F.members.size(), std::vector<double>(static_cast<std::size_t>(S)));
  for (std::size_t fi = 0; fi < F.members.size(); ++fi) {
    const QFunction& f = *F.members[fi];
    for (int j = 0; j < S; ++j) {
      int a = greedyAction(f, obs[static_cast<std::size_t>(j)]);
      greedyVal[fi][static_cast<std::size_t>(j)] = f.eval(obs[static_cast<std::size_t>(j)], a);
    }
  }

  meter.charge(static_cast<std::uint64_t>(n));  // one root traversal per draw
  RngStream stream = rng.stream(StreamOp::McValuePrediction, pathCode);
  std::vector<long> count(static_cast<std::size_t>(S), 0);
  for (long i = 0; i < n; ++i) {
    double u = u01(stream);
    int j = 0;
    while (j + 1 < S && u >= cum[static_cast<std::size_t>(j)]) ++j;
    ++count[static_cast<std::size_t>(j)];
  }

  for (std::size_t fi = 0; fi < F.members.size(); ++fi) {
    double sum = 0.0;
    for (int j = 0; j < S; ++j)
      sum += static_cast<double>(count[static_cast<std::size_t>(j)]) * greedyVal[fi][static_cast<std::size_t>(j)];
    double est = sum / static_cast<double>(n);
    int id = F.members[fi]->id();
    estimates[id] = est;
    cache.put(pathCode, id, est, n);
  }
  return estimates;
}

// --- serialization ---

nlohmann::json functionClassToJson(const FunctionClass& F) {
  nlohmann::json members = nlohmann::json::array();
  int K = F.members.empty() ? 0 : F.members.front()->numActions();
  for (const auto& f : F.members) members.push_back(f->toJson());
  nlohmann::json j;
  j["numActions"] = K;
  j["members"] = std::move(members);
  if (F.starIndex) j["starIndex"] = *F.starIndex;
  return j;
}

FunctionClass functionClassFromJson(const nlohmann::json& j) {
  try {
    FunctionClass F;
    int K = j.at("numActions").get<int>();
    for (const auto& m : j.at("members")) {
      int id = m.at("id").get<int>();
      std::string type = m.at("type").get<std::string>();
      if (type == "table") {
        std::unordered_map<std::int64_t, std::vector<double>> rows;
        for (const auto& e : m.at("entries"))
          rows[e.at("token").get<std::int64_t>()] = e.at("values").get<std::vector<double>>();
        F.members.push_back(std::make_shared<TableQ>(id, K, std::move(rows), m.value("fallback", 0.0)));
      } else if (type == "linear") {
        F.members.push_back(std::make_shared<LinearQ>(id, K, m.at("weights").get<std::vector<std::vector<double>>>(),
                                                      m.at("bias").get<std::vector<double>>()));
      } else if (type == "pathIndexed") {
        F.members.push_back(
            std::make_shared<PathIndexedQ>(id, K, m.at("path").get<Path>(), m.at("epsilon").get<double>()));
      } else {
        throw ConfigError("unknown predictor type: " + type);
      }
    }
    if (j.contains("starIndex")) F.starIndex = j.at("starIndex").get<int>();
    std::vector<int> ids;
    for (const auto& f : F.members) ids.push_back(f->id());
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw ValidationFailed("function ids must be distinct");
    return F;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed function-class document: ") + e.what());
  }
}

void saveFunctionClass(const FunctionClass& F, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << functionClassToJson(F).dump(2) << '\n';
}

FunctionClass loadFunctionClass(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cannot parse ") + path + ": " + e.what());
  }
  return functionClassFromJson(j);
}

}  // namespace lsvee
