#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "lsvee/cdp.hpp"
#include "lsvee/common.hpp"
#include "lsvee/rng.hpp"

namespace lsvee {

// A candidate Q-function: a total map (observation, action) -> [0,1].
class QFunction {
 public:
  QFunction(int id, int numActions) : id_(id), numActions_(numActions) {}
  virtual ~QFunction() = default;

  int id() const { return id_; }
  int numActions() const { return numActions_; }
  virtual double eval(const Observation& x, int action) const = 0;
  virtual nlohmann::json toJson() const = 0;

 private:
  int id_;
  int numActions_;
};

// Lookup table keyed by observation token. Unknown tokens evaluate to the
// fallback so the map stays total.
class TableQ : public QFunction {
 public:
  TableQ(int id, int numActions, std::unordered_map<std::int64_t, std::vector<double>> rows,
         double fallback = 0.0);
  double eval(const Observation& x, int action) const override;
  nlohmann::json toJson() const override;

  const std::unordered_map<std::int64_t, std::vector<double>>& rows() const { return rows_; }

 private:
  std::unordered_map<std::int64_t, std::vector<double>> rows_;
  double fallback_;
};

// Per-action affine function of the feature vector, clipped to [0,1].
class LinearQ : public QFunction {
 public:
  LinearQ(int id, int numActions, std::vector<std::vector<double>> weights, std::vector<double> bias);
  double eval(const Observation& x, int action) const override;
  nlohmann::json toJson() const override;

 private:
  std::vector<std::vector<double>> weights_;  // [action][featureDim]
  std::vector<double> bias_;
};

// f_p(x, a) = 1/2 + eps * 1[history(x) followed by a is a prefix of p].
// Reads the action-history field that the lock environment attaches.
class PathIndexedQ : public QFunction {
 public:
  PathIndexedQ(int id, int numActions, Path path, double epsilon);
  double eval(const Observation& x, int action) const override;
  nlohmann::json toJson() const override;

  const Path& path() const { return path_; }

 private:
  Path path_;
  double epsilon_;
};

// Smallest action maximizing f(x, .). Ties break to the lowest index.
int greedyAction(const QFunction& f, const Observation& x);

// The greedy policy pi_f(x) = argmax_a f(x, a); a pure function of the
// observation.
class Policy {
 public:
  explicit Policy(std::shared_ptr<const QFunction> f) : f_(std::move(f)) {}
  int operator()(const Observation& x) const { return greedyAction(*f_, x); }
  const QFunction& function() const { return *f_; }
  std::shared_ptr<const QFunction> functionPtr() const { return f_; }

 private:
  std::shared_ptr<const QFunction> f_;
};

struct FunctionClass {
  std::vector<std::shared_ptr<const QFunction>> members;
  // Index into members of f* when known. Recorded for the test harness; the
  // algorithm never reads it.
  std::optional<int> starIndex;

  int size() const { return static_cast<int>(members.size()); }
  std::optional<int> starId() const {
    if (!starIndex) return std::nullopt;
    return members[static_cast<std::size_t>(*starIndex)]->id();
  }
  Policy policyOf(int memberIdx) const { return Policy(members[static_cast<std::size_t>(memberIdx)]); }
};

struct CacheEntry {
  double estimate = 0.0;
  long samplesUsed = 0;
  std::uint64_t stamp = 0;  // invocation counter; readers take the freshest
};

// Per-(path, function) Monte-Carlo value-prediction estimates. Written only by
// the Consensus and TD-Elim estimate steps; single writer per run.
class ValueCache {
 public:
  void put(std::uint64_t pathCode, int functionId, double estimate, long samplesUsed) {
    entries_[pathCode][functionId] = CacheEntry{estimate, samplesUsed, nextStamp_++};
  }
  const CacheEntry* find(std::uint64_t pathCode, int functionId) const {
    auto it = entries_.find(pathCode);
    if (it == entries_.end()) return nullptr;
    auto jt = it->second.find(functionId);
    if (jt == it->second.end()) return nullptr;
    return &jt->second;
  }

 private:
  std::unordered_map<std::uint64_t, std::unordered_map<int, CacheEntry>> entries_;
  std::uint64_t nextStamp_ = 0;
};

// Draws n observations x_i ~ D_p (n metered episodes) and returns, for every
// member f, (1/n) sum_i f(x_i, pi_f(x_i)), writing all entries into the cache.
// For |p| = H the terminal convention applies: every estimate is 0 and no
// episodes are drawn.
std::map<int, double> mcValuePrediction(const LayeredCdp& cdp, const Path& p, const FunctionClass& F,
                                        long n, RngFactory& rng, EpisodeMeter& meter, ValueCache& cache);

// Function-class serialization (sidecar to the CDP file).
nlohmann::json functionClassToJson(const FunctionClass& F);
FunctionClass functionClassFromJson(const nlohmann::json& j);
void saveFunctionClass(const FunctionClass& F, const std::string& path);
FunctionClass loadFunctionClass(const std::string& path);

}  // namespace lsvee
