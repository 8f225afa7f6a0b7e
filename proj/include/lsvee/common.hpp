#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace lsvee {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidAction : public Error {
 public:
  using Error::Error;
};

// An episode budget ran out mid-run; callers abort with a partial report.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class SizeGuardExceeded : public Error {
 public:
  using Error::Error;
};

class ValidationFailed : public Error {
 public:
  using Error::Error;
};

// Every regressor got filtered out. Signals violated assumptions or bad luck.
class ClassEmptied : public Error {
 public:
  using Error::Error;
};

class IterationGuardExceeded : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Level is 1-based; level H+1 is the unique terminal pseudo-state (value 0).
struct StateId {
  int level = 1;
  int index = 0;

  friend bool operator==(const StateId& a, const StateId& b) {
    return a.level == b.level && a.index == b.index;
  }
  friend bool operator!=(const StateId& a, const StateId& b) { return !(a == b); }
  friend bool operator<(const StateId& a, const StateId& b) {
    return std::tie(a.level, a.index) < std::tie(b.level, b.index);
  }
};

// An action sequence from the root. By determinism it identifies a state.
using Path = std::vector<int>;

std::string pathToString(const Path& p);

// What the agent sees. `token` comes from the declared per-state distribution
// and is stable across draws: two draws with the same token (and history, when
// the environment attaches one) are the same observation point. `history` is
// the action prefix that reached the state; it is filled by the samplers only
// for environments that opt in (the combination-lock family) and is empty
// otherwise.
struct Observation {
  std::int64_t token = 0;
  std::vector<double> features;
  std::vector<int> history;
};

}  // namespace lsvee
