#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lsvee/algo.hpp"
#include "lsvee/envgen.hpp"
#include "lsvee/harness.hpp"
#include "lsvee/oracle.hpp"
#include "lsvee/schedule.hpp"

namespace py = pybind11;
using namespace lsvee;

namespace {

py::object jsonToPy(const nlohmann::json& j) {
  py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

AlgoParams paramsFromArgs(double epsilon, double delta, const std::string& mode,
                          std::optional<std::uint64_t> budget, double cPhi, double cNtrain, double cNtest,
                          double cN1, double cN2) {
  AlgoParams p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.mode = constantsModeFromString(mode);
  p.budget = budget;
  p.cPhi = cPhi;
  p.cNtrain = cNtrain;
  p.cNtest = cNtest;
  p.cN1 = cN1;
  p.cN2 = cN2;
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Layered deterministic decision processes, exact oracles, and the value-elimination learner";

  py::register_exception<BudgetExceeded>(m, "BudgetExceeded");
  py::register_exception<SizeGuardExceeded>(m, "SizeGuardExceeded");
  py::register_exception<ValidationFailed>(m, "ValidationFailed");
  py::register_exception<ConfigError>(m, "ConfigError");

  py::class_<LayeredCdp>(m, "LayeredCdp")
      .def_property_readonly("horizon", &LayeredCdp::horizon)
      .def_property_readonly("num_actions", &LayeredCdp::numActions)
      .def_property_readonly("states_per_level", &LayeredCdp::statesPerLevel)
      .def_property_readonly("history_in_observation", &LayeredCdp::historyInObservation)
      .def("to_json", [](const LayeredCdp& c) { return jsonToPy(cdpToJson(c)); });

  py::class_<FunctionClass>(m, "FunctionClass")
      .def_property_readonly("size", &FunctionClass::size)
      .def_property_readonly("star_index", [](const FunctionClass& f) { return f.starIndex; })
      .def_property_readonly("star_id", &FunctionClass::starId)
      .def("to_json", [](const FunctionClass& f) { return jsonToPy(functionClassToJson(f)); });

  m.def("make_random_realizable",
        [](int M, int K, int H, int N, int obsPerState, std::uint64_t seed) {
          GeneratedInstance g = makeRandomRealizable(M, K, H, N, obsPerState, seed);
          return py::make_tuple(std::move(g.cdp), std::move(g.funcs));
        },
        py::arg("M"), py::arg("K"), py::arg("H"), py::arg("N"), py::arg("obs_per_state") = 1,
        py::arg("seed") = 1);

  m.def("make_disjoint_obs",
        [](int M, int K, int H, int obsPerState, int N, std::uint64_t seed) {
          GeneratedInstance g = makeDisjointObs(M, K, H, obsPerState, N, seed);
          return py::make_tuple(std::move(g.cdp), std::move(g.funcs));
        },
        py::arg("M"), py::arg("K"), py::arg("H"), py::arg("obs_per_state"), py::arg("N"),
        py::arg("seed") = 1);

  m.def("make_lock",
        [](int H, int K, double epsilon, const Path& pStar, std::uint64_t seed) {
          LockInstance g = makeLock(H, K, epsilon, pStar, seed);
          return py::make_tuple(std::move(g.cdp), std::move(g.funcs));
        },
        py::arg("H"), py::arg("K"), py::arg("epsilon"), py::arg("p_star"), py::arg("seed") = 1);

  m.def("save_cdp", &saveCdp, py::arg("cdp"), py::arg("path"));
  m.def("load_cdp", &loadCdp, py::arg("path"));
  m.def("save_function_class", &saveFunctionClass, py::arg("funcs"), py::arg("path"));
  m.def("load_function_class", &loadFunctionClass, py::arg("path"));

  m.def("exact_values", [](const LayeredCdp& cdp) {
    ExactValues e = computeExactValues(cdp);
    py::dict out;
    out["v_star_root"] = e.vStarRoot;
    out["v_star"] = e.vStar;
    return out;
  });

  m.def("max_bellman_residual", [](const LayeredCdp& cdp) {
    ExactValues e = computeExactValues(cdp);
    return maxBellmanResidual(cdp, e);
  });

  m.def("policy_value",
        [](const LayeredCdp& cdp, const FunctionClass& F, int memberIndex) {
          const auto& f = F.members.at(static_cast<std::size_t>(memberIndex));
          return policyValueExact(cdp, [&f](const Observation& x) { return greedyAction(*f, x); });
        },
        py::arg("cdp"), py::arg("funcs"), py::arg("member_index"));

  m.def("value_prediction",
        [](const LayeredCdp& cdp, const FunctionClass& F, int memberIndex, const Path& p) {
          return valuePredictionExact(cdp, p, *F.members.at(static_cast<std::size_t>(memberIndex)));
        },
        py::arg("cdp"), py::arg("funcs"), py::arg("member_index"), py::arg("path"));

  m.def("brute_force_policy_search", [](const LayeredCdp& cdp, const FunctionClass& F) {
    auto [id, value] = bruteForcePolicySearch(cdp, F);
    return py::make_tuple(id, value);
  });

  m.def("validate_assumptions", [](const LayeredCdp& cdp, const FunctionClass& F) {
    AssumptionReport r = validateAssumptions(cdp, F);
    py::dict out;
    out["reactive_q_star"] = r.reactiveQStar;
    out["reactive_counterexample"] = r.reactiveCounterexample;
    out["realizable"] = r.realizable;
    out["deterministic_transitions"] = r.layeredDeterministic;
    out["all_pass"] = r.allPass();
    return out;
  });

  m.def("compute_params",
        [](double epsilon, double delta, int H, int K, int M, int N, const std::string& mode) {
          AlgoParams p;
          p.mode = constantsModeFromString(mode);
          ResolvedParams r = computeParams(epsilon, delta, H, K, M, N, p);
          py::dict out;
          out["phi"] = r.phi;
          out["eps_demand"] = r.epsDemand;
          out["eps_test_per_len"] = r.epsTestPerLen;
          out["n_test_root"] = r.nTestRoot;
          out["n_train_root"] = r.nTrainRoot;
          out["threshold_root"] = r.thresholdRoot;
          out["n1"] = r.n1;
          out["n2"] = r.n2;
          out["n_test_on_demand"] = r.nTestOnDemand;
          out["n_train_on_demand"] = r.nTrainOnDemand;
          return out;
        },
        py::arg("epsilon"), py::arg("delta"), py::arg("H"), py::arg("K"), py::arg("M"), py::arg("N"),
        py::arg("mode") = "practical");

  m.def("run_lsvee",
        [](const LayeredCdp& cdp, const FunctionClass& F, double epsilon, double delta, std::uint64_t seed,
           const std::string& mode, std::optional<std::uint64_t> budget, double cPhi, double cNtrain,
           double cNtest, double cN1, double cN2) {
          AlgoParams p = paramsFromArgs(epsilon, delta, mode, budget, cPhi, cNtrain, cNtest, cN1, cN2);
          RunReport rep = ::lsvee::lsvee(cdp, F, epsilon, delta, p, seed, F.starId());
          return jsonToPy(rep.toJson());
        },
        py::arg("cdp"), py::arg("funcs"), py::arg("epsilon"), py::arg("delta"), py::arg("seed") = 1,
        py::arg("mode") = "practical", py::arg("budget") = py::none(), py::arg("c_phi") = 4.0,
        py::arg("c_ntrain") = 8.0, py::arg("c_ntest") = 2.0, py::arg("c_n1") = 8.0, py::arg("c_n2") = 4.0);
}
