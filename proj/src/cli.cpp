// Copyright 2026 The ensrob Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ensrob/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>

#include <fmt/format.h>

#include "ensrob/emitters.hpp"
#include "ensrob/encoder.hpp"
#include "ensrob/milp_core.hpp"
#include "ensrob/oracle.hpp"
#include "json.hpp"

namespace ensrob::cli {

namespace {

using nlohmann::json;

struct LoadedProblem {
  Ensemble ensemble;
  LabelledDataset data;
};

LoadedProblem load_problem(const CommonOptions& options) {
  LoadedProblem problem;
  problem.ensemble = load_ensemble(options.ensemble_path);
  problem.data = load_dataset(options.dataset_path);
  problem.data.validate(problem.ensemble.input_shape(),
                        problem.ensemble.num_labels());
  return problem;
}

void print_witness(const RandomizedAttack& ra) {
  for (size_t i = 0; i < ra.attacks.size(); ++i) {
    fmt::print("attack {} (p = {:.6g}):\n", i, ra.probs[i]);
    for (size_t j = 0; j < ra.attacks[i].perturbations.size(); ++j) {
      std::string row;
      for (double v : ra.attacks[i].perturbations[j])
        row += (row.empty() ? "" : ", ") + fmt::format("{:.6g}", v);
      fmt::print("  point {}: [{}]\n", j, row);
    }
  }
}

json witness_json(const RandomizedAttack& ra, double value, double epsilon) {
  json j;
  j["attacks"] = json::array();
  for (const DeterministicAttack& a : ra.attacks) j["attacks"].push_back(a.perturbations);
  j["probs"] = ra.probs;
  j["value"] = value;
  j["epsilon"] = epsilon;
  return j;
}

SolverBackend make_backend(const VerifyOptions& options) {
  SolverBackend backend;
  if (options.backend == "lp")
    backend.kind = SolverBackend::Kind::ExternalLp;
  else if (options.backend == "smt")
    backend.kind = SolverBackend::Kind::ExternalSmt;
  else
    throw Error(fmt::format("unknown backend \"{}\"", options.backend));
  backend.time_budget_seconds = options.time_budget;
  backend.keep_artifacts = options.keep_artifacts;

  // Resolution order: environment, then flag, then config file.
  if (const char* env = std::getenv("ENSROB_SOLVER_CMD"); env && *env) {
    backend.command_template = env;
  } else if (!options.solver_cmd.empty()) {
    backend.command_template = options.solver_cmd;
  } else if (!options.config_path.empty()) {
    backend.command_template = config_lookup(
        options.config_path,
        options.backend == "lp" ? "lp_command" : "smt_command");
  }
  if (backend.command_template.empty())
    throw Error(fmt::format(
        "backend \"{}\" needs a solver command (flag --solver-cmd, config "
        "file, or ENSROB_SOLVER_CMD)",
        options.backend));
  return backend;
}

}  // namespace

std::string config_lookup(const std::string& config_path, const std::string& key) {
  std::ifstream in(config_path);
  if (!in) throw Error(fmt::format("cannot open config {}", config_path));
  std::string line;
  std::string value;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string k = line.substr(0, eq);
    std::string v = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
    };
    trim(k);
    trim(v);
    if (k == key) value = v;  // last entry wins
  }
  return value;
}

int run_verify(const VerifyOptions& options) {
  LoadedProblem problem;
  ConstraintSystem cs;
  try {
    options.common.spec.validate();
    problem = load_problem(options.common);
    cs = encode_base(problem.ensemble, problem.data, options.common.spec);
    if (options.mode == "maximize")
      add_max_objective(cs);
    else if (options.mode != "feasibility")
      throw Error(fmt::format("unknown mode \"{}\"", options.mode));
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInputError;
  }

  MilpVerdict verdict;
  try {
    if (options.backend == "internal") {
      const SolveMode mode = options.mode == "maximize" ? SolveMode::Maximize
                                                        : SolveMode::Feasibility;
      const IncumbentCallback log_incumbent =
          [](const std::vector<double>&, double objective) {
            fmt::print(stderr, "incumbent: objective {:.6g}\n", objective);
          };
      verdict = solve_milp(cs, mode, options.time_budget, log_incumbent);
    } else {
      verdict = run_external(make_backend(options), cs);
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInputError;
  }

  fmt::print(stderr,
             "solver: {} nodes, {} lp iterations, depth {}, exhausted {}\n",
             verdict.diag.nodes, verdict.diag.lp_iterations, verdict.diag.max_depth,
             verdict.diag.exhausted);

  json out;
  out["epsilon"] = options.common.spec.epsilon;
  out["alpha"] = options.common.spec.alpha;

  if (verdict.has_assignment) {
    // NOT ROBUST claims are only printed once the witness survives the
    // solver-independent certificate check.
    const RandomizedAttack witness = extract_witness(cs, verdict.assignment);
    const CheckReport report = check_certificate(problem.ensemble, problem.data,
                                                 witness, options.common.spec);
    if (report.pass) {
      if (!options.witness_out.empty())
        save_witness(Witness{witness, report.value, options.common.spec.epsilon},
                     options.witness_out);
      if (options.common.json) {
        out["verdict"] = "NOT_ROBUST";
        out["value"] = report.value;
        out["boundary_case"] = report.boundary_case;
        out["witness"] = witness_json(witness, report.value,
                                      options.common.spec.epsilon);
        fmt::print("{}\n", out.dump(2));
      } else {
        fmt::print("NOT ROBUST\n");
        fmt::print("misclassification value: {:.9g}\n", report.value);
        if (report.boundary_case)
          fmt::print("note: value sits on the alpha boundary\n");
        print_witness(witness);
      }
      return kExitNotRobust;
    }
    if (verdict.status == MilpStatus::Feasible) {
      // The internal solver audited this assignment already; failing the
      // certificate here means the witness is unusable, not that the
      // ensemble is robust.
      fmt::print(stderr, "witness failed certification (value {:.9g})\n",
                 report.value);
      verdict.status = MilpStatus::Unknown;
      verdict.reason = "witness failed certification";
    }
  }

  switch (verdict.status) {
    case MilpStatus::Infeasible:
      if (options.common.json) {
        out["verdict"] = "ROBUST";
        fmt::print("{}\n", out.dump(2));
      } else {
        fmt::print("ROBUST\n");
      }
      return kExitRobust;
    case MilpStatus::Unknown:
    default:
      if (options.common.json) {
        out["verdict"] = "UNKNOWN";
        out["reason"] = verdict.reason;
        fmt::print("{}\n", out.dump(2));
      } else {
        fmt::print("UNKNOWN ({})\n", verdict.reason);
      }
      return kExitUnknown;
  }
}

namespace {

// Per-classifier optimal attacks, solved concurrently, combined in index
// order.
std::vector<DeterministicAttack> per_classifier_attacks(const Ensemble& ensemble,
                                                        const LabelledDataset& data,
                                                        const VerificationSpec& spec,
                                                        double time_budget) {
  std::vector<std::future<DeterministicAttack>> futures;
  for (int c = 0; c < ensemble.size(); ++c) {
    futures.push_back(std::async(std::launch::async, [&, c]() {
      const ConstraintSystem cs = encode_single_classifier(
          ensemble.networks[c], data, spec.epsilon, spec.margin);
      const MilpVerdict verdict = solve_milp(cs, SolveMode::Maximize, time_budget);
      if (!verdict.has_assignment)
        throw Error(fmt::format("classifier {}: single-classifier attack did not "
                                "solve ({})",
                                c, verdict.reason));
      return extract_witness(cs, verdict.assignment).attacks.at(0);
    }));
  }
  std::vector<DeterministicAttack> attacks;
  attacks.reserve(futures.size());
  for (auto& f : futures) attacks.push_back(f.get());
  return attacks;
}

}  // namespace

int run_baseline(const BaselineOptions& options) {
  LoadedProblem problem;
  try {
    options.common.spec.validate();
    problem = load_problem(options.common);
    if (options.kind != "uniform" && options.kind != "bda")
      throw Error(fmt::format("unknown baseline kind \"{}\"", options.kind));
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInputError;
  }

  try {
    const auto candidates = per_classifier_attacks(
        problem.ensemble, problem.data, options.common.spec, options.time_budget);

    double value = 0.0;
    RandomizedAttack ra;
    if (options.kind == "uniform") {
      ra = uniform_attacker(candidates);
      value = misclassification_value(problem.ensemble, problem.data, ra,
                                      options.common.spec.margin);
    } else {
      const auto [attack, best] = best_deterministic_attacker(
          problem.ensemble, problem.data, candidates, options.common.spec.margin);
      ra.attacks = {attack};
      ra.probs = {1.0};
      value = best;
    }

    double maxmilp_value = -1.0;
    double maxmilp_objective = 0.0;
    if (options.with_maxmilp) {
      VerificationSpec relaxed = options.common.spec;
      relaxed.alpha = 0.0;  // objective-driven run; the threshold row is moot
      ConstraintSystem cs = encode_base(problem.ensemble, problem.data, relaxed);
      add_max_objective(cs);
      const MilpVerdict verdict =
          solve_milp(cs, SolveMode::Maximize, options.time_budget);
      if (verdict.has_assignment) {
        const RandomizedAttack best = extract_witness(cs, verdict.assignment);
        maxmilp_value = misclassification_value(problem.ensemble, problem.data, best,
                                                options.common.spec.margin);
        maxmilp_objective = verdict.objective;
      }
    }

    if (options.common.json) {
      json out;
      out["kind"] = options.kind;
      out["value"] = value;
      out["witness"] = witness_json(ra, value, options.common.spec.epsilon);
      if (maxmilp_value >= 0.0) {
        out["maxmilp_value"] = maxmilp_value;
        out["maxmilp_objective"] = maxmilp_objective;
      }
      fmt::print("{}\n", out.dump(2));
    } else {
      fmt::print("{} attacker value: {:.9g}\n", options.kind, value);
      if (maxmilp_value >= 0.0)
        fmt::print("maxmilp value: {:.9g} (objective {:.9g})\n", maxmilp_value,
                   maxmilp_objective);
      print_witness(ra);
    }
    return kExitNotRobust;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUnknown;
  }
}

int run_emit(const EmitOptions& options) {
  try {
    options.common.spec.validate();
    const LoadedProblem problem = load_problem(options.common);
    ConstraintSystem cs =
        encode_base(problem.ensemble, problem.data, options.common.spec);
    if (options.mode == "maximize")
      add_max_objective(cs);
    else if (options.mode != "feasibility")
      throw Error(fmt::format("unknown mode \"{}\"", options.mode));

    std::string text;
    if (options.format == "lp")
      text = emit_lp(cs);
    else if (options.format == "smt2")
      text = emit_smtlib(cs);
    else
      throw Error(fmt::format("unknown format \"{}\"", options.format));

    if (options.out_path.empty()) {
      fmt::print("{}", text);
    } else {
      std::ofstream out(options.out_path, std::ios::binary);
      if (!out) throw Error(fmt::format("cannot write {}", options.out_path));
      out << text;
    }
    return kExitNotRobust;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInputError;
  }
}

int run_check(const CheckOptions& options) {
  try {
    const LoadedProblem problem = load_problem(options.common);
    const Witness witness = load_witness(options.witness_path);
    VerificationSpec spec = options.common.spec;
    if (spec.epsilon <= 0.0) spec.epsilon = witness.epsilon;
    const CheckReport report =
        check_certificate(problem.ensemble, problem.data, witness.attack, spec);
    fmt::print("{}", check_report_to_json(report));
    return report.pass ? 0 : 1;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInputError;
  }
}

int run_bound(int points, int classifiers) {
  try {
    fmt::print("{}\n", attack_count_bound(points, classifiers));
    return 0;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInputError;
  }
}

int run_solve_lp(const SolveLpOptions& options) {
  try {
    std::ifstream in(options.path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", options.path));
    std::ostringstream ss;
    ss << in.rdbuf();
    const ConstraintSystem cs = parse_lp(ss.str());
    const SolveMode mode =
        cs.has_objective() ? SolveMode::Maximize : SolveMode::Feasibility;
    const MilpVerdict verdict = solve_milp(cs, mode, options.time_budget);
    switch (verdict.status) {
      case MilpStatus::Feasible: {
        fmt::print("status optimal\n");
        fmt::print("objective {:.17g}\n", verdict.objective);
        for (int i = 0; i < cs.num_vars(); ++i)
          fmt::print("{} {:.17g}\n", cs.vars()[i].name, verdict.assignment[i]);
        return 0;
      }
      case MilpStatus::Infeasible:
        fmt::print("status infeasible\n");
        return 0;
      case MilpStatus::Unknown:
      default:
        fmt::print("status unknown\n");
        return 0;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInputError;
  }
}

}  // namespace ensrob::cli
