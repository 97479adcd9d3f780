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

#ifndef ENSROB_CLI_HPP
#define ENSROB_CLI_HPP

#include <string>

#include "ensrob/attacks.hpp"

namespace ensrob::cli {

// Exit codes shared by all subcommands.
inline constexpr int kExitNotRobust = 0;
inline constexpr int kExitRobust = 1;
inline constexpr int kExitUnknown = 2;
inline constexpr int kExitInputError = 3;

struct CommonOptions {
  std::string ensemble_path;
  std::string dataset_path;
  VerificationSpec spec;
  bool json = false;
};

struct VerifyOptions {
  CommonOptions common;
  std::string backend = "internal";  // internal | lp | smt
  std::string solver_cmd;            // overrides config; env overrides this
  std::string config_path;
  double time_budget = 60.0;
  std::string mode = "feasibility";  // feasibility | maximize
  std::string witness_out;
  bool keep_artifacts = false;
};

struct BaselineOptions {
  CommonOptions common;
  std::string kind = "uniform";  // uniform | bda
  bool with_maxmilp = false;
  double time_budget = 60.0;
};

struct EmitOptions {
  CommonOptions common;
  std::string format = "lp";  // lp | smt2
  std::string mode = "feasibility";
  std::string out_path;  // empty: stdout
};

struct CheckOptions {
  CommonOptions common;  // spec.epsilon <= 0 means "take it from the witness"
  std::string witness_path;
};

struct SolveLpOptions {
  std::string path;
  double time_budget = 60.0;
};

int run_verify(const VerifyOptions& options);
int run_baseline(const BaselineOptions& options);
int run_emit(const EmitOptions& options);
int run_check(const CheckOptions& options);
int run_bound(int points, int classifiers);
int run_solve_lp(const SolveLpOptions& options);

// key = value lines; '#' comments. Used for backend command templates.
std::string config_lookup(const std::string& config_path, const std::string& key);

}  // namespace ensrob::cli

#endif  // ENSROB_CLI_HPP
