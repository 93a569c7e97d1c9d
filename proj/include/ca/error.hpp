// Copyright 2026 The Continuous Analysis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ca {

/// Every failure the engine reports carries one of these codes. The CLI maps
/// them onto process exit codes, so the set is part of the public contract.
enum class Errc {
  // storage / repository
  storage_io,
  repo_not_initialized,
  lock_held,
  not_found,
  integrity_violation,
  // tuples and runs
  invalid_tuple,
  conflict,
  dangling_reference,
  run_not_found,
  // flows
  parse_error,
  schema_error,
  cycle,
  unresolved_input,
  executor_failure,
  spawn_failure,
  missing_output,
  // pipeline
  unknown_branch,
  malformed_event,
  incomplete_pins,
  empty_manifest,
  run_not_succeeded,
  gate_failed,
  already_decided,
  not_approved,
  already_released,
  // feedback
  malformed_metrics,
  not_aligned,
  missing_feedback,
  // lineage
  missing_input,
  // generic bad argument from a caller
  invalid_argument,
};

/// Stable kebab-case name, e.g. "integrity-violation".
std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ca
