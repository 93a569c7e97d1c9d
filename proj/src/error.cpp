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

#include "ca/error.hpp"

namespace ca {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::storage_io: return "storage-io";
    case Errc::repo_not_initialized: return "repo-not-initialized";
    case Errc::lock_held: return "lock-held";
    case Errc::not_found: return "not-found";
    case Errc::integrity_violation: return "integrity-violation";
    case Errc::invalid_tuple: return "invalid-tuple";
    case Errc::conflict: return "conflict";
    case Errc::dangling_reference: return "dangling-reference";
    case Errc::run_not_found: return "run-not-found";
    case Errc::parse_error: return "parse-error";
    case Errc::schema_error: return "schema-error";
    case Errc::cycle: return "cycle";
    case Errc::unresolved_input: return "unresolved-input";
    case Errc::executor_failure: return "executor-failure";
    case Errc::spawn_failure: return "spawn-failure";
    case Errc::missing_output: return "missing-output";
    case Errc::unknown_branch: return "unknown-branch";
    case Errc::malformed_event: return "malformed-event";
    case Errc::incomplete_pins: return "incomplete-pins";
    case Errc::empty_manifest: return "empty-manifest";
    case Errc::run_not_succeeded: return "run-not-succeeded";
    case Errc::gate_failed: return "gate-failed";
    case Errc::already_decided: return "already-decided";
    case Errc::not_approved: return "not-approved";
    case Errc::already_released: return "already-released";
    case Errc::malformed_metrics: return "malformed-metrics-document";
    case Errc::not_aligned: return "not-aligned";
    case Errc::missing_feedback: return "missing-feedback";
    case Errc::missing_input: return "missing-input";
    case Errc::invalid_argument: return "invalid-argument";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace ca
