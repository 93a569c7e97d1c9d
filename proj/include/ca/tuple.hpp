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

#include <array>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ca/hash.hpp"
#include "json.hpp"

namespace ca {

/// One component of a tuple pinned to an opaque version and, optionally, the
/// content hash of the stored artifact that version refers to.
struct VersionPin {
  std::string component;
  std::string version;
  std::optional<ContentHash> content;

  friend bool operator==(const VersionPin&, const VersionPin&) = default;
};

/// `[a-z0-9_-]+`
bool is_valid_component_name(std::string_view name) noexcept;

/// The set of pins characterizing a run's inputs. Pins are kept sorted by
/// component name, so iteration and encoding never depend on insertion order.
class ArtifactVersionTuple {
 public:
  static constexpr std::array<std::string_view, 4> kBaseline = {"code", "data", "dependencies",
                                                                "deployment"};

  ArtifactVersionTuple() = default;
  ArtifactVersionTuple(std::initializer_list<VersionPin> pins);

  /// Inserts or replaces the pin for pin.component. Throws invalid-tuple on a
  /// malformed component name or a version containing '\n'.
  void set(VersionPin pin);
  bool erase(std::string_view component);

  const VersionPin* find(std::string_view component) const;
  const std::map<std::string, VersionPin, std::less<>>& pins() const noexcept { return pins_; }
  std::vector<std::string> components() const;
  std::size_t size() const noexcept { return pins_.size(); }

  /// Throws invalid-tuple when a baseline component is missing.
  void validate() const;
  bool is_valid() const noexcept;

  friend bool operator==(const ArtifactVersionTuple&, const ArtifactVersionTuple&) = default;

 private:
  std::map<std::string, VersionPin, std::less<>> pins_;
};

/// `component\nversion\ncontent-hex-or-empty\n` per pin, in component order.
Blob canonical_encode(const ArtifactVersionTuple& tuple);
ContentHash tuple_hash(const ArtifactVersionTuple& tuple);

struct PinChange {
  std::string component;
  std::optional<VersionPin> before;
  std::optional<VersionPin> after;

  friend bool operator==(const PinChange&, const PinChange&) = default;
};

/// Components whose pins differ or exist on only one side, sorted by name.
std::vector<PinChange> diff_tuples(const ArtifactVersionTuple& a, const ArtifactVersionTuple& b);

/// Same component key set; versions may differ.
bool aligned(const ArtifactVersionTuple& a, const ArtifactVersionTuple& b);

void to_json(nlohmann::json& j, const VersionPin& pin);
void from_json(const nlohmann::json& j, VersionPin& pin);
/// Serialized as an array of pins in canonical component order.
void to_json(nlohmann::json& j, const ArtifactVersionTuple& tuple);
void from_json(const nlohmann::json& j, ArtifactVersionTuple& tuple);
void to_json(nlohmann::json& j, const PinChange& change);

}  // namespace ca
