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

#include "ca/tuple.hpp"

#include <algorithm>
#include <set>

#include "ca/error.hpp"

namespace ca {

using nlohmann::json;

bool is_valid_component_name(std::string_view name) noexcept {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

ArtifactVersionTuple::ArtifactVersionTuple(std::initializer_list<VersionPin> pins) {
  for (const auto& pin : pins) {
    if (pins_.contains(pin.component)) {
      throw Error(Errc::invalid_tuple, "duplicate component '" + pin.component + "'");
    }
    set(pin);
  }
}

void ArtifactVersionTuple::set(VersionPin pin) {
  if (!is_valid_component_name(pin.component)) {
    throw Error(Errc::invalid_tuple, "component name must match [a-z0-9_-]+: '" +
                                         pin.component + "'");
  }
  if (pin.version.find('\n') != std::string::npos) {
    throw Error(Errc::invalid_tuple, "version of '" + pin.component + "' contains a newline");
  }
  auto key = pin.component;
  pins_.insert_or_assign(std::move(key), std::move(pin));
}

bool ArtifactVersionTuple::erase(std::string_view component) {
  auto it = pins_.find(component);
  if (it == pins_.end()) return false;
  pins_.erase(it);
  return true;
}

const VersionPin* ArtifactVersionTuple::find(std::string_view component) const {
  auto it = pins_.find(component);
  return it == pins_.end() ? nullptr : &it->second;
}

std::vector<std::string> ArtifactVersionTuple::components() const {
  std::vector<std::string> out;
  out.reserve(pins_.size());
  for (const auto& [name, _] : pins_) out.push_back(name);
  return out;
}

void ArtifactVersionTuple::validate() const {
  for (auto name : kBaseline) {
    if (!pins_.contains(name)) {
      throw Error(Errc::invalid_tuple, "missing baseline component '" + std::string(name) + "'");
    }
  }
}

bool ArtifactVersionTuple::is_valid() const noexcept {
  return std::all_of(kBaseline.begin(), kBaseline.end(),
                     [&](std::string_view name) { return pins_.contains(name); });
}

Blob canonical_encode(const ArtifactVersionTuple& tuple) {
  tuple.validate();
  Blob out;
  for (const auto& [name, pin] : tuple.pins()) {
    out += name;
    out += '\n';
    out += pin.version;
    out += '\n';
    if (pin.content) out += pin.content->hex();
    out += '\n';
  }
  return out;
}

ContentHash tuple_hash(const ArtifactVersionTuple& tuple) {
  return ContentHash::of(canonical_encode(tuple));
}

std::vector<PinChange> diff_tuples(const ArtifactVersionTuple& a, const ArtifactVersionTuple& b) {
  std::vector<PinChange> out;
  auto ia = a.pins().begin();
  auto ib = b.pins().begin();
  // merge walk over two sorted maps
  while (ia != a.pins().end() || ib != b.pins().end()) {
    if (ib == b.pins().end() || (ia != a.pins().end() && ia->first < ib->first)) {
      out.push_back({ia->first, ia->second, std::nullopt});
      ++ia;
    } else if (ia == a.pins().end() || ib->first < ia->first) {
      out.push_back({ib->first, std::nullopt, ib->second});
      ++ib;
    } else {
      if (!(ia->second == ib->second)) out.push_back({ia->first, ia->second, ib->second});
      ++ia;
      ++ib;
    }
  }
  return out;
}

bool aligned(const ArtifactVersionTuple& a, const ArtifactVersionTuple& b) {
  return a.size() == b.size() &&
         std::equal(a.pins().begin(), a.pins().end(), b.pins().begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; });
}

void to_json(json& j, const VersionPin& pin) {
  j = json{{"component", pin.component}, {"version", pin.version}};
  j["content"] = pin.content ? json(pin.content->hex()) : json(nullptr);
}

void from_json(const json& j, VersionPin& pin) {
  pin.component = j.at("component").get<std::string>();
  pin.version = j.at("version").get<std::string>();
  pin.content.reset();
  if (auto it = j.find("content"); it != j.end() && !it->is_null()) {
    pin.content = ContentHash::from_hex(it->get<std::string>());
  }
}

void to_json(json& j, const ArtifactVersionTuple& tuple) {
  j = json::array();
  for (const auto& [_, pin] : tuple.pins()) j.push_back(pin);
}

void from_json(const json& j, ArtifactVersionTuple& tuple) {
  tuple = ArtifactVersionTuple{};
  std::set<std::string> seen;
  for (const auto& item : j) {
    auto pin = item.get<VersionPin>();
    if (!seen.insert(pin.component).second) {
      throw Error(Errc::invalid_tuple, "duplicate component '" + pin.component + "'");
    }
    tuple.set(std::move(pin));
  }
}

void to_json(json& j, const PinChange& change) {
  j = json{{"component", change.component}};
  j["before"] = change.before ? json(*change.before) : json(nullptr);
  j["after"] = change.after ? json(*change.after) : json(nullptr);
}

}  // namespace ca
