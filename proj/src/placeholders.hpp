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

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace ca {

struct Placeholder {
  enum class Kind { input, output, partition, partitions };
  Kind kind;
  std::string slot;
  std::size_t begin = 0;  // offset of '{'
  std::size_t end = 0;    // one past '}'
};

// Anything in braces that is not one of the four forms stays literal, so
// shell snippets like ${HOME} or awk '{print $1}' pass through untouched.
inline std::vector<Placeholder> scan_placeholders(std::string_view tmpl) {
  std::vector<Placeholder> out;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    auto close = tmpl.find('}', pos);
    if (close == std::string_view::npos) break;
    auto body = tmpl.substr(pos + 1, close - pos - 1);
    Placeholder ph{};
    ph.begin = pos;
    ph.end = close + 1;
    bool matched = true;
    if (body.starts_with("input:") && body.size() > 6) {
      ph.kind = Placeholder::Kind::input;
      ph.slot = std::string(body.substr(6));
    } else if (body.starts_with("output:") && body.size() > 7) {
      ph.kind = Placeholder::Kind::output;
      ph.slot = std::string(body.substr(7));
    } else if (body == "partition") {
      ph.kind = Placeholder::Kind::partition;
    } else if (body == "partitions") {
      ph.kind = Placeholder::Kind::partitions;
    } else {
      matched = false;
    }
    if (matched) {
      out.push_back(std::move(ph));
      pos = close + 1;
    } else {
      pos += 1;
    }
  }
  return out;
}

inline std::string render_template(std::string_view tmpl,
                                   const std::function<std::string(const Placeholder&)>& value) {
  std::string out;
  std::size_t last = 0;
  for (const auto& ph : scan_placeholders(tmpl)) {
    out.append(tmpl.substr(last, ph.begin - last));
    out += value(ph);
    last = ph.end;
  }
  out.append(tmpl.substr(last));
  return out;
}

}  // namespace ca
