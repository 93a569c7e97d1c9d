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
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ca {

/// Raw artifact bytes. No framing, no encoding.
using Blob = std::string;

/// SHA-256 digest of a byte string, held as 64 lowercase hex characters.
///
/// A ContentHash can only be obtained by hashing bytes or by parsing a
/// well-formed hex string, so every instance satisfies the format invariant.
class ContentHash {
 public:
  static constexpr std::size_t kHexLength = 64;

  /// Digest of the empty byte string.
  ContentHash();

  static ContentHash of(std::string_view bytes);
  /// nullopt unless `hex` is exactly 64 chars of [0-9a-f].
  static std::optional<ContentHash> parse(std::string_view hex);
  /// Like parse() but throws Error{invalid_argument}.
  static ContentHash from_hex(std::string_view hex);

  const std::string& hex() const noexcept { return hex_; }
  std::string_view prefix(std::size_t n) const noexcept {
    return std::string_view(hex_).substr(0, n);
  }
  /// The raw 32 digest bytes.
  std::array<std::uint8_t, 32> bytes() const;

  friend bool operator==(const ContentHash&, const ContentHash&) = default;
  friend auto operator<=>(const ContentHash&, const ContentHash&) = default;

 private:
  explicit ContentHash(std::string hex) : hex_(std::move(hex)) {}
  std::string hex_;
};

std::array<std::uint8_t, 32> sha256(std::string_view bytes);
std::string to_hex(const std::uint8_t* data, std::size_t len);

}  // namespace ca
