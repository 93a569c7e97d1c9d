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

#include "ca/hash.hpp"

#include <openssl/evp.h>

#include <memory>

#include "ca/error.hpp"

namespace ca {
namespace {

constexpr char kHexChars[] = "0123456789abcdef";

int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace

std::string to_hex(const std::uint8_t* data, std::size_t len) {
  std::string out(len * 2, '0');
  for (std::size_t i = 0; i < len; ++i) {
    out[i * 2] = kHexChars[data[i] >> 4];
    out[i * 2 + 1] = kHexChars[data[i] & 0x0f];
  }
  return out;
}

std::array<std::uint8_t, 32> sha256(std::string_view bytes) {
  std::array<std::uint8_t, 32> out{};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size()) {
    throw Error(Errc::storage_io, "sha256 digest failed");
  }
  return out;
}

ContentHash::ContentHash()
    : hex_("e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855") {}

ContentHash ContentHash::of(std::string_view bytes) {
  auto digest = sha256(bytes);
  return ContentHash(to_hex(digest.data(), digest.size()));
}

std::optional<ContentHash> ContentHash::parse(std::string_view hex) {
  if (hex.size() != kHexLength) return std::nullopt;
  for (char c : hex) {
    if (nibble(c) < 0) return std::nullopt;
  }
  return ContentHash(std::string(hex));
}

ContentHash ContentHash::from_hex(std::string_view hex) {
  auto parsed = parse(hex);
  if (!parsed) {
    throw Error(Errc::invalid_argument,
                "not a 64-char lowercase hex digest: '" + std::string(hex) + "'");
  }
  return *std::move(parsed);
}

std::array<std::uint8_t, 32> ContentHash::bytes() const {
  std::array<std::uint8_t, 32> out{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex_[i * 2]) << 4 | nibble(hex_[i * 2 + 1]));
  }
  return out;
}

}  // namespace ca
