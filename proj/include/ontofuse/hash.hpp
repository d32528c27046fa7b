#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ontofuse {

// FNV-1a, 64 bit. Used for content addressing (ontology overlays, vocab
// fingerprints, run-directory names); not cryptographic.
inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a_bytes(s.data(), s.size(), h);
}

inline std::uint64_t fnv1a(const std::vector<int>& ids) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (int id : ids) {
    const auto v = static_cast<std::uint32_t>(id);
    h = fnv1a_bytes(&v, sizeof(v), h);
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

// Inverse of to_hex; returns 0 alongside ok=false on malformed input.
inline std::uint64_t from_hex(std::string_view s, bool* ok = nullptr) {
  std::uint64_t v = 0;
  bool good = s.size() == 16;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') {
      v |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      good = false;
    }
  }
  if (ok) *ok = good;
  return good ? v : 0;
}

}  // namespace ontofuse
