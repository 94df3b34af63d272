#pragma once

#include <cstdint>
#include <string>

namespace nowcast {

/// Streaming FNV-1a (64-bit). Stable across platforms; used for config
/// hashes, data-log digests, and output digests in the audit trail.
class Digest {
 public:
  Digest& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  Digest& update_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= static_cast<unsigned char>(v >> (8 * i));
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  [[nodiscard]] std::uint64_t value() const { return h_; }

  [[nodiscard]] std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = h_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = digits[v & 0xf];
      v >>= 4;
    }
    return out;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string digest_hex(std::string_view bytes) { return Digest{}.update(bytes).hex(); }

}  // namespace nowcast
