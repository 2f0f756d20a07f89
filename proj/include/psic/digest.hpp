// SPDX-License-Identifier: Apache-2.0
//
// FNV-1a 64-bit digests for artifact integrity checks and frozen-parameter
// assertions. Not cryptographic; used to detect accidental divergence.

#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace psic {

class Digest {
  public:
    void update(const void* bytes, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }

    void update(const std::string& s) { update(s.data(), s.size()); }

    template <typename T>
    void update_pod(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        update(&v, sizeof(T));
    }

    void update(const std::vector<double>& v) { update(v.data(), v.size() * sizeof(double)); }

    std::uint64_t value() const { return h_; }

    std::string hex() const {
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

inline std::uint64_t digest_bytes(const void* bytes, std::size_t n) {
    Digest d;
    d.update(bytes, n);
    return d.value();
}

inline std::uint64_t digest_string(const std::string& s) { return digest_bytes(s.data(), s.size()); }

}  // namespace psic
