#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <fmt/format.h>

namespace headway {

/// 64-bit FNV-1a, used for content digests of configs, scalers and payloads.
class Fnv1a {
public:
    void update(std::span<const std::byte> bytes)
    {
        for (auto b : bytes) {
            state_ ^= static_cast<std::uint64_t>(b);
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view text) { update(std::as_bytes(std::span(text.data(), text.size()))); }
    std::uint64_t value() const { return state_; }
    std::string hex() const { return fmt::format("{:016x}", state_); }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace headway
