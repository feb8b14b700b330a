#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>

namespace headway::binary {

// Payloads are little-endian float32 regardless of host byte order.
inline void write_f32(std::ostream& out, std::span<const float> values)
{
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    } else {
        for (float v : values) {
            auto bits = std::bit_cast<std::uint32_t>(v);
            bits = __builtin_bswap32(bits);
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
}

inline bool read_f32(std::istream& in, std::span<float> values)
{
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) return false;
    if constexpr (std::endian::native != std::endian::little) {
        for (float& v : values) v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
    }
    return true;
}

inline void write_u64(std::ostream& out, std::uint64_t v)
{
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline bool read_u64(std::istream& in, std::uint64_t& v)
{
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

}  // namespace headway::binary
