#pragma once

// Little-endian primitive encoding shared by the volume and checkpoint formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace swreg::binio {

template <typename U>
void put_uint(std::ostream& os, U v) {
    unsigned char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

inline void put_f64(std::ostream& os, double v) { put_uint<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_f64s(std::ostream& os, std::span<const double> v) {
    std::vector<unsigned char> buf(v.size() * 8);
    for (std::size_t k = 0; k < v.size(); ++k) {
        const auto bits = std::bit_cast<std::uint64_t>(v[k]);
        for (std::size_t i = 0; i < 8; ++i) buf[k * 8 + i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

/// False on short read.
template <typename U>
bool get_uint(std::istream& is, U& out) {
    unsigned char b[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) return false;
    out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) out |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
    return true;
}

inline bool get_f64(std::istream& is, double& out) {
    std::uint64_t bits = 0;
    if (!get_uint(is, bits)) return false;
    out = std::bit_cast<double>(bits);
    return true;
}

inline bool get_f64s(std::istream& is, std::span<double> out) {
    std::vector<unsigned char> buf(out.size() * 8);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) return false;
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[k * 8 + i]) << (8 * i);
        out[k] = std::bit_cast<double>(bits);
    }
    return true;
}

}  // namespace swreg::binio
