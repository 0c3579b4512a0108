#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace fbwm::io {

struct TruncatedInput : std::runtime_error {
    TruncatedInput() : std::runtime_error("unexpected end of file") {}
};

// Little-endian fixed-width encoding independent of host byte order.
template <typename T>
    requires std::is_arithmetic_v<T>
void put(std::ostream& out, T value)
{
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    U bits = std::bit_cast<U>(value);
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    }
    out.write(buf, sizeof(T));
}

template <typename T>
    requires std::is_arithmetic_v<T>
T get(std::istream& in)
{
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw TruncatedInput();
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    }
    return std::bit_cast<T>(bits);
}

template <typename T>
void put_array(std::ostream& out, const T* data, std::size_t n)
{
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
    } else {
        for (std::size_t i = 0; i < n; ++i) put(out, data[i]);
    }
}

template <typename T>
void get_array(std::istream& in, T* data, std::size_t n)
{
    if constexpr (std::endian::native == std::endian::little) {
        if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)))) {
            throw TruncatedInput();
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) data[i] = get<T>(in);
    }
}

inline void put_string(std::ostream& out, const std::string& s)
{
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::uint32_t max_len = 1u << 20)
{
    const auto n = get<std::uint32_t>(in);
    if (n > max_len) throw std::runtime_error("string field too long");
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) throw TruncatedInput();
    return s;
}

}  // namespace fbwm::io
