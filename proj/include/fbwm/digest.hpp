#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <type_traits>

namespace fbwm {

// 64-bit FNV-1a. Used for config and checkpoint fingerprints, not security.
class Digest {
public:
    Digest& bytes(std::span<const std::uint8_t> data)
    {
        for (std::uint8_t b : data) {
            state_ ^= b;
            state_ *= kPrime;
        }
        return *this;
    }

    Digest& bytes(const void* data, std::size_t n)
    {
        return bytes({static_cast<const std::uint8_t*>(data), n});
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    Digest& add(T value)
    {
        std::uint8_t buf[sizeof(T)];
        std::memcpy(buf, &value, sizeof(T));
        return bytes(buf, sizeof(T));
    }

    Digest& add(std::string_view s)
    {
        add<std::uint64_t>(s.size());
        return bytes(s.data(), s.size());
    }

    std::uint64_t value() const { return state_; }

private:
    static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
    static constexpr std::uint64_t kPrime = 0x100000001b3ULL;
    std::uint64_t state_ = kOffset;
};

}  // namespace fbwm
