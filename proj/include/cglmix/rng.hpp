#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace cglmix {

/// Philox4x32-10 block function (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Identity of one random stream: the experiment seed selects the key and the
/// stream id is a fixed counter word. Draws for a given (seed, stream, step,
/// block) never depend on which thread computes them.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint32_t stream = 0;
};

// Channels let one trajectory index own several mutually independent streams.
inline constexpr std::uint32_t kStreamChannels = 8;

inline StreamKey stream_for(std::uint64_t seed, std::uint64_t path, std::uint32_t channel = 0) {
    return {seed, static_cast<std::uint32_t>(path * kStreamChannels + channel)};
}

/// Fills `out` with independent standard normals for (key, step).
void standard_normals(const StreamKey& key, std::uint64_t step, std::span<double> out) noexcept;

/// Uniform on (0, 1) from 64 random bits.
double uniform_open(std::uint32_t hi, std::uint32_t lo) noexcept;

}  // namespace cglmix
