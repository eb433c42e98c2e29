#include "cglmix/rng.hpp"

#include <cmath>
#include <numbers>

namespace cglmix {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double uniform_open(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    // 52 random bits on the midpoints of a 2^-52 lattice: both endpoints excluded.
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

void standard_normals(const StreamKey& key, std::uint64_t step, std::span<double> out) noexcept {
    const PhiloxKey k{static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32)};
    const auto step_lo = static_cast<std::uint32_t>(step);
    const auto step_hi = static_cast<std::uint32_t>(step >> 32);
    std::size_t i = 0;
    for (std::uint32_t block = 0; i < out.size(); ++block) {
        const auto r = philox4x32_10({step_lo, step_hi, block, key.stream}, k);
        const double u1 = uniform_open(r[0], r[1]);
        const double u2 = uniform_open(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[i++] = radius * std::cos(angle);
        if (i < out.size()) out[i++] = radius * std::sin(angle);
    }
}

}  // namespace cglmix
