#pragma once

#include <cmath>
#include <cstdint>

namespace sdesym {

// Counter-based pseudo-random generation. Every draw is a pure function of
// the inputs, so parallel and serial consumers see identical streams.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
    return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

// Uniform in (0,1); never returns exactly 0.
inline double to_unit(std::uint64_t bits)
{
    return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Standard normal from a 4-component counter (seed, path, step, channel).
inline double normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                     std::uint64_t channel)
{
    std::uint64_t h = mix(mix(mix(seed, path), step), channel);
    double u1 = to_unit(h);
    double u2 = to_unit(splitmix64(h ^ 0xd1b54a32d192ed03ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Small sequential stream for point sampling.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc908ULL)) {}

    std::uint64_t next_bits()
    {
        state_ = splitmix64(state_ + 0x9e3779b97f4a7c15ULL);
        return state_;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * to_unit(next_bits()); }

private:
    std::uint64_t state_;
};

} // namespace rng
} // namespace sdesym
