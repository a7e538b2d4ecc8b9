#pragma once

#include <cstdint>

namespace vcdf
{
//---------------------------------------------------------------------------//
/*!
 * Stateless counter-based random numbers.
 *
 * Every draw is a pure function of (seed, stream, counter), so work that is
 * split across threads in any order reproduces the same values as a serial
 * run.
 */
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

//! Combine a master seed with two integer tags into an independent seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::uint64_t a,
                                    std::uint64_t b = 0) noexcept
{
    return splitmix64(splitmix64(seed ^ splitmix64(a + 0x632be59bd9b4e019ULL))
                      ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
}

class CounterRng
{
  public:
    explicit constexpr CounterRng(std::uint64_t seed) noexcept : seed_{seed}
    {
    }

    constexpr std::uint64_t bits(std::uint64_t stream,
                                 std::uint64_t counter) const noexcept
    {
        return splitmix64(splitmix64(seed_ ^ splitmix64(stream)) + counter);
    }

    //! Uniform on the open interval (0, 1).
    constexpr double uniform(std::uint64_t stream,
                             std::uint64_t counter) const noexcept
    {
        return (static_cast<double>(bits(stream, counter) >> 11) + 0.5)
               * 0x1.0p-53;
    }

    constexpr std::uint64_t seed() const noexcept { return seed_; }

  private:
    std::uint64_t seed_;
};

}  // namespace vcdf
