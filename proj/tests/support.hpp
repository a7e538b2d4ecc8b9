#pragma once

#include <cmath>
#include <random>

#include "vcdf/covariance.hpp"

namespace vcdf::test
{
//! Small generator wrapper for property tests.
class Gen
{
  public:
    explicit Gen(std::uint64_t seed) : engine_{seed} {}

    double uniform(double lo, double hi)
    {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    std::size_t index(std::size_t lo, std::size_t hi)
    {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
    }
    double normal() { return std::normal_distribution<double>()(engine_); }
    Location location(double extent = 10)
    {
        return {uniform(-extent, extent), uniform(-extent, extent)};
    }
    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

inline double combined_se(double a, double b)
{
    return std::sqrt(a * a + b * b);
}

}  // namespace vcdf::test
