#pragma once

// Deterministic split-stream random numbers.  Streams are keyed by
// (seed, replication, purpose) through splitmix64 mixing, so replications can
// run in any order or in parallel without changing a single draw.  Normal and
// gamma variates go through the library's own inverse CDFs, which keeps
// output byte-identical across platforms and standard libraries.

#include <cstdint>

#include "numerics/special.hpp"

namespace fab {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // burn-in decorrelates nearby keys
        detail::splitmix64(state_);
        detail::splitmix64(state_);
    }

    static Rng stream(std::uint64_t seed, std::uint64_t replication, std::uint64_t purpose = 0) {
        std::uint64_t s = seed;
        detail::splitmix64(s);
        s ^= 0x632be59bd9b4e019ULL * (replication + 1);
        detail::splitmix64(s);
        s ^= 0x9e3779b97f4a7c15ULL * (purpose + 1);
        return Rng(s);
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    // uniform in the open interval (0,1)
    double uniform() {
        double u = (next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    double normal() { return num::norm_quantile(uniform()); }
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double chi2(double dof) { return num::chi2_quantile(uniform(), dof); }
    double gamma(double shape, double rate) { return num::gamma_quantile(uniform(), shape, rate); }

  private:
    std::uint64_t state_;
};

}  // namespace fab
