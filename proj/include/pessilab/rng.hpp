#ifndef PESSILAB_RNG_HPP_
#define PESSILAB_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

namespace pessilab {

// Deterministic random stream. Wraps a 64-bit xorshift-multiply generator and
// provides the handful of variates used across the project. The standard
// <random> distributions are implementation-defined, which would break the
// byte-identical-output contract, so the mappings are spelled out here.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(splitmix(seed + 0x9E3779B97F4A7C15ULL)) {
        // avoid the all-zero state
        if (state_ == 0) state_ = 0x106689D45497FDB5ULL;
    }

    std::uint64_t next_u64() {
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        // multiply-shift; bias is negligible for the buffer/arm sizes used here
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

    // standard normal via Box-Muller (no caching, one fresh pair member per call
    // costs an extra variate but keeps the stream position predictable)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Dirichlet(1,...,1) row via normalized exponentials
    std::vector<double> dirichlet_uniform(std::size_t n) {
        std::vector<double> row(n);
        double total = 0.0;
        for (auto& x : row) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            x = -std::log(u);
            total += x;
        }
        for (auto& x : row) x /= total;
        return row;
    }

    // independent substream; stream_id picks the purpose (env, init, eval, ...)
    Rng derive(std::uint64_t stream_id) const {
        return Rng(splitmix(state_ ^ splitmix(stream_id * 0xBF58476D1CE4E5B9ULL)));
    }

  private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t state_;
};

}  // namespace pessilab

#endif  // PESSILAB_RNG_HPP_
