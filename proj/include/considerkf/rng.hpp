// Counter-based random streams.
//
// Every stream is keyed by (seed, stream, channel), so a Monte Carlo run can
// carve independent substreams out of one master seed without any coordination
// between runs. Output is a pure function of the key, independent of platform
// and call order.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "considerkf/linalg.hpp"

namespace ckf {

/// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t channel)
        : state_(derive_key(seed, stream, channel)) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix64(state_);
    }

    /// Uniform draw in (0, 1].
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    Vector normal_vector(int dim) {
        Vector v(dim);
        for (int i = 0; i < dim; ++i) {
            v(i) = normal();
        }
        return v;
    }

  private:
    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t channel) {
        std::uint64_t k = mix64(seed + 0x9E3779B97F4A7C15ull);
        k = mix64(k ^ (stream + 0xD1B54A32D192ED03ull));
        k = mix64(k ^ (channel + 0x8CB92BA72F3D8DD7ull));
        return k;
    }

    std::uint64_t state_;
};

/// Channel tags separating the noise sources of one simulation run.
namespace channel {
inline constexpr std::uint64_t parameter = 1;
inline constexpr std::uint64_t init_state = 2;
inline constexpr std::uint64_t process = 3;
inline constexpr std::uint64_t measurement = 4;
inline constexpr std::uint64_t fixture = 0xF1C;
} // namespace channel

} // namespace ckf
