#pragma once

#include <cstdint>
#include <cmath>

namespace popgrad {

// Counter-based pseudo-random stream.
//
// Output k of stream (seed, stream_id) is splitmix64(key + (k+1)*GALOIS)
// where key mixes seed and stream_id through the same finalizer. Every
// (seed, stream_id, k) triple maps to one fixed 64-bit word, so disjoint
// sample-index ranges can be generated on any number of threads with
// bit-identical results.
//
// Gaussian variates use the Marsaglia polar method on top of the stream:
// draw u, v uniform in (-1,1) until s = u^2+v^2 lands in (0,1), then
// return u*sqrt(-2 ln(s)/s) and v*sqrt(-2 ln(s)/s). Rejection consumes a
// variable number of words, which is why each logical sample owns its own
// stream rather than its own counter offset.
struct CounterRng {
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key;
    std::uint64_t counter = 0;

    CounterRng(std::uint64_t seed, std::uint64_t stream_id)
        : key(mix64(seed ^ mix64(stream_id * kGamma + 0x632BE59BD9B4E019ull))) {}

    std::uint64_t next_u64() { return mix64(key + (++counter) * kGamma); }

    // uniform in [0, 1), 53-bit mantissa
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // pair of independent standard normals (Marsaglia polar)
    void next_normal_pair(double& a, double& b) {
        while (true) {
            const double u = 2.0 * next_unit() - 1.0;
            const double v = 2.0 * next_unit() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                const double m = std::sqrt(-2.0 * std::log(s) / s);
                a = u * m;
                b = v * m;
                return;
            }
        }
    }

    // fills out[0..count) with standard normals
    void fill_normal(double* out, int count) {
        int i = 0;
        double a, b;
        while (i + 1 < count) {
            next_normal_pair(a, b);
            out[i++] = a;
            out[i++] = b;
        }
        if (i < count) {
            next_normal_pair(a, b);
            out[i] = a;
        }
    }
};

}  // namespace popgrad
