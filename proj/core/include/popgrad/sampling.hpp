#pragma once

#include "popgrad/types.hpp"

#include <cstdint>

namespace popgrad {

// Monte Carlo estimate with its standard error (sample stddev / sqrt(N)).
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct McGradient {
    RealMatrix mean;       // n x d
    RealMatrix std_error;  // n x d, per entry
    std::uint64_t n_samples = 0;
    std::uint64_t seed = 0;
};

// R(x) = sum_j relu(w_j . x) - relu(v . x)
double residual_pointwise(const StudentParams& w, const TeacherConfig& teacher,
                          const RealVector& x);

// Unbiased estimate of L = E[R(x)^2 / 2]. Sample k draws its Gaussians from
// counter stream (seed, k); block statistics merge pairwise in block order,
// so the result is bit-identical for any thread count.
McEstimate mc_loss(const StudentParams& w, const TeacherConfig& teacher,
                   std::uint64_t n_samples = 1'000'000, std::uint64_t seed = 0,
                   int threads = -1);

// Unbiased estimate of the gradient rows E[R(x) 1{w_i.x >= 0} x].
McGradient mc_gradient(const StudentParams& w, const TeacherConfig& teacher,
                       std::uint64_t n_samples = 1'000'000, std::uint64_t seed = 0,
                       int threads = -1);

}  // namespace popgrad
