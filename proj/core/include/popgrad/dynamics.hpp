#pragma once

#include "popgrad/geometry.hpp"
#include "popgrad/types.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace popgrad {

struct InitSpec {
    int n = 1;
    int d = 20;
    double sigma = 0.1;  // w_i(0) ~ N(0, sigma^2 I)
    std::uint64_t seed = 0;
};

enum class RunMode { discrete_gd, gradient_flow };

struct RunConfig {
    RunMode mode = RunMode::discrete_gd;
    double eta = 0.05;         // step size (discrete mode)
    double t_end = 1000.0;     // step count (discrete) or time horizon (flow)
    double record_every = 1.0; // steps (discrete) or time interval (flow)
    double stop_loss = 0.0;    // stop once recorded loss falls to this level
    double ode_rel_tol = 1e-8;
    double ode_abs_tol = 1e-10;
    // flow mode: also store dense-output snapshots at t +- probe_dt per
    // record, for finite-difference checks of time derivatives
    bool derivative_probes = true;
    double probe_dt = 1e-3;
};

// Snapshots at the recorded times plus the per-record scalars every
// checker consumes. kappa_max and balance_ratio may be undefined.
struct Trajectory {
    RunMode mode = RunMode::discrete_gd;
    double eta = 0.0;
    TeacherConfig teacher;

    std::vector<double> times;
    std::vector<StudentParams> snapshots;
    std::vector<double> loss;
    std::vector<double> grad_norm;
    std::vector<double> H;
    std::vector<double> Z;
    std::vector<double> V;
    std::vector<std::optional<double>> kappa_max;
    std::vector<double> min_wnorm;
    std::vector<double> max_wnorm;
    std::vector<double> max_theta;
    std::vector<std::optional<double>> balance_ratio;

    // flow probes: snapshot pairs at t - probe_dt and t + probe_dt
    double probe_dt = 0.0;
    std::vector<std::optional<std::pair<StudentParams, StudentParams>>> probes;

    std::size_t size() const { return times.size(); }
};

// i.i.d. N(0, sigma^2 I_d) neurons; deterministic in (seed, n, d).
StudentParams init_random(const InitSpec& spec);

// One step w <- w - eta * grad L(w).
StudentParams gd_step(const StudentParams& w, const TeacherConfig& teacher, double eta);

Trajectory run_gd(const StudentParams& w0, const TeacherConfig& teacher,
                  const RunConfig& config);

// Integrates dw/dt = -grad L(w) with adaptive Dormand-Prince 4(5);
// records on the requested uniform time grid via cubic Hermite dense
// output. Loss is non-increasing along records.
Trajectory run_flow(const StudentParams& w0, const TeacherConfig& teacher,
                    const RunConfig& config);

// Toy configurations: a reflection-symmetric pair about v, all neurons
// positive multiples of v, or n identical copies of one vector.
struct SymmetricPair {
    double lambda1;
    double lambda2;  // may be zero (pair collapses onto v)
};
struct Parallel {
    std::vector<double> lambdas;  // all positive
};
struct EqualNeurons {
    RealVector w;
    int n;
};
using ToyCase = std::variant<SymmetricPair, Parallel, EqualNeurons>;

StudentParams make_toycase(const ToyCase& kind, const TeacherConfig& teacher);

// Inverse of the symmetric-pair construction: lambda1 = h_1/|v|, lambda2
// the signed coefficient along the canonical perpendicular direction.
// Throws NotSymmetric unless the pair is reflection-symmetric about v
// (within 1e-9 relative to |v|).
std::pair<double, double> extract_lambda(const StudentParams& w, const TeacherConfig& teacher);

// Closed decomposition of grad_1 for the symmetric pair, as coefficients
// (a, b) with grad_1 = a v + b v_perp (and grad_2 = a v - b v_perp):
//   a = (lambda1 - 1/2) (1 - theta/pi + sin(2 theta)/(2 pi))
//   b = (lambda2 / 2pi) (2 theta + ((lambda1 - 1/2)/lambda1) sin(2 theta))
// with theta = atan(lambda2 / lambda1).
std::pair<double, double> symmetric_pair_gradient_coeffs(double lambda1, double lambda2);

}  // namespace popgrad
