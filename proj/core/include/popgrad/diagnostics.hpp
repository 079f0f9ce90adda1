#pragma once

#include "popgrad/dynamics.hpp"
#include "popgrad/fit.hpp"
#include "popgrad/geometry.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace popgrad {

// Practical phase thresholds. The analysis-scale epsilons are far too
// small to trigger at experiment scale, so phase detection runs on these
// configurable surrogates instead.
struct PhaseThresholds {
    double eps1 = 0.02;           // phase-1 angle target; phase 1 ends at max theta <= 4*eps1
    double eps2 = 0.05;           // phase-2 angle cap; phase 2 ends at H <= eps2*|v|
    double h_floor_factor = 0.5;  // phase-2 bound h_i >= h_floor_factor * s1
    double h_cap_factor = 2.0;    // phase-2 bound h_i <= h_cap_factor * |v| / n
    double balance_factor = 2.5;  // h_i <= balance_factor * h_j
};

enum class Verdict { pass, fail, report_only };

std::string to_string(Verdict v);

struct CheckResult {
    std::string name;
    std::string anchor;  // the inequality or identity being checked
    nlohmann::json values;
    std::optional<double> threshold;
    Verdict verdict = Verdict::report_only;
};

struct DiagnosticsReport {
    std::vector<CheckResult> results;

    bool any_fail() const;
    nlohmann::json to_json() const;
};

// Trajectory indices of the detected phase boundaries. t1 is the first
// record with max theta_i <= 4*eps1; t2 the first record at or after t1
// with H <= eps2*|v|. Either may be absent.
struct PhaseMarkers {
    std::optional<std::size_t> t1_index;
    std::optional<std::size_t> t2_index;
};

PhaseMarkers phase_detect(const Trajectory& traj, const PhaseThresholds& thresholds);

// --- pointwise operations ---------------------------------------------------

// Initialization conditions: s1 <= |w_i(0)| <= s2 with s1 = sigma sqrt(d)/2,
// s2 = 2 sigma sqrt(d); pi/3 <= theta_i(0) <= 2pi/3; and non-degeneracy
// (all z_i nonzero and kappa_max > 0) when n >= 2.
CheckResult check_init(const StudentParams& w0, const InitSpec& spec,
                       const TeacherConfig& teacher);

// |w_i|^2 theta_i^3 <= 30 pi L, unconditionally, slack factor 1 + 1e-9
CheckResult check_theta_bound(const StudentParams& w, const TeacherConfig& teacher);

// max h_i <= factor * min h_j; report_only unless all h_i > 0
CheckResult check_balance(const GeometryView& view, double factor);

// ratio |r| / (n sqrt(L)); asserts |r| <= 2.1 sqrt(L) when all theta_i <= 0.05
CheckResult check_residual_bound(const GeometryView& view, double loss_value);

// sum_i <grad_i, w_i - w_i*> with w_i* = (h_i / sum_j h_j) v
double descent_projection(const StudentParams& w, const TeacherConfig& teacher);

// --- trajectory checkers -----------------------------------------------------

struct CheckContext {
    const Trajectory& traj;
    PhaseThresholds thresholds{};
    std::optional<InitSpec> init;  // enables init_conditions / theta_envelope
};

// Registered checker names, in canonical execution order.
const std::vector<std::string>& checker_names();
bool is_checker_name(const std::string& name);

// Runs the named checkers (all of them if names is empty) in canonical
// order and returns the merged report.
DiagnosticsReport run_checkers(const CheckContext& ctx, const std::vector<std::string>& names);

// Ratio series c(t) = |grad L| n^(2/3) |v|^(1/3) / L^(2/3) over records
// where the regularity window |v|/4n <= |w_i| <= 4|v|/n holds and
// 0 < L <= loss_cap. Used by both the checker and the acceptance trend test.
std::vector<std::pair<double, double>> grad_lower_bound_series(const Trajectory& traj,
                                                               double loss_cap_factor = 0.01);

}  // namespace popgrad
