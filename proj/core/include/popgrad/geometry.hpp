#pragma once

#include "popgrad/types.hpp"

#include <optional>
#include <vector>

namespace popgrad {

// Angle between two nonzero vectors, in [0, pi].
//
// Computed as 2*atan2(|u^ - w^|, |u^ + w^|) on the normalized inputs
// rather than acos of the clamped inner product: near theta = 0 or pi the
// acos route loses half the significant digits, and late-trajectory
// states live exactly there.
double angle(const RealVector& u, const RealVector& w);

// All derived geometric quantities of one parameter point. Every field is
// computed once here; diagnostics must consume this snapshot instead of
// recomputing, so that all checkers see one consistent state.
struct GeometryView {
    int n = 0;
    double norm_v = 0.0;
    double z_tolerance = 0.0;          // membership threshold for q_plus: 1e-12 * |v|

    Eigen::VectorXd norms;             // |w_i|
    Eigen::VectorXd theta;             // angle(w_i, v), in [0, pi]
    Eigen::MatrixXd theta_ij;          // symmetric, zero diagonal
    Eigen::VectorXd h;                 // <w_i, v^>
    double H = 0.0;                    // |v| - sum h_i
    RealVector r;                      // sum w_i - v
    RealMatrix z;                      // n x d, row i: w_i - h_i v^
    Eigen::VectorXd z_norms;
    std::vector<int> q_plus;           // { i : |z_i| > z_tolerance }
    Eigen::MatrixXd kappa;             // angle(z_i, z_j) for i,j in q_plus, NaN elsewhere
    std::optional<double> kappa_max;   // defined only when |q_plus| >= 2
    int kappa_argmax_i = -1, kappa_argmax_j = -1;
    bool kappa_max_unique = false;     // attained by exactly one unordered pair
    double Z = 0.0;                    // sum_{i<j} |z_i - z_j|
    double V = 0.0;                    // sum_i sin^2(theta_i / 2)

    double min_wnorm = 0.0, max_wnorm = 0.0, max_theta = 0.0;
    std::optional<double> balance_ratio;  // max h / min h, defined when min h > 0
};

GeometryView geometry_view(const StudentParams& w, const TeacherConfig& teacher);

// sum of pairwise distances among the z_i of an existing view
double potential_Z(const GeometryView& view);

}  // namespace popgrad
