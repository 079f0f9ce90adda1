#pragma once

#include "popgrad/geometry.hpp"
#include "popgrad/types.hpp"

namespace popgrad {

// E[relu(w.x) relu(v.x)] for x ~ N(0, I):
//   (1/2pi) |w| |v| (sin(theta) + (pi - theta) cos(theta))
double upsilon(const RealVector& w, const RealVector& v);

// Exact population square loss. Nonnegative; zero exactly at global minima.
double loss(const StudentParams& w, const TeacherConfig& teacher);
double loss(const GeometryView& view);

// Exact population gradient, row i = dL/dw_i:
//   (1/2)(sum_j w_j - v)
//   + (1/2pi) [ (sum_{j!=i} |w_j| sin(theta_ij) - |v| sin(theta_i)) w_i^
//               - sum_{j!=i} theta_ij w_j + theta_i v ]
GradientMatrix gradient(const StudentParams& w, const TeacherConfig& teacher);
GradientMatrix gradient(const GeometryView& view, const StudentParams& w,
                        const TeacherConfig& teacher);

inline double gradient_norm(const GradientMatrix& g) { return g.norm(); }

// Exact population Hessian in d x d blocks:
//   diag:     L_{i,i} = I/2 + sum_{j!=i} zeta(w_i, w_j) - zeta(w_i, v)
//   off-diag: L_{i,j} = (1/2pi) [ (pi - theta_ij) I
//                                 + nb(w_i,w_j) w_j^T + nb(w_j,w_i) w_i^T ]
// with zeta(w,u) = (sin(theta) |u| / (2pi |w|)) (I - w^ w^T + nb nb^T),
// nb(a,b) = normalized (a^ - cos(theta) b^).
//
// zeta and the paired nb outer products both vanish as theta -> 0 (and
// theta -> pi); below an angle of 1e-8 they are replaced by that limit,
// which sidesteps normalizing the vanishing rejection vector.
HessianMatrix hessian(const StudentParams& w, const TeacherConfig& teacher);

// |Hessian|_2 / n^2, the conditional-smoothness ratio (reported, never
// asserted: the bound's constant is not pinned down).
double hessian_spectral_ratio(const StudentParams& w, const TeacherConfig& teacher);

}  // namespace popgrad
