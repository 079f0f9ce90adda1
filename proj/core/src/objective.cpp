#include "popgrad/objective.hpp"

#include "popgrad/util.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <vector>

namespace popgrad {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kParallelAngleCutoff = 1e-8;

}  // namespace

double upsilon(const RealVector& w, const RealVector& v) {
    const double nw = w.norm();
    const double nv = v.norm();
    if (nw < 1e-300 || nv < 1e-300) throw ZeroVector{};
    const double t = angle(w, v);
    // sin t + (pi - t) cos t cancels at t -> pi; rewrite through
    // sin_minus_x_cos of the complementary angle
    const double s = std::numbers::pi - t;
    const double val = (s < 0.5) ? sin_minus_x_cos(s)
                                 : std::sin(t) + s * std::cos(t);
    return (nw * nv / kTwoPi) * std::max(val, 0.0);
}

double loss(const GeometryView& g) {
    const int n = g.n;
    std::vector<double> cross;
    cross.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            cross.push_back(sin_minus_x_cos(g.theta_ij(i, j)) * g.norms[i] * g.norms[j]);
    std::vector<double> direct(n);
    for (int i = 0; i < n; ++i)
        direct[i] = sin_minus_x_cos(g.theta[i]) * g.norms[i] * g.norm_v;

    const double l = 0.25 * g.r.squaredNorm() +
                     (pairwise_sum(cross) - pairwise_sum(direct)) / kTwoPi;
    // the closed form is nonnegative; tiny negatives are rounding noise
    // from the cancellation of the two 1/2pi sums near a global minimum
    if (l < 0.0) {
        assert(l > -1e-10 * (1.0 + g.norm_v * g.norm_v));
        return 0.0;
    }
    return l;
}

double loss(const StudentParams& w, const TeacherConfig& teacher) {
    return loss(geometry_view(w, teacher));
}

GradientMatrix gradient(const GeometryView& g, const StudentParams& w,
                        const TeacherConfig& teacher) {
    const int n = g.n;
    // S_i = sum_{j != i} |w_j| sin(theta_ij) - |v| sin(theta_i); the diagonal
    // contributes sin(0) = 0 so the full j-sum is used directly
    Eigen::VectorXd sin_tij(n);
    Eigen::VectorXd s(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) acc += g.norms[j] * std::sin(g.theta_ij(i, j));
        s[i] = acc - g.norm_v * std::sin(g.theta[i]);
    }

    GradientMatrix grad(n, w.d());
    const Eigen::RowVectorXd r_t = g.r.transpose();
    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd acc = 0.5 * r_t;
        acc += (s[i] / (kTwoPi * g.norms[i])) * w.row(i);
        for (int j = 0; j < n; ++j)
            if (j != i) acc -= (g.theta_ij(i, j) / kTwoPi) * w.row(j);
        acc += (g.theta[i] / kTwoPi) * teacher.v.transpose();
        grad.row(i) = acc;
    }
    return grad;
}

GradientMatrix gradient(const StudentParams& w, const TeacherConfig& teacher) {
    return gradient(geometry_view(w, teacher), w, teacher);
}

namespace {

// zeta(w, u) = (sin(theta) |u| / (2pi |w|)) (I - w^ w^T + nb nb^T)
Eigen::MatrixXd zeta(const Eigen::VectorXd& w_unit, double w_norm,
                     const Eigen::VectorXd& u_unit, double u_norm, double theta) {
    const int d = static_cast<int>(w_unit.size());
    if (theta < kParallelAngleCutoff || theta > std::numbers::pi - kParallelAngleCutoff)
        return Eigen::MatrixXd::Zero(d, d);
    const double st = std::sin(theta);
    Eigen::VectorXd nb = u_unit - std::cos(theta) * w_unit;
    nb /= nb.norm();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
    m.noalias() -= w_unit * w_unit.transpose();
    m.noalias() += nb * nb.transpose();
    return (st * u_norm / (kTwoPi * w_norm)) * m;
}

}  // namespace

HessianMatrix hessian(const StudentParams& w, const TeacherConfig& teacher) {
    const GeometryView g = geometry_view(w, teacher);
    const int n = g.n;
    const int d = w.d();
    const Eigen::VectorXd vbar = teacher.v / teacher.norm_v;

    std::vector<Eigen::VectorXd> unit(n);
    for (int i = 0; i < n; ++i) unit[i] = w.row(i).transpose() / g.norms[i];

    HessianMatrix hess = HessianMatrix::Zero(n * d, n * d);
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd block = 0.5 * Eigen::MatrixXd::Identity(d, d);
        for (int j = 0; j < n; ++j)
            if (j != i)
                block += zeta(unit[i], g.norms[i], unit[j], g.norms[j], g.theta_ij(i, j));
        block -= zeta(unit[i], g.norms[i], vbar, g.norm_v, g.theta[i]);
        hess.block(i * d, i * d, d, d) = block;
    }

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double t = g.theta_ij(i, j);
            Eigen::MatrixXd block =
                (std::numbers::pi - t) * Eigen::MatrixXd::Identity(d, d);
            // the paired rejection outer products cancel to O(theta) jointly;
            // below the cutoff their combined limit is zero
            if (t >= kParallelAngleCutoff && t <= std::numbers::pi - kParallelAngleCutoff) {
                Eigen::VectorXd nij = unit[i] - std::cos(t) * unit[j];
                Eigen::VectorXd nji = unit[j] - std::cos(t) * unit[i];
                nij /= nij.norm();
                nji /= nji.norm();
                block.noalias() += nij * unit[j].transpose();
                block.noalias() += nji * unit[i].transpose();
            }
            block /= kTwoPi;
            hess.block(i * d, j * d, d, d) = block;
            hess.block(j * d, i * d, d, d) = block.transpose();
        }

    return hess;
}

double hessian_spectral_ratio(const StudentParams& w, const TeacherConfig& teacher) {
    const HessianMatrix h = hessian(w, teacher);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()),
                                                      Eigen::EigenvaluesOnly);
    const double spectral =
        std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
    return spectral / (static_cast<double>(w.n()) * w.n());
}

}  // namespace popgrad
