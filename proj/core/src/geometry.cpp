#include "popgrad/geometry.hpp"

#include <cmath>
#include <limits>

namespace popgrad {

double angle(const RealVector& u, const RealVector& w) {
    const double nu = u.norm();
    const double nw = w.norm();
    if (nu < 1e-300 || nw < 1e-300) throw ZeroVector{};
    const RealVector a = u / nu;
    const RealVector b = w / nw;
    return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

namespace {

// angle from precomputed unit rows; same formula as angle()
double unit_angle(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

}  // namespace

GeometryView geometry_view(const StudentParams& w, const TeacherConfig& teacher) {
    require_finite(w, "geometry_view");
    const int n = w.n();
    const int d = w.d();
    if (d != teacher.d()) throw BadParam("geometry_view: student and teacher dimension mismatch");

    GeometryView g;
    g.n = n;
    g.norm_v = teacher.norm_v;
    g.z_tolerance = 1e-12 * teacher.norm_v;

    g.norms.resize(n);
    for (int i = 0; i < n; ++i) {
        g.norms[i] = w.row(i).norm();
        if (g.norms[i] < 1e-300) throw DegenerateNeuron(i);
    }

    const Eigen::RowVectorXd vbar = (teacher.v / teacher.norm_v).transpose();
    RealMatrix unit = w.neurons;
    for (int i = 0; i < n; ++i) unit.row(i) /= g.norms[i];

    g.theta.resize(n);
    for (int i = 0; i < n; ++i) g.theta[i] = unit_angle(unit.row(i), vbar);

    g.theta_ij = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double t = unit_angle(unit.row(i), unit.row(j));
            g.theta_ij(i, j) = t;
            g.theta_ij(j, i) = t;
        }

    g.h = w.neurons * vbar.transpose();
    g.H = teacher.norm_v - g.h.sum();
    g.r = w.neurons.colwise().sum().transpose() - teacher.v;

    g.z = w.neurons - g.h * vbar;
    g.z_norms.resize(n);
    for (int i = 0; i < n; ++i) {
        g.z_norms[i] = g.z.row(i).norm();
        if (g.z_norms[i] > g.z_tolerance) g.q_plus.push_back(i);
    }

    g.kappa = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
    if (g.q_plus.size() >= 2) {
        double best = -1.0;
        int ties = 0;
        for (std::size_t a = 0; a < g.q_plus.size(); ++a)
            for (std::size_t b = a + 1; b < g.q_plus.size(); ++b) {
                const int i = g.q_plus[a];
                const int j = g.q_plus[b];
                const Eigen::RowVectorXd zi = g.z.row(i) / g.z_norms[i];
                const Eigen::RowVectorXd zj = g.z.row(j) / g.z_norms[j];
                const double k = unit_angle(zi, zj);
                g.kappa(i, j) = k;
                g.kappa(j, i) = k;
                if (k > best) {
                    best = k;
                    ties = 1;
                    g.kappa_argmax_i = i;
                    g.kappa_argmax_j = j;
                } else if (k == best) {
                    ++ties;
                }
            }
        g.kappa_max = best;
        g.kappa_max_unique = (ties == 1);
    }

    g.Z = potential_Z(g);

    g.V = 0.0;
    for (int i = 0; i < n; ++i) {
        const double s = std::sin(0.5 * g.theta[i]);
        g.V += s * s;
    }

    g.min_wnorm = g.norms.minCoeff();
    g.max_wnorm = g.norms.maxCoeff();
    g.max_theta = g.theta.maxCoeff();
    const double hmin = g.h.minCoeff();
    if (hmin > 0.0) g.balance_ratio = g.h.maxCoeff() / hmin;

    return g;
}

double potential_Z(const GeometryView& view) {
    double z = 0.0;
    for (int i = 0; i < view.n; ++i)
        for (int j = i + 1; j < view.n; ++j)
            z += (view.z.row(i) - view.z.row(j)).norm();
    return z;
}

}  // namespace popgrad
