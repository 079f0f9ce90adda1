#include "popgrad/dynamics.hpp"

#include "popgrad/objective.hpp"
#include "popgrad/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace popgrad {

StudentParams init_random(const InitSpec& spec) {
    if (spec.n < 1 || spec.d < 1) throw BadParam("init_random: n and d must be positive");
    if (!(spec.sigma > 0.0)) throw BadParam("init_random: sigma must be positive");
    RealMatrix m(spec.n, spec.d);
    std::vector<double> row(spec.d);
    for (int i = 0; i < spec.n; ++i) {
        CounterRng rng(spec.seed, static_cast<std::uint64_t>(i));
        rng.fill_normal(row.data(), spec.d);
        for (int j = 0; j < spec.d; ++j) m(i, j) = spec.sigma * row[j];
    }
    return StudentParams{std::move(m)};
}

namespace {

void check_not_degenerate_update(const StudentParams& w) {
    for (int i = 0; i < w.n(); ++i)
        if (w.row(i).norm() < 1e-300) throw DegenerateUpdate(i);
}

struct RecordScalars {
    void append(Trajectory& traj, double t, const StudentParams& w, const GeometryView& g,
                double l, double gn) {
        traj.times.push_back(t);
        traj.snapshots.push_back(w);
        traj.loss.push_back(l);
        traj.grad_norm.push_back(gn);
        traj.H.push_back(g.H);
        traj.Z.push_back(g.Z);
        traj.V.push_back(g.V);
        traj.kappa_max.push_back(g.kappa_max);
        traj.min_wnorm.push_back(g.min_wnorm);
        traj.max_wnorm.push_back(g.max_wnorm);
        traj.max_theta.push_back(g.max_theta);
        traj.balance_ratio.push_back(g.balance_ratio);
    }
};

}  // namespace

StudentParams gd_step(const StudentParams& w, const TeacherConfig& teacher, double eta) {
    if (!(eta > 0.0)) throw BadParam("gd_step: eta must be positive");
    StudentParams next{w.neurons - eta * gradient(w, teacher)};
    check_not_degenerate_update(next);
    return next;
}

Trajectory run_gd(const StudentParams& w0, const TeacherConfig& teacher,
                  const RunConfig& config) {
    if (config.mode != RunMode::discrete_gd)
        throw BadParam("run_gd: config.mode must be discrete_gd");
    if (!(config.eta > 0.0)) throw BadParam("run_gd: eta must be positive");
    if (config.t_end < 0.0) throw BadParam("run_gd: t_end must be >= 0");
    const long long t_end = static_cast<long long>(config.t_end);
    const long long every = std::max(1LL, static_cast<long long>(config.record_every));

    Trajectory traj;
    traj.mode = RunMode::discrete_gd;
    traj.eta = config.eta;
    traj.teacher = teacher;
    RecordScalars rec;

    StudentParams w = w0;
    GeometryView g = geometry_view(w, teacher);
    GradientMatrix grad = gradient(g, w, teacher);
    double l = loss(g);
    if (!std::isfinite(l)) throw NonFinite("run_gd: non-finite loss at start");
    rec.append(traj, 0.0, w, g, l, gradient_norm(grad));
    if (config.stop_loss > 0.0 && l <= config.stop_loss) return traj;

    for (long long t = 1; t <= t_end; ++t) {
        w = StudentParams{w.neurons - config.eta * grad};
        check_not_degenerate_update(w);
        g = geometry_view(w, teacher);
        grad = gradient(g, w, teacher);
        if (t % every == 0 || t == t_end) {
            l = loss(g);
            if (!std::isfinite(l))
                throw NonFinite("run_gd: loss diverged at step " + std::to_string(t));
            rec.append(traj, static_cast<double>(t), w, g, l, gradient_norm(grad));
            if (config.stop_loss > 0.0 && l <= config.stop_loss) break;
        }
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Gradient flow: embedded Dormand-Prince 4(5) with PI-free step control and
// cubic Hermite dense output (state and derivative at both step ends).
// ---------------------------------------------------------------------------

namespace {

struct Dp45 {
    // Butcher tableau
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // 4th-order weights for the error estimate
    static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                            e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
};

using Flat = Eigen::VectorXd;

struct FlowRhs {
    const TeacherConfig& teacher;
    int n, d;

    StudentParams unflatten(const Flat& y) const {
        RealMatrix m(n, d);
        for (int i = 0; i < n; ++i) m.row(i) = y.segment(i * d, d).transpose();
        return StudentParams{std::move(m)};
    }

    Flat operator()(const Flat& y) const {
        const StudentParams w = unflatten(y);
        const GradientMatrix g = gradient(w, teacher);
        Flat out(n * d);
        for (int i = 0; i < n; ++i) out.segment(i * d, d) = -g.row(i).transpose();
        return out;
    }
};

// cubic Hermite interpolation on [t0, t0+h]
Flat hermite(const Flat& y0, const Flat& f0, const Flat& y1, const Flat& f1, double h,
             double s) {
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0 +
           (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * f1;
}

}  // namespace

Trajectory run_flow(const StudentParams& w0, const TeacherConfig& teacher,
                    const RunConfig& config) {
    if (config.mode != RunMode::gradient_flow)
        throw BadParam("run_flow: config.mode must be gradient_flow");
    if (!(config.t_end >= 0.0)) throw BadParam("run_flow: t_end must be >= 0");
    if (!(config.ode_rel_tol > 0.0) || !(config.ode_abs_tol > 0.0))
        throw BadParam("run_flow: tolerances must be positive");

    const int n = w0.n(), d = w0.d();
    FlowRhs rhs{teacher, n, d};

    // query times: records plus their +-probe_dt neighbors
    struct Query {
        double t;
        long long record;  // index into the record grid, -1 for probes
        int kind;          // 0 = record, -1 = before-probe, +1 = after-probe
    };
    const double every = config.record_every > 0.0 ? config.record_every : config.t_end;
    std::vector<double> grid;
    grid.push_back(0.0);
    if (config.t_end > 0.0 && every > 0.0) {
        for (double t = every; t < config.t_end - 1e-12 * config.t_end; t += every)
            grid.push_back(t);
        grid.push_back(config.t_end);
    }
    std::vector<Query> queries;
    const bool probes = config.derivative_probes && config.probe_dt > 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        if (probes && t - config.probe_dt > 0.0 && t + config.probe_dt < config.t_end) {
            queries.push_back({t - config.probe_dt, static_cast<long long>(k), -1});
            queries.push_back({t, static_cast<long long>(k), 0});
            queries.push_back({t + config.probe_dt, static_cast<long long>(k), +1});
        } else {
            queries.push_back({t, static_cast<long long>(k), 0});
        }
    }

    Trajectory traj;
    traj.mode = RunMode::gradient_flow;
    traj.eta = 0.0;
    traj.teacher = teacher;
    traj.probe_dt = probes ? config.probe_dt : 0.0;
    RecordScalars rec;

    std::vector<std::optional<StudentParams>> probe_before(grid.size()), probe_after(grid.size());

    auto emit_record = [&](std::size_t k, double t, const StudentParams& w) {
        const GeometryView g = geometry_view(w, teacher);
        const double l = loss(g);
        if (!std::isfinite(l)) throw NonFinite("run_flow: non-finite loss");
        rec.append(traj, t, w, g, l, gradient_norm(gradient(g, w, teacher)));
        (void)k;
    };

    Flat y(n * d);
    for (int i = 0; i < n; ++i) y.segment(i * d, d) = w0.row(i).transpose();
    Flat f = rhs(y);

    std::size_t qi = 0;
    // serve t = 0 queries
    while (qi < queries.size() && queries[qi].t <= 0.0) {
        if (queries[qi].kind == 0) emit_record(queries[qi].record, 0.0, w0);
        ++qi;
    }
    if (config.t_end == 0.0 || qi >= queries.size()) {
        traj.probes.assign(traj.size(), std::nullopt);
        return traj;
    }

    // initial step heuristic
    double h = 0.01 * std::max(1e-6, y.norm()) / std::max(1e-6, f.norm());
    h = std::min(h, config.t_end);
    double t = 0.0;
    const double stop_loss = config.stop_loss;
    bool done = false;

    Flat k2, k3, k4, k5, k6, y_new, f_new, err;
    while (!done) {
        if (t + h > config.t_end) h = config.t_end - t;
        if (h < 1e-14 * std::max(1.0, std::abs(t))) throw StiffnessFailure(t);

        k2 = rhs(y + h * (Dp45::a21 * f));
        k3 = rhs(y + h * (Dp45::a31 * f + Dp45::a32 * k2));
        k4 = rhs(y + h * (Dp45::a41 * f + Dp45::a42 * k2 + Dp45::a43 * k3));
        k5 = rhs(y + h * (Dp45::a51 * f + Dp45::a52 * k2 + Dp45::a53 * k3 + Dp45::a54 * k4));
        k6 = rhs(y + h * (Dp45::a61 * f + Dp45::a62 * k2 + Dp45::a63 * k3 + Dp45::a64 * k4 +
                          Dp45::a65 * k5));
        y_new = y + h * (Dp45::b1 * f + Dp45::b3 * k3 + Dp45::b4 * k4 + Dp45::b5 * k5 +
                         Dp45::b6 * k6);
        f_new = rhs(y_new);  // FSAL stage, also the derivative at the right end

        err = y + h * (Dp45::e1 * f + Dp45::e3 * k3 + Dp45::e4 * k4 + Dp45::e5 * k5 +
                       Dp45::e6 * k6 + Dp45::e7 * f_new) -
              y_new;
        double err_norm = 0.0;
        for (int i = 0; i < y.size(); ++i) {
            const double sc = config.ode_abs_tol +
                              config.ode_rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            const double e = err[i] / sc;
            err_norm += e * e;
        }
        err_norm = std::sqrt(err_norm / y.size());

        if (err_norm > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
            continue;
        }

        // step accepted: serve dense-output queries inside (t, t+h]
        const double t_new = t + h;
        while (qi < queries.size() && queries[qi].t <= t_new + 1e-15 * std::max(1.0, t_new)) {
            const double tq = std::min(queries[qi].t, t_new);
            const double s = (tq - t) / h;
            const Flat yq = (s >= 1.0) ? y_new : hermite(y, f, y_new, f_new, h, s);
            const StudentParams wq = rhs.unflatten(yq);
            if (queries[qi].kind == 0) {
                emit_record(queries[qi].record, grid[queries[qi].record], wq);
                if (stop_loss > 0.0 && traj.loss.back() <= stop_loss) {
                    done = true;
                    ++qi;
                    break;
                }
            } else if (queries[qi].kind < 0) {
                probe_before[queries[qi].record] = wq;
            } else {
                probe_after[queries[qi].record] = wq;
            }
            ++qi;
        }
        if (qi >= queries.size()) done = true;

        y.swap(y_new);
        f.swap(f_new);
        t = t_new;
        if (t >= config.t_end) done = true;
        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err_norm, 1e-10), -0.2)));
    }

    traj.probes.assign(traj.size(), std::nullopt);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        // match records back to grid indices by time
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            if (grid[gi] == traj.times[k] && probe_before[gi] && probe_after[gi]) {
                traj.probes[k] = std::make_pair(*probe_before[gi], *probe_after[gi]);
                break;
            }
        }
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Toy cases
// ---------------------------------------------------------------------------

StudentParams make_toycase(const ToyCase& kind, const TeacherConfig& teacher) {
    const int d = teacher.d();
    if (const auto* sp = std::get_if<SymmetricPair>(&kind)) {
        if (!(sp->lambda1 > 0.0)) throw BadParam("symmetric_pair: lambda1 must be positive");
        if (sp->lambda2 < 0.0) throw BadParam("symmetric_pair: lambda2 must be nonnegative");
        if (d < 2) throw BadParam("symmetric_pair: requires d >= 2");
        const RealVector vperp = teacher.norm_v * teacher.canonical_perp();
        RealMatrix m(2, d);
        m.row(0) = (sp->lambda1 * teacher.v + sp->lambda2 * vperp).transpose();
        m.row(1) = (sp->lambda1 * teacher.v - sp->lambda2 * vperp).transpose();
        return StudentParams{std::move(m)};
    }
    if (const auto* par = std::get_if<Parallel>(&kind)) {
        if (par->lambdas.empty()) throw BadParam("parallel: needs at least one lambda");
        RealMatrix m(static_cast<int>(par->lambdas.size()), d);
        for (std::size_t i = 0; i < par->lambdas.size(); ++i) {
            if (!(par->lambdas[i] > 0.0)) throw BadParam("parallel: lambdas must be positive");
            m.row(static_cast<int>(i)) = par->lambdas[i] * teacher.v.transpose();
        }
        return StudentParams{std::move(m)};
    }
    const auto& eq = std::get<EqualNeurons>(kind);
    if (eq.n < 1) throw BadParam("equal: n must be >= 1");
    if (eq.w.size() != d) throw BadParam("equal: dimension mismatch");
    if (eq.w.norm() < 1e-300) throw BadParam("equal: zero neuron");
    RealMatrix m(eq.n, d);
    for (int i = 0; i < eq.n; ++i) m.row(i) = eq.w.transpose();
    return StudentParams{std::move(m)};
}

std::pair<double, double> extract_lambda(const StudentParams& w, const TeacherConfig& teacher) {
    if (w.n() != 2) throw NotSymmetric("extract_lambda: expected exactly two neurons");
    const double tol = 1e-9 * teacher.norm_v;
    const RealVector vbar = teacher.unit();
    const double h1 = w.row(0).dot(vbar.transpose());
    const double h2 = w.row(1).dot(vbar.transpose());
    if (std::abs(h1 - h2) > tol)
        throw NotSymmetric("extract_lambda: projections onto v differ");
    const Eigen::RowVectorXd z1 = w.row(0) - h1 * vbar.transpose();
    const Eigen::RowVectorXd z2 = w.row(1) - h2 * vbar.transpose();
    if ((z1 + z2).norm() > tol)
        throw NotSymmetric("extract_lambda: orthogonal parts are not mirrored");
    const RealVector p = teacher.canonical_perp();
    const double c1 = z1.dot(p.transpose());
    if ((z1 - c1 * p.transpose()).norm() > tol)
        throw NotSymmetric("extract_lambda: pair leaves the span of v and v_perp");
    return {h1 / teacher.norm_v, c1 / teacher.norm_v};
}

std::pair<double, double> symmetric_pair_gradient_coeffs(double lambda1, double lambda2) {
    if (!(lambda1 > 0.0)) throw BadParam("symmetric_pair_gradient_coeffs: lambda1 <= 0");
    const double theta = std::atan2(lambda2, lambda1);
    const double s2t = std::sin(2.0 * theta);
    const double a =
        (lambda1 - 0.5) * (1.0 - theta / std::numbers::pi + s2t / (2.0 * std::numbers::pi));
    const double b = lambda2 / (2.0 * std::numbers::pi) *
                     (2.0 * theta + (lambda1 - 0.5) / lambda1 * s2t);
    return {a, b};
}

}  // namespace popgrad
