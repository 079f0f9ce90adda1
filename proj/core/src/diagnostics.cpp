#include "popgrad/diagnostics.hpp"

#include "popgrad/objective.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>

namespace popgrad {

using nlohmann::json;

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "report_only";
    }
}

bool DiagnosticsReport::any_fail() const {
    return std::any_of(results.begin(), results.end(),
                       [](const CheckResult& r) { return r.verdict == Verdict::fail; });
}

json DiagnosticsReport::to_json() const {
    json arr = json::array();
    for (const auto& r : results) {
        json item;
        item["name"] = r.name;
        item["anchor"] = r.anchor;
        item["values"] = r.values;
        if (r.threshold) item["threshold"] = *r.threshold;
        item["verdict"] = to_string(r.verdict);
        arr.push_back(std::move(item));
    }
    return arr;
}

PhaseMarkers phase_detect(const Trajectory& traj, const PhaseThresholds& th) {
    PhaseMarkers m;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (!m.t1_index && traj.max_theta[i] <= 4.0 * th.eps1) m.t1_index = i;
        if (m.t1_index && traj.H[i] <= th.eps2 * traj.teacher.norm_v) {
            m.t2_index = i;
            break;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// pointwise operations
// ---------------------------------------------------------------------------

CheckResult check_init(const StudentParams& w0, const InitSpec& spec,
                       const TeacherConfig& teacher) {
    const GeometryView g = geometry_view(w0, teacher);
    const double s1 = 0.5 * spec.sigma * std::sqrt(static_cast<double>(spec.d));
    const double s2 = 4.0 * s1;

    bool norms_ok = true, angles_ok = true;
    for (int i = 0; i < g.n; ++i) {
        norms_ok = norms_ok && g.norms[i] >= s1 && g.norms[i] <= s2;
        angles_ok = angles_ok && g.theta[i] >= std::numbers::pi / 3.0 &&
                    g.theta[i] <= 2.0 * std::numbers::pi / 3.0;
    }
    bool nondegenerate = true;
    if (g.n >= 2) {
        nondegenerate = static_cast<int>(g.q_plus.size()) == g.n && g.kappa_max &&
                        *g.kappa_max > 0.0;
    }

    CheckResult r;
    r.name = "init_conditions";
    r.anchor = "s1 <= |w_i(0)| <= s2, pi/3 <= theta_i(0) <= 2pi/3, all z_i(0) != 0, kappa_max(0) > 0";
    r.values = {{"s1", s1},
                {"s2", s2},
                {"norms_ok", norms_ok},
                {"angles_ok", angles_ok},
                {"nondegenerate", nondegenerate},
                {"min_norm", g.min_wnorm},
                {"max_norm", g.max_wnorm},
                {"min_theta", g.theta.minCoeff()},
                {"max_theta", g.max_theta}};
    if (g.kappa_max) r.values["kappa_max0"] = *g.kappa_max;
    r.verdict = (norms_ok && angles_ok && nondegenerate) ? Verdict::pass : Verdict::fail;
    return r;
}

CheckResult check_theta_bound(const StudentParams& w, const TeacherConfig& teacher) {
    const GeometryView g = geometry_view(w, teacher);
    const double l = loss(g);
    double worst = 0.0;
    int worst_i = -1;
    for (int i = 0; i < g.n; ++i) {
        const double lhs = g.norms[i] * g.norms[i] * std::pow(g.theta[i], 3);
        if (lhs > worst) {
            worst = lhs;
            worst_i = i;
        }
    }
    const double rhs = 30.0 * std::numbers::pi * l;
    CheckResult r;
    r.name = "theta_bound";
    r.anchor = "|w_i|^2 theta_i^3 <= 30 pi L";
    r.values = {{"max_lhs", worst}, {"bound", rhs}, {"argmax", worst_i}};
    r.verdict = worst <= rhs * (1.0 + 1e-9) + 1e-300 ? Verdict::pass : Verdict::fail;
    return r;
}

CheckResult check_balance(const GeometryView& view, double factor) {
    CheckResult r;
    r.name = "balance";
    r.anchor = "max h_i <= factor * min h_j";
    r.threshold = factor;
    if (!view.balance_ratio) {
        r.values = {{"note", "some h_i <= 0"}};
        r.verdict = Verdict::report_only;
        return r;
    }
    r.values = {{"ratio", *view.balance_ratio}};
    r.verdict = *view.balance_ratio <= factor ? Verdict::pass : Verdict::fail;
    return r;
}

CheckResult check_residual_bound(const GeometryView& view, double loss_value) {
    CheckResult r;
    r.name = "residual_bound";
    r.anchor = "|r| <= 2.1 sqrt(L) when all theta_i <= 0.05; ratio |r|/(n sqrt(L)) reported";
    const double rn = view.r.norm();
    if (!(loss_value > 0.0)) {
        r.values = {{"note", "loss is zero"}, {"r_norm", rn}};
        r.verdict = Verdict::report_only;
        return r;
    }
    const double ratio = rn / (view.n * std::sqrt(loss_value));
    r.values = {{"r_norm", rn}, {"ratio", ratio}};
    if (view.max_theta <= 0.05) {
        r.verdict = rn <= 2.1 * std::sqrt(loss_value) ? Verdict::pass : Verdict::fail;
        r.threshold = 2.1;
    } else {
        r.verdict = Verdict::report_only;
    }
    return r;
}

double descent_projection(const StudentParams& w, const TeacherConfig& teacher) {
    const GeometryView g = geometry_view(w, teacher);
    const double hsum = g.h.sum();
    if (!(hsum > 0.0)) throw BadProjection{};
    const GradientMatrix grad = gradient(g, w, teacher);
    double acc = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const Eigen::RowVectorXd w_star = (g.h[i] / hsum) * teacher.v.transpose();
        acc += grad.row(i).dot(w.row(i) - w_star);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// trajectory checkers
// ---------------------------------------------------------------------------

namespace {

constexpr double kProjectionThetaCap = 0.05;

bool norms_in_window(const Trajectory& t, std::size_t k) {
    const double nv = t.teacher.norm_v;
    const double n = static_cast<double>(t.snapshots[k].n());
    return t.min_wnorm[k] >= nv / (4.0 * n) && t.max_wnorm[k] <= 4.0 * nv / n;
}

CheckResult empty_report(const char* name, const char* anchor, const char* note) {
    CheckResult r;
    r.name = name;
    r.anchor = anchor;
    r.values = {{"note", note}};
    r.verdict = Verdict::report_only;
    return r;
}

CheckResult ck_phase_markers(const CheckContext& ctx, const PhaseMarkers& m) {
    CheckResult r;
    r.name = "phase_markers";
    r.anchor = "t1: first max theta_i <= 4 eps1; t2: first later H <= eps2 |v|";
    r.values = json::object();
    if (m.t1_index) r.values["t1_time"] = ctx.traj.times[*m.t1_index];
    if (m.t2_index) r.values["t2_time"] = ctx.traj.times[*m.t2_index];
    r.values["t1_found"] = m.t1_index.has_value();
    r.values["t2_found"] = m.t2_index.has_value();
    r.verdict = Verdict::report_only;
    return r;
}

CheckResult ck_init(const CheckContext& ctx, const PhaseMarkers&) {
    if (!ctx.init || ctx.traj.size() == 0)
        return empty_report("init_conditions", "initial norm/angle/non-degeneracy conditions",
                            "no init spec provided");
    return check_init(ctx.traj.snapshots.front(), *ctx.init, ctx.traj.teacher);
}

CheckResult ck_theta_bound(const CheckContext& ctx, const PhaseMarkers&) {
    const Trajectory& t = ctx.traj;
    double worst_excess = -1.0;
    json worst = json::object();
    bool ok = true;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const GeometryView g = geometry_view(t.snapshots[k], t.teacher);
        const double bound = 30.0 * std::numbers::pi * t.loss[k];
        for (int i = 0; i < g.n; ++i) {
            const double lhs = g.norms[i] * g.norms[i] * std::pow(g.theta[i], 3);
            const double excess = lhs - bound * (1.0 + 1e-9);
            if (excess > worst_excess) {
                worst_excess = excess;
                worst = {{"time", t.times[k]}, {"neuron", i}, {"lhs", lhs}, {"bound", bound}};
            }
            if (excess > 1e-300) ok = false;
        }
    }
    CheckResult r;
    r.name = "theta_bound";
    r.anchor = "|w_i|^2 theta_i^3 <= 30 pi L at every record";
    r.values = {{"worst", worst}};
    r.verdict = ok ? Verdict::pass : Verdict::fail;
    return r;
}

CheckResult ck_balance(const CheckContext& ctx, const PhaseMarkers& m) {
    const char* anchor = "max h_i <= balance_factor * min h_j on the phase-2 segment";
    if (!m.t1_index || !m.t2_index)
        return empty_report("balance", anchor, "phase-2 segment not detected");
    const Trajectory& t = ctx.traj;
    double worst = 0.0;
    std::size_t eligible = 0;
    bool ok = true;
    for (std::size_t k = *m.t1_index; k <= *m.t2_index; ++k) {
        if (!t.balance_ratio[k]) continue;
        ++eligible;
        worst = std::max(worst, *t.balance_ratio[k]);
        if (*t.balance_ratio[k] > ctx.thresholds.balance_factor) ok = false;
    }
    CheckResult r;
    r.name = "balance";
    r.anchor = anchor;
    r.threshold = ctx.thresholds.balance_factor;
    r.values = {{"max_ratio", worst}, {"records", eligible}};
    r.verdict = eligible == 0 ? Verdict::report_only : (ok ? Verdict::pass : Verdict::fail);
    return r;
}

CheckResult ck_h_range(const CheckContext& ctx, const PhaseMarkers& m) {
    const char* anchor = "h_floor_factor * s1 <= h_i <= h_cap_factor * |v| / n on phase 2";
    if (!m.t1_index || !m.t2_index || !ctx.init)
        return empty_report("h_range", anchor, "needs detected phase 2 and init spec");
    const Trajectory& t = ctx.traj;
    const double s1 = 0.5 * ctx.init->sigma * std::sqrt(static_cast<double>(ctx.init->d));
    const double lo = ctx.thresholds.h_floor_factor * s1;
    double h_min = std::numeric_limits<double>::infinity();
    double h_max = -h_min;
    for (std::size_t k = *m.t1_index; k <= *m.t2_index; ++k) {
        const GeometryView g = geometry_view(t.snapshots[k], t.teacher);
        h_min = std::min(h_min, g.h.minCoeff());
        h_max = std::max(h_max, g.h.maxCoeff());
    }
    const double hi =
        ctx.thresholds.h_cap_factor * t.teacher.norm_v / ctx.traj.snapshots.front().n();
    CheckResult r;
    r.name = "h_range";
    r.anchor = anchor;
    r.values = {{"h_min", h_min}, {"h_max", h_max}, {"floor", lo}, {"cap", hi},
                {"within", h_min >= lo && h_max <= hi}};
    r.verdict = Verdict::report_only;
    return r;
}

CheckResult ck_monotone_descent(const CheckContext& ctx, const PhaseMarkers&) {
    const Trajectory& t = ctx.traj;
    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double inc = t.loss[k] - t.loss[k - 1];
        if (inc > 1e-12) {
            ++violations;
            worst = std::max(worst, inc);
        }
    }
    CheckResult r;
    r.name = "monotone_descent";
    r.anchor = "recorded loss non-increasing (flagged, not failed: not guaranteed at every eta)";
    r.values = {{"violations", violations}, {"worst_increase", worst}};
    r.verdict = Verdict::report_only;
    return r;
}

CheckResult ck_phase1_norm_growth(const CheckContext& ctx, const PhaseMarkers&) {
    const Trajectory& t = ctx.traj;
    const double nv = t.teacher.norm_v;
    bool ok = true;
    std::size_t eligible = 0;
    json worst = json::object();
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double n = static_cast<double>(t.snapshots[k - 1].n());
        // growth regime: every neuron small and no angle past 2pi/3
        if (t.max_wnorm[k - 1] > nv / (3.0 * n) ||
            t.max_theta[k - 1] > 2.0 * std::numbers::pi / 3.0)
            continue;
        ++eligible;
        const GeometryView a = geometry_view(t.snapshots[k - 1], t.teacher);
        const GeometryView b = geometry_view(t.snapshots[k], t.teacher);
        for (int i = 0; i < a.n; ++i) {
            const double shrink = a.norms[i] - b.norms[i];
            if (shrink > 1e-12 * nv) {
                ok = false;
                worst = {{"time", t.times[k]}, {"neuron", i}, {"shrink", shrink}};
            }
        }
    }
    CheckResult r;
    r.name = "phase1_norm_growth";
    r.anchor = "|w_i| non-decreasing while max |w_i| <= |v|/(3n)";
    r.values = {{"eligible_steps", eligible}, {"worst", worst}};
    r.verdict = eligible == 0 ? Verdict::report_only : (ok ? Verdict::pass : Verdict::fail);
    return r;
}

// h_i(t+1) - h_i(t) = (eta/2) H(t) - Q_i(t), exactly, per discrete step
CheckResult ck_h_update_identity(const CheckContext& ctx, const PhaseMarkers& m) {
    const char* anchor = "h_i(t+1) - h_i(t) = (eta/2) H(t) - Q_i(t)";
    const Trajectory& t = ctx.traj;
    if (t.mode != RunMode::discrete_gd)
        return empty_report("h_update_identity", anchor, "discrete mode only");
    const double eta = t.eta;
    double worst = 0.0;
    std::size_t pairs = 0;
    double q_phase2_max = 0.0;
    bool any_phase2 = false;
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (t.times[k] - t.times[k - 1] != 1.0) continue;  // only adjacent GD steps
        ++pairs;
        const GeometryView g = geometry_view(t.snapshots[k - 1], t.teacher);
        const Eigen::RowVectorXd vbar = (t.teacher.v / t.teacher.norm_v).transpose();
        const Eigen::VectorXd h_next = t.snapshots[k].neurons * vbar.transpose();
        for (int i = 0; i < g.n; ++i) {
            double s = 0.0;
            double cross = 0.0;
            for (int j = 0; j < g.n; ++j)
                if (j != i) {
                    s += g.norms[j] * std::sin(g.theta_ij(i, j));
                    cross += g.theta_ij(i, j) * g.h[j];
                }
            const double q =
                eta / (2.0 * std::numbers::pi) *
                ((s - g.norm_v * std::sin(g.theta[i])) * std::cos(g.theta[i]) - cross +
                 g.theta[i] * g.norm_v);
            const double lhs = h_next[i] - g.h[i];
            const double rhs = 0.5 * eta * g.H - q;
            worst = std::max(worst, std::abs(lhs - rhs));
            if (m.t1_index && m.t2_index && k - 1 >= *m.t1_index && k <= *m.t2_index) {
                any_phase2 = true;
                q_phase2_max = std::max(q_phase2_max, std::abs(q));
            }
        }
    }
    CheckResult r;
    r.name = "h_update_identity";
    r.anchor = anchor;
    r.threshold = 1e-10;
    r.values = {{"pairs", pairs}, {"max_abs_residual", worst}};
    if (any_phase2) {
        // smallness of the perturbation on phase 2, reported against 3 eps2 eta |v|
        r.values["phase2_max_abs_Q"] = q_phase2_max;
        r.values["phase2_Q_bound"] = 3.0 * ctx.thresholds.eps2 * eta * t.teacher.norm_v;
    }
    r.verdict = pairs == 0 ? Verdict::report_only
                           : (worst <= 1e-10 ? Verdict::pass : Verdict::fail);
    return r;
}

CheckResult ck_theta_envelope(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor =
        "sin^2(theta_i(t)/2) - eps1^2 <= (1 + eta t |v| / s2)^(-1/24) (sin^2(theta_i(0)/2) - eps1^2)";
    const Trajectory& t = ctx.traj;
    if (t.mode != RunMode::discrete_gd || !ctx.init || t.size() == 0)
        return empty_report("theta_envelope", anchor, "needs discrete mode and init spec");
    const double s2 = 2.0 * ctx.init->sigma * std::sqrt(static_cast<double>(ctx.init->d));
    const double eps1_sq = ctx.thresholds.eps1 * ctx.thresholds.eps1;
    const GeometryView g0 = geometry_view(t.snapshots.front(), t.teacher);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const GeometryView g = geometry_view(t.snapshots[k], t.teacher);
        const double decay =
            std::pow(1.0 + t.eta * t.times[k] * t.teacher.norm_v / s2, -1.0 / 24.0);
        for (int i = 0; i < g.n; ++i) {
            const double chi = std::pow(std::sin(0.5 * g.theta[i]), 2) - eps1_sq;
            const double chi0 = std::pow(std::sin(0.5 * g0.theta[i]), 2) - eps1_sq;
            if (chi0 <= 0.0) continue;  // envelope stated for initial angles above eps1
            worst = std::max(worst, chi - decay * chi0);
        }
    }
    CheckResult r;
    r.name = "theta_envelope";
    r.anchor = anchor;
    r.values = {{"max_violation", std::isfinite(worst) ? worst : 0.0},
                {"holds", !(worst > 0.0)}};
    r.verdict = Verdict::report_only;
    return r;
}

CheckResult ck_H_decay_fit(const CheckContext& ctx, const PhaseMarkers& m) {
    const char* anchor = "semilog fit of H on the phase-2 segment (geometric decay)";
    if (!m.t1_index || !m.t2_index)
        return empty_report("H_decay_fit", anchor, "phase-2 segment not detected");
    const Trajectory& t = ctx.traj;
    std::vector<double> xs, ys;
    for (std::size_t k = *m.t1_index; k <= *m.t2_index; ++k)
        if (t.H[k] > 0.0) {
            xs.push_back(t.times[k]);
            ys.push_back(std::log(t.H[k]));
        }
    if (xs.size() < 5) return empty_report("H_decay_fit", anchor, "fewer than 5 records");
    const LinearFit f = linear_fit(xs, ys);
    CheckResult r;
    r.name = "H_decay_fit";
    r.anchor = anchor;
    r.values = {{"slope", f.slope}, {"r_squared", f.r_squared}, {"records", f.count}};
    r.verdict = Verdict::report_only;
    return r;
}

CheckResult ck_implicit_regularization(const CheckContext& ctx, const PhaseMarkers& m) {
    const char* anchor = "|v|/4n <= |w_i(t)| <= 4|v|/n for every record after t2";
    if (!m.t2_index)
        return empty_report("implicit_regularization", anchor, "t2 not detected");
    const Trajectory& t = ctx.traj;
    bool ok = true;
    json offender = json::object();
    for (std::size_t k = *m.t2_index; k < t.size(); ++k) {
        if (norms_in_window(t, k)) continue;
        ok = false;
        const GeometryView g = geometry_view(t.snapshots[k], t.teacher);
        const double n = static_cast<double>(g.n);
        for (int i = 0; i < g.n; ++i)
            if (g.norms[i] < t.teacher.norm_v / (4.0 * n) ||
                g.norms[i] > 4.0 * t.teacher.norm_v / n) {
                offender = {{"time", t.times[k]}, {"neuron", i}, {"norm", g.norms[i]}};
                break;
            }
        break;
    }
    CheckResult r;
    r.name = "implicit_regularization";
    r.anchor = anchor;
    r.values = {{"t2_time", t.times[*m.t2_index]}, {"offender", offender}};
    r.verdict = ok ? Verdict::pass : Verdict::fail;
    return r;
}

CheckResult ck_grad_lower_bound(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor = "c(t) = |grad L| n^(2/3) |v|^(1/3) / L^(2/3) bounded away from zero";
    const auto series = grad_lower_bound_series(ctx.traj);
    CheckResult r;
    r.name = "grad_lower_bound";
    r.anchor = anchor;
    r.threshold = 0.01;
    if (series.empty()) {
        r.values = {{"note", "no qualifying records"}};
        r.verdict = Verdict::report_only;
        return r;
    }
    double min_c = series.front().second;
    for (const auto& [t, c] : series) min_c = std::min(min_c, c);
    r.values = {{"min_c", min_c},
                {"first_c", series.front().second},
                {"last_c", series.back().second},
                {"records", series.size()},
                {"meets_threshold", min_c >= 0.01}};
    r.verdict = Verdict::report_only;  // the hidden constant cannot be asserted
    return r;
}

CheckResult ck_descent_projection(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor =
        "sum_i <grad_i, w_i - (h_i/sum h_j) v> >= L when theta_max <= 0.05 and norms in window";
    const Trajectory& t = ctx.traj;
    std::size_t eligible = 0;
    bool ok = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    json worst = json::object();
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t.max_theta[k] > kProjectionThetaCap || !norms_in_window(t, k)) continue;
        ++eligible;
        const double proj = descent_projection(t.snapshots[k], t.teacher);
        const double margin = proj - t.loss[k];
        if (margin < worst_margin) {
            worst_margin = margin;
            worst = {{"time", t.times[k]}, {"projection", proj}, {"loss", t.loss[k]}};
        }
        if (margin < 0.0) ok = false;
    }
    CheckResult r;
    r.name = "descent_projection";
    r.anchor = anchor;
    r.values = {{"eligible_records", eligible}, {"worst", worst}};
    r.verdict = eligible == 0 ? Verdict::report_only : (ok ? Verdict::pass : Verdict::fail);
    return r;
}

CheckResult ck_residual_bound(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor = "|r| <= 2.1 sqrt(L) whenever all theta_i <= 0.05";
    const Trajectory& t = ctx.traj;
    std::size_t asserted = 0;
    bool ok = true;
    double worst_ratio = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!(t.loss[k] > 0.0)) continue;
        const GeometryView g = geometry_view(t.snapshots[k], t.teacher);
        const double rn = g.r.norm();
        if (t.max_theta[k] <= kProjectionThetaCap) {
            ++asserted;
            if (rn > 2.1 * std::sqrt(t.loss[k])) ok = false;
        }
        worst_ratio = std::max(worst_ratio, rn / (g.n * std::sqrt(t.loss[k])));
    }
    CheckResult r;
    r.name = "residual_bound";
    r.anchor = anchor;
    r.threshold = 2.1;
    r.values = {{"asserted_records", asserted}, {"max_ratio_per_n", worst_ratio}};
    r.verdict = asserted == 0 ? Verdict::report_only : (ok ? Verdict::pass : Verdict::fail);
    return r;
}

// v-orthogonal projection of -grad_i against the closed z_i evolution law
CheckResult ck_z_dynamics(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor =
        "P_perp(-grad_i) = -(1/2pi)(pi + sum_j (|w_j|/|w_i|) sin theta_ij - (|v|/|w_i|) sin theta_i) z_i"
        " - sum_j ((pi - theta_ij)/2pi) z_j";
    const Trajectory& t = ctx.traj;
    double worst = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const GeometryView g = geometry_view(t.snapshots[k], t.teacher);
        const GradientMatrix grad = gradient(g, t.snapshots[k], t.teacher);
        const Eigen::RowVectorXd vbar = (t.teacher.v / t.teacher.norm_v).transpose();
        for (int i = 0; i < g.n; ++i) {
            Eigen::RowVectorXd lhs = -grad.row(i);
            lhs -= lhs.dot(vbar) * vbar;
            double coef = std::numbers::pi;
            for (int j = 0; j < g.n; ++j)
                if (j != i) coef += g.norms[j] / g.norms[i] * std::sin(g.theta_ij(i, j));
            coef -= g.norm_v / g.norms[i] * std::sin(g.theta[i]);
            Eigen::RowVectorXd rhs = -(coef / (2.0 * std::numbers::pi)) * g.z.row(i);
            for (int j = 0; j < g.n; ++j)
                if (j != i)
                    rhs -= (std::numbers::pi - g.theta_ij(i, j)) /
                           (2.0 * std::numbers::pi) * g.z.row(j);
            worst = std::max(worst, (lhs - rhs).norm());
        }
    }
    CheckResult r;
    r.name = "z_dynamics";
    r.anchor = anchor;
    r.threshold = 1e-9;
    r.values = {{"max_abs_residual", worst}};
    r.verdict = worst <= 1e-9 ? Verdict::pass : Verdict::fail;
    return r;
}

CheckResult ck_kappa_separation(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor =
        "some z_i = 0 or kappa_max(t) >= kappa_max(0)/3; and when kappa_max < pi/2 is attained"
        " by a unique pair, d/dt cos kappa <= -((pi - theta_ij)/pi)(1 - cos^2 kappa)";
    const Trajectory& t = ctx.traj;
    if (t.size() == 0 || t.snapshots.front().n() < 2)
        return empty_report("kappa_separation", anchor, "needs n >= 2");
    const GeometryView g0 = geometry_view(t.snapshots.front(), t.teacher);
    if (!g0.kappa_max)
        return empty_report("kappa_separation", anchor, "kappa_max undefined at t = 0");
    const double floor = *g0.kappa_max / 3.0 - 1e-3;

    bool ok = true;
    std::size_t derivative_checks = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    json worst = json::object();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const GeometryView g = geometry_view(t.snapshots[k], t.teacher);
        const bool z_branch = static_cast<int>(g.q_plus.size()) < g.n;
        const bool kappa_branch = g.kappa_max && *g.kappa_max >= floor;
        if (!z_branch && !kappa_branch) {
            ok = false;
            worst = {{"time", t.times[k]},
                     {"kappa_max", g.kappa_max ? json(*g.kappa_max) : json()},
                     {"floor", floor}};
        }

        // differential inequality via central difference on the dense-output probes
        if (k < t.probes.size() && t.probes[k] && g.kappa_max &&
            *g.kappa_max < std::numbers::pi / 2.0 && g.kappa_max_unique) {
            const int i = g.kappa_argmax_i, j = g.kappa_argmax_j;
            const auto& [wb, wa] = *t.probes[k];
            const GeometryView gb = geometry_view(wb, t.teacher);
            const GeometryView ga = geometry_view(wa, t.teacher);
            if (gb.z_norms[i] > gb.z_tolerance && gb.z_norms[j] > gb.z_tolerance &&
                ga.z_norms[i] > ga.z_tolerance && ga.z_norms[j] > ga.z_tolerance) {
                ++derivative_checks;
                const double ca = std::cos(ga.kappa(i, j));
                const double cb = std::cos(gb.kappa(i, j));
                const double fd = (ca - cb) / (2.0 * t.probe_dt);
                const double c = std::cos(g.kappa(i, j));
                const double rhs = -(std::numbers::pi - g.theta_ij(i, j)) /
                                   std::numbers::pi * (1.0 - c * c);
                const double margin = rhs + 0.1 * std::abs(rhs) + 1e-4 - fd;
                if (margin < worst_margin) worst_margin = margin;
                if (margin < 0.0) {
                    ok = false;
                    worst = {{"time", t.times[k]}, {"fd", fd}, {"rhs", rhs}};
                }
            }
        }
    }
    CheckResult r;
    r.name = "kappa_separation";
    r.anchor = anchor;
    r.values = {{"kappa_max0", *g0.kappa_max},
                {"floor", floor},
                {"derivative_checks", derivative_checks},
                {"worst", worst}};
    r.verdict = ok ? Verdict::pass : Verdict::fail;
    return r;
}

CheckResult ck_rate_fit(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor = "trailing-window log-log slope of L (and semilog slope)";
    CheckResult r;
    r.name = "rate_fit";
    r.anchor = anchor;
    r.values = json::object();
    try {
        const RateFit p = estimate_rate(ctx.traj, RateKind::power_law);
        r.values["power_law"] = {{"slope", p.slope}, {"r_squared", p.r_squared}};
    } catch (const InsufficientData& e) {
        r.values["power_law"] = {{"note", e.what()}};
    }
    try {
        const RateFit ex = estimate_rate(ctx.traj, RateKind::exponential);
        r.values["exponential"] = {{"slope", ex.slope}, {"r_squared", ex.r_squared}};
    } catch (const InsufficientData& e) {
        r.values["exponential"] = {{"note", e.what()}};
    }
    r.verdict = Verdict::report_only;
    return r;
}

CheckResult ck_lower_bound_fit(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor = "linear fit of L^(-1/3) vs t on the trailing half: r^2 >= 0.98";
    const Trajectory& t = ctx.traj;
    if (t.mode != RunMode::gradient_flow || t.snapshots.empty() ||
        t.snapshots.front().n() < 2)
        return empty_report("lower_bound_fit", anchor, "needs gradient flow with n >= 2");
    CheckResult r;
    r.name = "lower_bound_fit";
    r.anchor = anchor;
    r.threshold = 0.98;
    try {
        const LowerBoundFit f = fit_lower_bound(t);
        r.values = {{"slope", f.fit.slope},
                    {"r_squared", f.fit.r_squared},
                    {"records", f.fit.count}};
        r.verdict = f.fit.r_squared >= 0.98 ? Verdict::pass : Verdict::fail;
    } catch (const InsufficientData& e) {
        r.values = {{"note", e.what()}};
        r.verdict = Verdict::report_only;
    }
    return r;
}

CheckResult ck_hessian_ratio(const CheckContext& ctx, const PhaseMarkers&) {
    const char* anchor = "|Hessian|_2 / n^2 at the final record (reported)";
    const Trajectory& t = ctx.traj;
    if (t.size() == 0) return empty_report("hessian_ratio", anchor, "empty trajectory");
    const std::size_t k = t.size() - 1;
    const double ratio = hessian_spectral_ratio(t.snapshots[k], t.teacher);
    CheckResult r;
    r.name = "hessian_ratio";
    r.anchor = anchor;
    r.values = {{"ratio", ratio},
                {"finite", std::isfinite(ratio)},
                {"norms_in_window", norms_in_window(t, k)}};
    r.verdict = Verdict::report_only;
    return r;
}

using CheckerFn = std::function<CheckResult(const CheckContext&, const PhaseMarkers&)>;

const std::vector<std::pair<std::string, CheckerFn>>& registry() {
    static const std::vector<std::pair<std::string, CheckerFn>> reg = {
        {"init_conditions", ck_init},
        {"phase_markers", ck_phase_markers},
        {"theta_bound", ck_theta_bound},
        {"balance", ck_balance},
        {"h_range", ck_h_range},
        {"monotone_descent", ck_monotone_descent},
        {"phase1_norm_growth", ck_phase1_norm_growth},
        {"h_update_identity", ck_h_update_identity},
        {"theta_envelope", ck_theta_envelope},
        {"H_decay_fit", ck_H_decay_fit},
        {"implicit_regularization", ck_implicit_regularization},
        {"grad_lower_bound", ck_grad_lower_bound},
        {"descent_projection", ck_descent_projection},
        {"residual_bound", ck_residual_bound},
        {"z_dynamics", ck_z_dynamics},
        {"kappa_separation", ck_kappa_separation},
        {"rate_fit", ck_rate_fit},
        {"lower_bound_fit", ck_lower_bound_fit},
        {"hessian_ratio", ck_hessian_ratio},
    };
    return reg;
}

}  // namespace

const std::vector<std::string>& checker_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, fn] : registry()) out.push_back(name);
        return out;
    }();
    return names;
}

bool is_checker_name(const std::string& name) {
    for (const auto& [n, fn] : registry())
        if (n == name) return true;
    return false;
}

DiagnosticsReport run_checkers(const CheckContext& ctx, const std::vector<std::string>& names) {
    for (const auto& n : names)
        if (!is_checker_name(n)) throw BadParam("unknown checker: " + n);
    const PhaseMarkers markers = phase_detect(ctx.traj, ctx.thresholds);
    DiagnosticsReport report;
    for (const auto& [name, fn] : registry()) {
        if (!names.empty() && std::find(names.begin(), names.end(), name) == names.end())
            continue;
        report.results.push_back(fn(ctx, markers));
    }
    return report;
}

std::vector<std::pair<double, double>> grad_lower_bound_series(const Trajectory& traj,
                                                               double loss_cap_factor) {
    std::vector<std::pair<double, double>> series;
    const double nv = traj.teacher.norm_v;
    const double cap = loss_cap_factor * nv * nv;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (!(traj.loss[k] > 0.0) || traj.loss[k] > cap) continue;
        if (!norms_in_window(traj, k)) continue;
        const double n = static_cast<double>(traj.snapshots[k].n());
        const double c = traj.grad_norm[k] * std::pow(n, 2.0 / 3.0) * std::cbrt(nv) /
                         std::pow(traj.loss[k], 2.0 / 3.0);
        series.emplace_back(traj.times[k], c);
    }
    return series;
}

}  // namespace popgrad
