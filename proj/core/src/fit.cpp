#include "popgrad/fit.hpp"

#include <cmath>
#include <vector>

namespace popgrad {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw BadParam("linear_fit: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw InsufficientData("linear_fit: need at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw InsufficientData("linear_fit: degenerate abscissa");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    f.count = n;
    return f;
}

RateFit estimate_rate(std::span<const double> times, std::span<const double> losses,
                      RateKind kind, const WindowSpec& window) {
    if (times.size() != losses.size()) throw BadParam("estimate_rate: size mismatch");
    if (times.empty()) throw InsufficientData("estimate_rate: empty trajectory");

    const double t_last = times.back();
    const double min_time = window.min_time.value_or(std::max(t_last / 10.0, 10.0));

    // eligible records: past min_time, positive loss, positive time for logs
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] >= min_time && times[i] > 0.0 && losses[i] > 0.0) idx.push_back(i);
    if (idx.size() < 2) throw InsufficientData("estimate_rate: no eligible records");

    // trailing fraction in log-time
    const double lt_lo = std::log(times[idx.front()]);
    const double lt_hi = std::log(times[idx.back()]);
    const double cut = lt_lo + (1.0 - window.log_time_fraction) * (lt_hi - lt_lo);
    std::size_t first = 0;
    while (first < idx.size() && std::log(times[idx[first]]) < cut) ++first;
    if (idx.size() - first < 10)
        throw InsufficientData("estimate_rate: fewer than 10 records in window");

    std::vector<double> xs, ys;
    xs.reserve(idx.size() - first);
    ys.reserve(idx.size() - first);
    for (std::size_t k = first; k < idx.size(); ++k) {
        const std::size_t i = idx[k];
        xs.push_back(kind == RateKind::power_law ? std::log(times[i]) : times[i]);
        ys.push_back(std::log(losses[i]));
    }
    const LinearFit lf = linear_fit(xs, ys);

    RateFit rf;
    rf.slope = lf.slope;
    rf.intercept = lf.intercept;
    rf.r_squared = lf.r_squared;
    rf.window_begin = idx[first];
    rf.window_end = idx.back() + 1;
    rf.kind = kind;
    return rf;
}

RateFit estimate_rate(const Trajectory& traj, RateKind kind, const WindowSpec& window) {
    return estimate_rate(traj.times, traj.loss, kind, window);
}

LowerBoundFit fit_lower_bound(const Trajectory& traj) {
    if (traj.size() < 2) throw InsufficientData("fit_lower_bound: empty trajectory");
    const double t_first = traj.times.front();
    const double t_last = traj.times.back();
    const double cut = 0.5 * (t_first + t_last);

    std::vector<double> xs, ys;
    std::size_t begin = traj.size();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.times[i] < cut) continue;
        if (!(traj.loss[i] > 0.0))
            throw InsufficientData("fit_lower_bound: nonpositive loss in window");
        if (begin == traj.size()) begin = i;
        xs.push_back(traj.times[i]);
        ys.push_back(std::pow(traj.loss[i], -1.0 / 3.0));
    }
    if (xs.size() < 10) throw InsufficientData("fit_lower_bound: fewer than 10 records");

    LowerBoundFit out;
    out.fit = linear_fit(xs, ys);
    out.window_begin = begin;
    out.window_end = traj.size();
    return out;
}

}  // namespace popgrad
