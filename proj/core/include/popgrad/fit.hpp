#pragma once

#include "popgrad/dynamics.hpp"

#include <optional>
#include <span>

namespace popgrad {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t count = 0;
};

// ordinary least squares y = slope * x + intercept
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

enum class RateKind { power_law, exponential };

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t window_begin = 0;  // [begin, end) indices into the record arrays
    std::size_t window_end = 0;
    RateKind kind = RateKind::power_law;
};

// Window selection for rate fits. Records are eligible once t >= min_time
// (default max(t_last/10, 10)); of the eligible records the trailing
// `log_time_fraction` share in log-time is fitted. Early windows are
// biased toward shallow slopes, so the default drops the first 90% of the
// time axis and then half of what remains logarithmically.
struct WindowSpec {
    std::optional<double> min_time;
    double log_time_fraction = 0.5;
};

// Least-squares fit of log(loss) against log(t) (power_law) or t
// (exponential) on the trailing window. Requires >= 10 positive-loss
// records in the window, else throws InsufficientData.
RateFit estimate_rate(std::span<const double> times, std::span<const double> losses,
                      RateKind kind, const WindowSpec& window = {});
RateFit estimate_rate(const Trajectory& traj, RateKind kind, const WindowSpec& window = {});

// Linear fit of loss^(-1/3) against t on the trailing half of the time
// span. A high r^2 certifies linear growth of L^(-1/3), i.e. the loss is
// genuinely Theta(t^-3) from below, not just bounded above.
struct LowerBoundFit {
    LinearFit fit;
    std::size_t window_begin = 0;
    std::size_t window_end = 0;
};
LowerBoundFit fit_lower_bound(const Trajectory& traj);

}  // namespace popgrad
