#include "popgrad/util.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace popgrad {

namespace {

double pairwise_sum_impl(const double* xs, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xs[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_impl(xs, half) + pairwise_sum_impl(xs + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> xs) {
    return pairwise_sum_impl(xs.data(), xs.size());
}

double sin_minus_x_cos(double x) {
    const double ax = std::abs(x);
    if (ax >= 0.5) return std::sin(x) - x * std::cos(x);
    // sum_{k>=1} (-1)^(k+1) * x^(2k+1) * 2k / (2k+1)!
    const double x2 = x * x;
    double term = x * x2 / 3.0;  // k = 1
    double sum = term;
    for (int k = 2; k < 30; ++k) {
        // term_k / term_{k-1} = -x^2 * k / ((k-1) (2k+1) (2k))
        term *= -x2 * k / static_cast<double>((k - 1) * (2 * k + 1) * (2 * k));
        sum += term;
        if (std::abs(term) < 1e-20 * std::abs(sum)) break;
    }
    return sum;
}

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, ptr);
}

int worker_count() {
    if (const char* env = std::getenv("POPGRAD_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_blocks(std::int64_t n_blocks, int max_threads,
                     const std::function<void(std::int64_t)>& fn) {
    if (n_blocks <= 0) return;
    const int workers =
        static_cast<int>(std::min<std::int64_t>(n_blocks, std::max(1, max_threads)));
    if (workers == 1) {
        for (std::int64_t b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto work = [&] {
        while (true) {
            const std::int64_t b = next.fetch_add(1);
            if (b >= n_blocks || failed.load()) return;
            try {
                fn(b);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace popgrad
