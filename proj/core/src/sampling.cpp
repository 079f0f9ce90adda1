#include "popgrad/sampling.hpp"

#include "popgrad/rng.hpp"
#include "popgrad/util.hpp"

#include <cmath>
#include <vector>

namespace popgrad {

double residual_pointwise(const StudentParams& w, const TeacherConfig& teacher,
                          const RealVector& x) {
    double acc = 0.0;
    for (int i = 0; i < w.n(); ++i) acc += std::max(0.0, w.row(i).dot(x.transpose()));
    return acc - std::max(0.0, teacher.v.dot(x));
}

namespace {

constexpr std::uint64_t kBlockSize = 4096;

// Chan et al. streaming moments; merging two accumulators is exact in the
// sense that the merge order is fixed by block index, never by thread.
struct ScalarMoments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        count += 1.0;
        const double delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
    }

    void merge(const ScalarMoments& o) {
        if (o.count == 0.0) return;
        if (count == 0.0) {
            *this = o;
            return;
        }
        const double total = count + o.count;
        const double delta = o.mean - mean;
        mean += delta * o.count / total;
        m2 += o.m2 + delta * delta * count * o.count / total;
        count = total;
    }

    double std_error() const {
        if (count < 2.0) return 0.0;
        return std::sqrt(m2 / (count - 1.0)) / std::sqrt(count);
    }
};

struct MatrixMoments {
    double count = 0.0;
    RealMatrix mean;
    RealMatrix m2;

    MatrixMoments(int n, int d) : mean(RealMatrix::Zero(n, d)), m2(RealMatrix::Zero(n, d)) {}

    void add(const RealMatrix& x) {
        count += 1.0;
        const RealMatrix delta = x - mean;
        mean += delta / count;
        m2.array() += delta.array() * (x - mean).array();
    }

    void merge(const MatrixMoments& o) {
        if (o.count == 0.0) return;
        if (count == 0.0) {
            *this = o;
            return;
        }
        const double total = count + o.count;
        const RealMatrix delta = o.mean - mean;
        mean += delta * (o.count / total);
        m2.array() += o.m2.array() + delta.array().square() * (count * o.count / total);
        count = total;
    }
};

template <typename Acc>
void pairwise_merge(std::vector<Acc>& blocks) {
    for (std::size_t step = 1; step < blocks.size(); step *= 2)
        for (std::size_t i = 0; i + step < blocks.size(); i += 2 * step)
            blocks[i].merge(blocks[i + step]);
}

}  // namespace

McEstimate mc_loss(const StudentParams& w, const TeacherConfig& teacher,
                   std::uint64_t n_samples, std::uint64_t seed, int threads) {
    if (n_samples < 2) throw BadParam("mc_loss: n_samples must be >= 2");
    require_finite(w, "mc_loss");
    const int d = w.d();
    if (d != teacher.d()) throw BadParam("mc_loss: dimension mismatch");

    const std::int64_t n_blocks =
        static_cast<std::int64_t>((n_samples + kBlockSize - 1) / kBlockSize);
    std::vector<ScalarMoments> blocks(n_blocks);
    const int workers = threads > 0 ? threads : worker_count();

    parallel_blocks(n_blocks, workers, [&](std::int64_t b) {
        const std::uint64_t lo = static_cast<std::uint64_t>(b) * kBlockSize;
        const std::uint64_t hi = std::min(n_samples, lo + kBlockSize);
        RealVector x(d);
        ScalarMoments acc;
        for (std::uint64_t k = lo; k < hi; ++k) {
            CounterRng rng(seed, k);
            rng.fill_normal(x.data(), d);
            const double r = residual_pointwise(w, teacher, x);
            acc.add(0.5 * r * r);
        }
        blocks[b] = acc;
    });

    pairwise_merge(blocks);
    return McEstimate{blocks[0].mean, blocks[0].std_error(), n_samples, seed};
}

McGradient mc_gradient(const StudentParams& w, const TeacherConfig& teacher,
                       std::uint64_t n_samples, std::uint64_t seed, int threads) {
    if (n_samples < 2) throw BadParam("mc_gradient: n_samples must be >= 2");
    require_finite(w, "mc_gradient");
    const int n = w.n();
    const int d = w.d();
    if (d != teacher.d()) throw BadParam("mc_gradient: dimension mismatch");
    for (int i = 0; i < n; ++i)
        if (w.row(i).norm() < 1e-300) throw DegenerateNeuron(i);

    const std::int64_t n_blocks =
        static_cast<std::int64_t>((n_samples + kBlockSize - 1) / kBlockSize);
    std::vector<MatrixMoments> blocks(n_blocks, MatrixMoments(n, d));
    const int workers = threads > 0 ? threads : worker_count();

    parallel_blocks(n_blocks, workers, [&](std::int64_t b) {
        const std::uint64_t lo = static_cast<std::uint64_t>(b) * kBlockSize;
        const std::uint64_t hi = std::min(n_samples, lo + kBlockSize);
        RealVector x(d);
        RealMatrix sample(n, d);
        MatrixMoments acc(n, d);
        for (std::uint64_t k = lo; k < hi; ++k) {
            CounterRng rng(seed, k);
            rng.fill_normal(x.data(), d);
            const double r = residual_pointwise(w, teacher, x);
            for (int i = 0; i < n; ++i) {
                const bool active = w.row(i).dot(x.transpose()) >= 0.0;
                sample.row(i) = active ? (r * x).transpose() : Eigen::RowVectorXd::Zero(d);
            }
            acc.add(sample);
        }
        blocks[b] = acc;
    });

    pairwise_merge(blocks);
    McGradient out;
    out.mean = blocks[0].mean;
    const double c = blocks[0].count;
    out.std_error = (blocks[0].m2 / (c - 1.0)).cwiseSqrt() / std::sqrt(c);
    out.n_samples = n_samples;
    out.seed = seed;
    return out;
}

}  // namespace popgrad
