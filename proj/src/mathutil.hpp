#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace cci {

// Standard normal density.
inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// Standard normal CDF via the Abramowitz-Stegun 26.2.17 rational
// approximation (absolute error < 7.5e-8).
double norm_cdf(double x);

// Standard normal quantile, Acklam's rational approximation refined with
// one Halley step (relative error < 1e-12 after refinement).
double norm_quantile(double p);

// Pairwise (cascade) summation over a contiguous range. Deterministic for a
// fixed element order regardless of how callers parallelize upstream work.
double pairwise_sum(std::span<const double> v);

inline double pairwise_mean(std::span<const double> v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

double pairwise_sum(const Eigen::VectorXd& v);
double pairwise_mean(const Eigen::VectorXd& v);

// Sample variance (n-1 denominator) computed with pairwise sums.
double sample_variance(const Eigen::VectorXd& v);

// Pool-adjacent-violators isotonic projection (equal weights, in order).
std::vector<double> isotonic_fit(std::span<const double> y);

// Piecewise-linear interpolation of (xs, ys) with xs strictly increasing;
// clamps outside [xs.front(), xs.back()].
double interp_linear(std::span<const double> xs, std::span<const double> ys, double x);

// Runs fn(block_index, begin, end) over [0, n) split into contiguous blocks,
// using up to `threads` workers. Blocks are assigned whole to workers, so any
// per-block state is race-free; callers needing determinism must combine
// per-block results in block order afterwards.
void parallel_blocks(Eigen::Index n, Eigen::Index block_size, int threads,
                     const std::function<void(int, Eigen::Index, Eigen::Index)>& fn);

int resolve_threads(int requested);

// Parallel map over row blocks with a strictly ordered reduction: compute()
// runs concurrently, merge() is invoked exactly once per block in block-index
// order. Results are therefore identical for any thread count or scheduling.
// A bounded reorder window keeps memory at O(threads) partials.
template <class Partial, class Compute, class Merge>
void ordered_reduce_blocks(Eigen::Index n, Eigen::Index block_size, int threads,
                           const Compute& compute, const Merge& merge) {
    if (n <= 0) return;
    if (block_size <= 0) block_size = n;
    const Eigen::Index nblocks = (n + block_size - 1) / block_size;
    threads = static_cast<int>(std::min<Eigen::Index>(resolve_threads(threads), nblocks));
    if (threads <= 1) {
        for (Eigen::Index b = 0; b < nblocks; ++b)
            merge(compute(b * block_size, std::min(n, (b + 1) * block_size)));
        return;
    }
    std::atomic<Eigen::Index> next{0};
    std::mutex mu;
    std::condition_variable cv;
    std::map<Eigen::Index, Partial> pending;
    Eigen::Index expected = 0;
    const size_t window = static_cast<size_t>(threads) * 4;
    auto worker = [&] {
        for (;;) {
            const Eigen::Index b = next.fetch_add(1);
            if (b >= nblocks) return;
            Partial part = compute(b * block_size, std::min(n, (b + 1) * block_size));
            std::unique_lock lk(mu);
            cv.wait(lk, [&] { return pending.size() < window || b == expected; });
            pending.emplace(b, std::move(part));
            while (!pending.empty() && pending.begin()->first == expected) {
                Partial ready = std::move(pending.begin()->second);
                pending.erase(pending.begin());
                merge(std::move(ready));
                ++expected;
            }
            cv.notify_all();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

} // namespace cci
