#include "mathutil.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "errors.hpp"

namespace cci {

double norm_cdf(double x) {
    // A&S 26.2.17: 1 - phi(x)(b1 t + ... + b5 t^5), t = 1/(1 + p x), x >= 0.
    static const double p = 0.2316419;
    static const double b1 = 0.319381530, b2 = -0.356563782, b3 = 1.781477937,
                        b4 = -1.821255978, b5 = 1.330274429;
    const double ax = std::fabs(x);
    const double t = 1.0 / (1.0 + p * ax);
    const double poly = t * (b1 + t * (b2 + t * (b3 + t * (b4 + t * b5))));
    const double tail = norm_pdf(ax) * poly;
    return x >= 0.0 ? 1.0 - tail : tail;
}

double norm_quantile(double p) {
    require(p > 0.0 && p < 1.0, ErrorCode::invalid_argument,
            "norm_quantile: p must be in (0,1)");
    // Acklam's approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    static const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley refinement against the erfc-based CDF.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

namespace {
double pairwise_sum_impl(const double* v, size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum_impl(v, half) + pairwise_sum_impl(v + half, n - half);
}
} // namespace

double pairwise_sum(std::span<const double> v) {
    return pairwise_sum_impl(v.data(), v.size());
}

double pairwise_sum(const Eigen::VectorXd& v) {
    return pairwise_sum_impl(v.data(), static_cast<size_t>(v.size()));
}

double pairwise_mean(const Eigen::VectorXd& v) {
    return v.size() == 0 ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

double sample_variance(const Eigen::VectorXd& v) {
    const auto n = v.size();
    if (n < 2) return 0.0;
    const double m = pairwise_mean(v);
    Eigen::VectorXd d = (v.array() - m).square().matrix();
    return pairwise_sum(d) / static_cast<double>(n - 1);
}

std::vector<double> isotonic_fit(std::span<const double> y) {
    struct Block {
        double value;
        size_t count;
    };
    std::vector<Block> stack;
    stack.reserve(y.size());
    for (double v : y) {
        Block cur{v, 1};
        while (!stack.empty() && stack.back().value > cur.value) {
            const Block& prev = stack.back();
            cur.value = (prev.value * static_cast<double>(prev.count) +
                         cur.value * static_cast<double>(cur.count)) /
                        static_cast<double>(prev.count + cur.count);
            cur.count += prev.count;
            stack.pop_back();
        }
        stack.push_back(cur);
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (const Block& b : stack) out.insert(out.end(), b.count, b.value);
    return out;
}

double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
    if (xs.empty()) return 0.0;
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const size_t hi = static_cast<size_t>(it - xs.begin());
    const size_t lo = hi - 1;
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] * (1.0 - w) + ys[hi] * w;
}

void parallel_blocks(Eigen::Index n, Eigen::Index block_size, int threads,
                     const std::function<void(int, Eigen::Index, Eigen::Index)>& fn) {
    if (n <= 0) return;
    if (block_size <= 0) block_size = n;
    const Eigen::Index nblocks = (n + block_size - 1) / block_size;
    threads = std::min<Eigen::Index>(resolve_threads(threads), nblocks);
    if (threads <= 1) {
        for (Eigen::Index b = 0; b < nblocks; ++b)
            fn(static_cast<int>(b), b * block_size, std::min(n, (b + 1) * block_size));
        return;
    }
    std::atomic<Eigen::Index> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const Eigen::Index b = next.fetch_add(1);
                if (b >= nblocks) return;
                fn(static_cast<int>(b), b * block_size, std::min(n, (b + 1) * block_size));
            }
        });
    }
    for (auto& th : pool) th.join();
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace cci
