#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "rost/error.hpp"

namespace rost::stats {

// Welford running mean and variance.
class Accumulator {
public:
    void add(double x) noexcept {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    // Chan et al. pairwise combination; order of merges fixes the rounding.
    void merge(const Accumulator& o) noexcept {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double n = static_cast<double>(n_ + o.n_);
        const double d = o.mean_ - mean_;
        mean_ += d * static_cast<double>(o.n_) / n;
        m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
        n_ += o.n_;
    }

    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stddev() const noexcept { return std::sqrt(variance()); }
    double stderr_mean() const noexcept {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline Accumulator accumulate(std::span<const double> xs) {
    Accumulator a;
    for (double x : xs) a.add(x);
    return a;
}

inline double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

// Effective sample size (sum w)^2 / sum w^2.
inline double effective_sample_size(std::span<const double> w) {
    double s = 0.0, s2 = 0.0;
    for (double x : w) {
        s += x;
        s2 += x * x;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

// Asymptotic Kolmogorov critical coefficient c(alpha); D_crit = c / sqrt(n_eff).
inline double ks_coefficient(double alpha) { return std::sqrt(-0.5 * std::log(alpha / 2.0)); }

// Two-sample Kolmogorov–Smirnov statistic sup |F_a - F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), "empty-sample", "KS needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

inline double ks_two_sample_critical(std::size_t n, std::size_t m, double alpha) {
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return ks_coefficient(alpha) * std::sqrt((dn + dm) / (dn * dm));
}

// One-sample KS statistic against Uniform(0, 1).
inline double ks_uniform(std::vector<double> p) {
    require(!p.empty(), "empty-sample", "KS needs a non-empty sample");
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double x = std::clamp(p[i], 0.0, 1.0);
        d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
    }
    return d;
}

inline double ks_one_sample_critical(std::size_t n, double alpha) {
    return ks_coefficient(alpha) / std::sqrt(static_cast<double>(n));
}

// KS distance between two laws given as probability masses on a shared,
// sorted support.
inline double ks_discrete(std::span<const double> pa, std::span<const double> pb) {
    require(pa.size() == pb.size(), "size-mismatch", "discrete KS needs a shared support");
    double ca = 0.0, cb = 0.0, d = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        ca += pa[i];
        cb += pb[i];
        d = std::max(d, std::abs(ca - cb));
    }
    return d;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "bad-fit", "need at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "bad-fit", "x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            rss += r * r;
        }
        f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return f;
}

}  // namespace rost::stats
