#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rost/error.hpp"
#include "rost/gibbs/model.hpp"
#include "rost/random.hpp"
#include "rost/spins.hpp"

namespace rost {

struct Autocorrelation {
    double tau = 0.5;        // integrated autocorrelation time, in samples
    std::size_t window = 0;  // summation window M
    bool reliable = true;    // window found well inside the series
};

// Integrated autocorrelation time with Sokal's self-consistent window:
// tau(M) = 1/2 + sum_{t=1..M} rho(t), M the smallest lag with M >= c tau(M).
inline Autocorrelation integrated_autocorrelation(std::span<const double> x, double c = 6.0) {
    const std::size_t n = x.size();
    Autocorrelation out;
    if (n < 4) {
        out.reliable = false;
        return out;
    }
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    auto cov = [&](std::size_t t) {
        double s = 0.0;
        for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - mean) * (x[i + t] - mean);
        return s / static_cast<double>(n - t);
    };
    const double c0 = cov(0);
    // A series constant up to round-off carries no correlation to measure.
    const double noise = 1e-12 * std::max(1.0, std::abs(mean));
    if (c0 <= noise * noise) return out;
    double tau = 0.5;
    for (std::size_t t = 1; t < n / 2; ++t) {
        tau += cov(t) / c0;
        if (static_cast<double>(t) >= c * tau) {
            out.tau = std::max(tau, 0.5);
            out.window = t;
            out.reliable = t < n / 4;
            return out;
        }
    }
    out.tau = std::max(tau, 0.5);
    out.window = n / 2;
    out.reliable = false;
    return out;
}

// Single-site Metropolis chain for a PairModel whose bond weights are scaled
// by `beta` (so a model built at inverse temperature 1 is run at beta).
class MetropolisChain {
public:
    MetropolisChain(const PairModel& m, double beta, Rng rng)
        : m_(&m), beta_(beta), rng_(rng), s_(m.vertex_count()) {
        for (auto& x : s_) x = (rng_() >> 63) ? Spin{-1} : Spin{1};
        lw_ = m_->log_weight(s_);
    }

    void sweep() noexcept {
        const std::size_t n = s_.size();
        const auto off = m_->offsets();
        const auto nbr = m_->neighbor_list();
        const auto w = m_->neighbor_weights();
        Spin* s = s_.data();
        for (std::size_t x = 0; x < n; ++x) {
            double h = 0.0;
            for (std::size_t k = off[x]; k < off[x + 1]; ++k) h += w[k] * s[nbr[k]];
            const double d = -2.0 * s[x] * h;  // change of the unscaled log weight
            const double a = beta_ * d;
            if (a >= 0.0 || rng_.uniform() < std::exp(a)) {
                s[x] = static_cast<Spin>(-s[x]);
                lw_ += d;
            }
        }
    }

    void run(std::size_t sweeps) noexcept {
        for (std::size_t i = 0; i < sweeps; ++i) sweep();
    }

    double beta() const noexcept { return beta_; }
    // Unscaled log weight sum w s s (= -H for a model built at beta 1).
    double log_weight() const noexcept { return lw_; }
    const SpinConfig& spins() const noexcept { return s_; }
    Rng& rng() noexcept { return rng_; }

    void swap_state(MetropolisChain& other) noexcept {
        std::swap(s_, other.s_);
        std::swap(lw_, other.lw_);
    }

    void resync() { lw_ = m_->log_weight(s_); }

private:
    const PairModel* m_;
    double beta_;
    Rng rng_;
    SpinConfig s_;
    double lw_ = 0.0;
};

// Replica-exchange sampler over an ascending geometric ladder whose last
// rung is the target inverse temperature.
class ParallelTempering {
public:
    ParallelTempering(const PairModel& m, std::vector<double> ladder, Rng rng)
        : ladder_(std::move(ladder)), rng_(rng) {
        require(!ladder_.empty(), "bad-sampler-config", "empty temperature ladder");
        chains_.reserve(ladder_.size());
        for (std::size_t k = 0; k < ladder_.size(); ++k)
            chains_.emplace_back(m, ladder_[k], Rng(rng_()));
        attempts_.assign(ladder_.size() > 1 ? ladder_.size() - 1 : 0, 0);
        accepts_.assign(attempts_.size(), 0);
    }

    static std::vector<double> geometric_ladder(double beta_min, double beta, std::size_t rungs) {
        if (rungs <= 1 || beta <= beta_min) return {beta};
        std::vector<double> b(rungs);
        for (std::size_t k = 0; k < rungs; ++k)
            b[k] = beta_min * std::pow(beta / beta_min, static_cast<double>(k) / static_cast<double>(rungs - 1));
        b.back() = beta;
        return b;
    }

    // One Metropolis sweep on every rung, then swap attempts on even or odd
    // neighbor pairs alternately.
    void step() {
        for (auto& c : chains_) c.sweep();
        for (std::size_t k = parity_; k + 1 < chains_.size(); k += 2) {
            ++attempts_[k];
            const double a =
                (ladder_[k] - ladder_[k + 1]) * (chains_[k + 1].log_weight() - chains_[k].log_weight());
            if (a >= 0.0 || rng_.uniform() < std::exp(a)) {
                chains_[k].swap_state(chains_[k + 1]);
                ++accepts_[k];
            }
        }
        parity_ ^= 1u;
    }

    const MetropolisChain& target() const { return chains_.back(); }
    const std::vector<double>& ladder() const noexcept { return ladder_; }

    std::vector<double> swap_acceptance() const {
        std::vector<double> out(attempts_.size(), 0.0);
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] = attempts_[k] ? static_cast<double>(accepts_[k]) / static_cast<double>(attempts_[k]) : 0.0;
        return out;
    }

private:
    std::vector<double> ladder_;
    Rng rng_;
    std::vector<MetropolisChain> chains_;
    std::vector<std::size_t> attempts_;
    std::vector<std::size_t> accepts_;
    unsigned parity_ = 0;
};

}  // namespace rost
