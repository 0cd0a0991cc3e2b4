#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rost/error.hpp"

namespace rost {

// F(q) = prod_{i<j} q_ij^{n_ij} over s replicas (0-based indices). The empty
// product is 1.
class Monomial {
public:
    struct Factor {
        std::size_t i = 0;
        std::size_t j = 0;
        unsigned power = 0;
    };

    Monomial() = default;

    Monomial(std::size_t replicas, std::vector<Factor> factors) : s_(replicas) {
        for (auto f : factors) {
            if (f.i > f.j) std::swap(f.i, f.j);
            require(f.i != f.j && f.j < s_, "bad-monomial", "factor indices must be distinct and < s");
            if (f.power == 0) continue;
            auto it = std::find_if(factors_.begin(), factors_.end(),
                                   [&](const Factor& g) { return g.i == f.i && g.j == f.j; });
            if (it == factors_.end())
                factors_.push_back(f);
            else
                it->power += f.power;
        }
        std::sort(factors_.begin(), factors_.end(),
                  [](const Factor& a, const Factor& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    }

    // q12^k on two replicas.
    static Monomial pair_power(unsigned k) { return Monomial(2, {{0, 1, k}}); }

    // "1", "q12", "q12^2*q13*q23"; replica labels are single digits 1..9.
    static Monomial parse(const std::string& text) {
        std::vector<Factor> f;
        std::size_t s = 2;
        if (text.empty() || text == "1") return Monomial(s, {});
        std::size_t pos = 0;
        while (pos < text.size()) {
            require(pos + 3 <= text.size() && text[pos] == 'q', "bad-monomial", "cannot parse '" + text + "'");
            const int a = text[pos + 1] - '0', b = text[pos + 2] - '0';
            require(a >= 1 && a <= 9 && b >= 1 && b <= 9 && a != b, "bad-monomial",
                    "replica labels are distinct digits 1..9 in '" + text + "'");
            pos += 3;
            unsigned power = 1;
            if (pos < text.size() && text[pos] == '^') {
                std::size_t used = 0;
                power = static_cast<unsigned>(std::stoul(text.substr(pos + 1), &used));
                pos += 1 + used;
            }
            if (pos < text.size()) {
                require(text[pos] == '*', "bad-monomial", "expected '*' in '" + text + "'");
                ++pos;
            }
            f.push_back({static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1), power});
            s = std::max<std::size_t>(s, static_cast<std::size_t>(std::max(a, b)));
        }
        return Monomial(s, std::move(f));
    }

    std::size_t replicas() const noexcept { return s_; }
    const std::vector<Factor>& factors() const noexcept { return factors_; }

    unsigned total_degree() const noexcept {
        unsigned t = 0;
        for (const auto& f : factors_) t += f.power;
        return t;
    }

    // Number of spin-overlap factors touching replica r.
    unsigned replica_degree(std::size_t r) const noexcept {
        unsigned t = 0;
        for (const auto& f : factors_)
            if (f.i == r || f.j == r) t += f.power;
        return t;
    }

    // True when some replica appears an odd number of times; for spin
    // overlaps the expectation then vanishes under a global flip of that
    // replica.
    bool odd_in_some_replica() const noexcept {
        for (std::size_t r = 0; r < s_; ++r)
            if (replica_degree(r) % 2 == 1) return true;
        return false;
    }

    std::string id() const {
        if (factors_.empty()) return "1";
        std::string out;
        for (const auto& f : factors_) {
            if (!out.empty()) out += '*';
            out += 'q' + std::to_string(f.i + 1) + std::to_string(f.j + 1);
            if (f.power != 1) out += '^' + std::to_string(f.power);
        }
        return out;
    }

    // Evaluate on an overlap matrix accessor q(i, j) for the replica tuple
    // `idx` (idx[r] is the matrix row playing replica r).
    template <class Q, class Idx>
    double evaluate(const Q& q, const Idx& idx) const {
        double v = 1.0;
        for (const auto& f : factors_) {
            const double x = q(idx[f.i], idx[f.j]);
            for (unsigned p = 0; p < f.power; ++p) v *= x;
        }
        return v;
    }

private:
    std::size_t s_ = 2;
    std::vector<Factor> factors_;
};

// Moments reported by the stability and sweep experiments.
inline std::vector<Monomial> standard_moments(std::size_t s) {
    std::vector<Monomial> m;
    for (unsigned k = 1; k <= 4; ++k) m.push_back(Monomial::pair_power(k));
    if (s >= 3) m.push_back(Monomial(3, {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}}));
    return m;
}

}  // namespace rost
