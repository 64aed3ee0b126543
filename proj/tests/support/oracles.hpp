#pragma once

// Reference implementations used to check the library. They follow the
// textbook definitions directly and share no code with src/.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// One MTLD pass with the threshold given as the fraction num/den. Every
// prefix of the current factor is re-counted from scratch, and the TTR
// comparison is done in integers: types/len <= num/den.
inline std::optional<double> mtld_pass(const std::vector<std::string>& tokens, long num, long den) {
    std::size_t start = 0;
    double factors = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::set<std::string> seen(tokens.begin() + static_cast<long>(start), tokens.begin() + static_cast<long>(i) + 1);
        const long types = static_cast<long>(seen.size());
        const long len = static_cast<long>(i + 1 - start);
        if (types * den <= num * len) {
            factors += 1.0;
            start = i + 1;
        }
    }
    if (start < tokens.size()) {
        std::set<std::string> seen(tokens.begin() + static_cast<long>(start), tokens.end());
        const double ttr = static_cast<double>(seen.size()) / static_cast<double>(tokens.size() - start);
        const double thr = static_cast<double>(num) / static_cast<double>(den);
        factors += (1.0 - ttr) / (1.0 - thr);
    }
    if (factors == 0.0) {
        return std::nullopt;
    }
    return static_cast<double>(tokens.size()) / factors;
}

inline std::optional<double> mtld(const std::vector<std::string>& tokens, long num = 72, long den = 100) {
    auto fwd = mtld_pass(tokens, num, den);
    std::vector<std::string> rev;
    for (std::size_t i = tokens.size(); i > 0; --i) {
        rev.push_back(tokens[i - 1]);
    }
    auto bwd = mtld_pass(rev, num, den);
    if (!fwd || !bwd) {
        return std::nullopt;
    }
    return 0.5 * (*fwd + *bwd);
}

struct TTest {
    double t;
    double df;
    double p;
};

// Paired t-test via Boost.Math's Student t distribution. Two-pass variance.
inline TTest paired_t(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> d(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = x[i] - y[i];
        mean += d[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const double df = static_cast<double>(n - 1);
    boost::math::students_t dist(df);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    return {t, df, p};
}

// Cohen's kappa from an explicit confusion matrix.
inline double kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::string, std::map<std::string, double>> m;
    std::set<std::string> labels;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m[a[i]][b[i]] += 1.0;
        labels.insert(a[i]);
        labels.insert(b[i]);
    }
    const double n = static_cast<double>(a.size());
    double po = 0.0;
    double pe = 0.0;
    for (const auto& l : labels) {
        po += m[l][l];
        double row = 0.0;
        double col = 0.0;
        for (const auto& k : labels) {
            row += m[l][k];
            col += m[k][l];
        }
        pe += (row / n) * (col / n);
    }
    po /= n;
    return (po - pe) / (1.0 - pe);
}

// Largest number of timestamps inside any half-open window [t, t + width).
// Quadratic on purpose: every timestamp is tried as a window start.
template <class Duration>
std::size_t max_in_window(const std::vector<Duration>& times, Duration width) {
    std::size_t best = 0;
    for (const auto& start : times) {
        std::size_t n = 0;
        for (const auto& t : times) {
            if (t >= start && t < start + width) {
                ++n;
            }
        }
        best = std::max(best, n);
    }
    return best;
}

}  // namespace oracle
