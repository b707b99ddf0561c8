#include "calm/stats.hpp"

#include <algorithm>
#include <cmath>

#include "calm/error.hpp"

namespace calm::stats {

double mean(std::span<const double> v) {
    if (v.empty()) {
        throw ContractError("mean of empty range");
    }
    double s = 0.0;
    for (const double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean(v);
    double ss = 0.0;
    for (const double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::span<const double> v) {
    return quantile(v, 0.5);
}

double quantile(std::span<const double> v, double q) {
    if (v.empty()) {
        throw ContractError("quantile of empty range");
    }
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace calm::stats
