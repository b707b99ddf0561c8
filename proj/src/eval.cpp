#include "calm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "calm/error.hpp"
#include "calm/stats.hpp"

namespace calm {

namespace {

// Continued-fraction evaluation of the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) {
        d = kTiny;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const auto md = static_cast<double>(m);
        const double m2 = 2.0 * md;
        double aa = md * (b - md) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) {
            d = kTiny;
        }
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + md) * (qab + md) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) {
            d = kTiny;
        }
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            break;
        }
    }
    return h;
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_classes; ++i) {
        t += at(i, i);
    }
    return t;
}

AccuracyResult accuracy_and_confusion(std::span<const PredictionRecord> records, std::size_t n_classes) {
    if (records.empty()) {
        throw ContractError("accuracy of zero records");
    }
    AccuracyResult out;
    out.confusion = ConfusionMatrix(n_classes);
    for (const auto& r : records) {
        if (r.y < 0 || static_cast<std::size_t>(r.y) >= n_classes || r.y_hat < 0 ||
            static_cast<std::size_t>(r.y_hat) >= n_classes) {
            throw ContractError("prediction record label outside the class set");
        }
        ++out.confusion.at(static_cast<std::size_t>(r.y), static_cast<std::size_t>(r.y_hat));
    }
    out.accuracy = static_cast<double>(out.confusion.trace()) / static_cast<double>(records.size());
    return out;
}

EceResult expected_calibration_error(std::span<const PredictionRecord> records, int n_bins) {
    if (records.empty()) {
        throw ContractError("ECE of zero records");
    }
    if (n_bins < 1) {
        throw ContractError("ECE needs at least 1 bin");
    }
    const auto m = static_cast<std::size_t>(n_bins);
    std::vector<double> conf_sum(m, 0.0);
    std::vector<std::size_t> hits(m, 0);
    std::vector<std::size_t> counts(m, 0);

    for (const auto& r : records) {
        if (!(r.p_hat > 0.0) || r.p_hat > 1.0) {
            throw ContractError("confidence must lie in (0, 1]");
        }
        // bins are left-open: (k/M, (k+1)/M]
        auto bin = static_cast<std::size_t>(std::ceil(r.p_hat * static_cast<double>(m))) - 1;
        bin = std::min(bin, m - 1);
        conf_sum[bin] += r.p_hat;
        counts[bin] += 1;
        if (r.y == r.y_hat) {
            hits[bin] += 1;
        }
    }

    EceResult out;
    out.bins.resize(m);
    const auto n = static_cast<double>(records.size());
    for (std::size_t b = 0; b < m; ++b) {
        out.bins[b].count = counts[b];
        if (counts[b] == 0) {
            continue;
        }
        out.bins[b].mean_confidence = conf_sum[b] / static_cast<double>(counts[b]);
        out.bins[b].accuracy = static_cast<double>(hits[b]) / static_cast<double>(counts[b]);
        out.ece += static_cast<double>(counts[b]) / n *
                   std::abs(out.bins[b].accuracy - out.bins[b].mean_confidence);
    }
    return out;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw ContractError("welch_t_test needs at least 2 values per sample");
    }
    const double mean_a = stats::mean(a);
    const double mean_b = stats::mean(b);
    const double sd_a = stats::sample_std(a);
    const double sd_b = stats::sample_std(b);
    const double var_a = sd_a * sd_a;
    const double var_b = sd_b * sd_b;
    const auto n_a = static_cast<double>(a.size());
    const auto n_b = static_cast<double>(b.size());

    WelchResult out;
    if (var_a + var_b <= 0.0) {
        out.degenerate = true;
        if (mean_a == mean_b) {
            out.t = 0.0;
            out.p = 1.0;
        } else {
            out.t = mean_a > mean_b ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity();
            out.p = 0.0;
        }
        out.df = n_a + n_b - 2.0;
        return out;
    }

    const double se_a = var_a / n_a;
    const double se_b = var_b / n_b;
    out.t = (mean_a - mean_b) / std::sqrt(se_a + se_b);
    out.df = (se_a + se_b) * (se_a + se_b) /
             (se_a * se_a / (n_a - 1.0) + se_b * se_b / (n_b - 1.0));
    // two-sided p through the Student-t CDF
    const double x = out.df / (out.df + out.t * out.t);
    out.p = regularized_incomplete_beta(out.df / 2.0, 0.5, x);
    return out;
}

std::string_view to_string(GroupBy g) {
    return g == GroupBy::light ? "light" : "task";
}

GroupBy group_by_from_string(std::string_view s) {
    if (s == "light") return GroupBy::light;
    if (s == "task") return GroupBy::task;
    throw ValidationError("group-by must be light or task, got '" + std::string(s) + "'");
}

std::vector<FeatureDistribution> feature_distribution_summary(const FeatureMatrix& matrix, GroupBy group_by) {
    const auto group_of = [&](const FeatureRow& row) {
        return group_by == GroupBy::light ? std::string(to_string(row.light))
                                          : std::string(to_string(row.label));
    };
    std::vector<std::string> group_names;
    if (group_by == GroupBy::light) {
        group_names = {"light", "dark"};
    } else {
        group_names = {"rest", "cl1", "cl2"};
    }

    std::vector<FeatureDistribution> out;
    for (const std::size_t f : matrix.active_features()) {
        FeatureDistribution dist;
        dist.feature = std::string(kFeatureNames[f]);

        std::vector<std::vector<double>> per_group(group_names.size());
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& row : matrix.rows) {
            const double v = row.features[f];
            if (!std::isfinite(v)) {
                continue;
            }
            const auto g = std::find(group_names.begin(), group_names.end(), group_of(row));
            per_group[static_cast<std::size_t>(g - group_names.begin())].push_back(v);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(lo <= hi)) {
            continue; // feature entirely missing
        }
        if (lo == hi) {
            hi = lo + 1.0; // degenerate range, keep bins well-formed
        }
        dist.range_lo = lo;
        dist.range_hi = hi;

        for (std::size_t g = 0; g < group_names.size(); ++g) {
            const auto& values = per_group[g];
            if (values.empty()) {
                continue;
            }
            GroupSummary s;
            s.group = group_names[g];
            s.count = values.size();
            s.min = *std::min_element(values.begin(), values.end());
            s.max = *std::max_element(values.begin(), values.end());
            s.q1 = stats::quantile(values, 0.25);
            s.median = stats::quantile(values, 0.5);
            s.q3 = stats::quantile(values, 0.75);
            s.mean = stats::mean(values);
            s.stddev = stats::sample_std(values);
            s.histogram.assign(kHistogramBins, 0);
            for (const double v : values) {
                auto bin = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(kHistogramBins));
                bin = std::min(bin, kHistogramBins - 1);
                ++s.histogram[bin];
            }
            dist.groups.push_back(std::move(s));
        }
        out.push_back(std::move(dist));
    }
    return out;
}

} // namespace calm
