#pragma once

#include <span>
#include <vector>

namespace calm::stats {

double mean(std::span<const double> v);

/// Sample standard deviation (n-1 divisor). Zero for fewer than 2 values.
double sample_std(std::span<const double> v);

double median(std::span<const double> v);

/// Linear-interpolation quantile (the numpy default), q in [0, 1].
double quantile(std::span<const double> v, double q);

} // namespace calm::stats
