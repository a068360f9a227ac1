#pragma once

#include "qig/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace qig::metrics {

enum class Kernel : std::uint8_t { Linear, Poly2, Rbf };

std::string to_string(Kernel k);

/// linear: x.y; poly2: (x.y + 1)^2; rbf: exp(-|x-y|^2 / 2) (unit bandwidth).
double kernel_eval(Kernel k, std::span<const double> x, std::span<const double> y);

/// Biased V-statistic MMD with self-terms, exactly
///   (1/k^2) [ sum K(x,x') - 2 sum K(x,y) + sum K(y,y') ].
/// X and Y are flattened samples of equal count and dimension.
double mmd(const std::vector<std::vector<double>>& x,
           const std::vector<std::vector<double>>& y, Kernel kernel);

struct MmdReport {
    double linear = 0.0;
    double poly = 0.0;
    double rbf = 0.0;
    int sample_count = 0;
};

MmdReport mmd_report(const std::vector<std::vector<double>>& x,
                     const std::vector<std::vector<double>>& y);

/// Upper quartile by linear interpolation on the sorted series.
double upper_quartile(std::span<const double> series);

/// Checkpoint selection: per kernel, normalize to (s - min) / (Q3 - min)
/// clipped at zero (a degenerate Q3 == min collapses the series to zeros),
/// average across kernels, smooth with a centered moving average of window 9
/// truncated at the boundaries, and return the argmin (earliest on ties).
std::size_t select_checkpoint(const std::vector<std::vector<double>>& per_kernel_series);

} // namespace qig::metrics
