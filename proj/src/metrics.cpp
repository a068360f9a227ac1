#include "qig/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace qig::metrics {

std::string to_string(Kernel k) {
    switch (k) {
    case Kernel::Linear: return "linear";
    case Kernel::Poly2: return "poly";
    case Kernel::Rbf: return "rbf";
    }
    return "?";
}

double kernel_eval(Kernel k, std::span<const double> x, std::span<const double> y) {
    QIG_CHECK(x.size() == y.size(), "kernel operands differ in dimension: ", x.size(),
              " vs ", y.size());
    switch (k) {
    case Kernel::Linear: {
        double dot = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            dot += x[i] * y[i];
        }
        return dot;
    }
    case Kernel::Poly2: {
        double dot = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            dot += x[i] * y[i];
        }
        const double base = dot + 1.0;
        return base * base;
    }
    case Kernel::Rbf: {
        double d2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - y[i];
            d2 += d * d;
        }
        return std::exp(-0.5 * d2);
    }
    }
    fail("bad kernel");
}

namespace {

double cross_sum(Kernel k, const std::vector<std::vector<double>>& a,
                 const std::vector<std::vector<double>>& b) {
    double s = 0.0;
    for (const auto& x : a) {
        for (const auto& y : b) {
            s += kernel_eval(k, x, y);
        }
    }
    return s;
}

} // namespace

double mmd(const std::vector<std::vector<double>>& x,
           const std::vector<std::vector<double>>& y, Kernel kernel) {
    QIG_CHECK(!x.empty() && x.size() == y.size(), "mmd needs equal non-empty sample sets, got ",
              x.size(), " and ", y.size());
    const double k2 = static_cast<double>(x.size()) * static_cast<double>(x.size());
    const double txx = cross_sum(kernel, x, x) / k2;
    const double txy = cross_sum(kernel, x, y) / k2;
    const double tyy = cross_sum(kernel, y, y) / k2;
    return (txx - 2.0 * txy) + tyy;
}

MmdReport mmd_report(const std::vector<std::vector<double>>& x,
                     const std::vector<std::vector<double>>& y) {
    MmdReport r;
    r.linear = mmd(x, y, Kernel::Linear);
    r.poly = mmd(x, y, Kernel::Poly2);
    r.rbf = mmd(x, y, Kernel::Rbf);
    r.sample_count = static_cast<int>(x.size());
    return r;
}

double upper_quartile(std::span<const double> series) {
    QIG_CHECK(!series.empty(), "quartile of an empty series");
    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = 0.75 * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::size_t select_checkpoint(const std::vector<std::vector<double>>& per_kernel_series) {
    QIG_CHECK(!per_kernel_series.empty(), "no kernel series given");
    const std::size_t n = per_kernel_series[0].size();
    QIG_CHECK(n >= 1, "empty checkpoint series");
    for (const auto& s : per_kernel_series) {
        QIG_CHECK(s.size() == n, "kernel series length mismatch");
    }
    std::vector<double> averaged(n, 0.0);
    for (const auto& s : per_kernel_series) {
        const double lo = *std::min_element(s.begin(), s.end());
        const double q3 = upper_quartile(s);
        const double span = q3 - lo;
        for (std::size_t i = 0; i < n; ++i) {
            const double normalized = span > 0.0 ? std::max((s[i] - lo) / span, 0.0) : 0.0;
            averaged[i] += normalized / static_cast<double>(per_kernel_series.size());
        }
    }
    // centered moving average, window 9, truncated at the ends
    std::vector<double> smoothed(n, 0.0);
    const std::ptrdiff_t half = 4;
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, i + half);
        double acc = 0.0;
        for (std::ptrdiff_t j = lo; j <= hi; ++j) {
            acc += averaged[static_cast<std::size_t>(j)];
        }
        smoothed[static_cast<std::size_t>(i)] = acc / static_cast<double>(hi - lo + 1);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (smoothed[i] < smoothed[best]) {
            best = i;
        }
    }
    return best;
}

} // namespace qig::metrics
