#pragma once

#include "qig/dataset.hpp"
#include "qig/discriminator.hpp"
#include "qig/generator.hpp"

#include <string>
#include <vector>

namespace qig::analysis {

/// Layer-resolved subsystem entropies. Layer 0 is the product state after the
/// Hadamard wall; entries are mean / population-std over noise draws, split
/// by mode.
struct EntropyTrace {
    struct Row {
        int layer = 0;
        int mode = 0;
        std::string subset;
        double mean = 0.0;
        double stddev = 0.0;
    };
    std::vector<Row> rows;
};

EntropyTrace layerwise_entropy(const gen::GeneratorConfig& config,
                               std::span<const double> params,
                               const std::vector<std::vector<int>>& subsets,
                               int draws_per_mode, std::uint64_t seed);

void write_entropy_csv(const EntropyTrace& trace, const std::string& path);

/// Relative generator gradient magnitude |grad_theta L_G| / K over a batch of
/// noise draws against the given critic.
double grad_magnitude(const gen::GeneratorConfig& config, std::span<const double> params,
                      const critic::CriticNetwork& net, int batch, std::uint64_t seed);

struct PcaResult {
    std::vector<double> mean;
    std::vector<double> axis; // unit first principal axis (largest-|entry| positive)
    double sigma = 0.0;       // sqrt of the leading covariance eigenvalue
    bool zero_variance = false;
    std::vector<double> plus3;  // mean + 3 sigma axis, clamped to [0,1]
    std::vector<double> minus3; // mean - 3 sigma axis, clamped to [0,1]
};

/// PCA over flattened same-shape samples (covariance divisor k-1).
PcaResult mode_pca(const std::vector<std::vector<double>>& samples);

/// Full spectrum (eigenvalue, axis) pairs sorted by descending eigenvalue.
std::vector<std::pair<double, std::vector<double>>>
pca_components(const std::vector<std::vector<double>>& samples);

} // namespace qig::analysis
