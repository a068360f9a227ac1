#include "qig/analysis.hpp"

#include "qig/trainer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>

namespace qig::analysis {

namespace {

std::string subset_name(const std::vector<int>& subset) {
    std::string s;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        s += std::to_string(subset[i]);
        if (i + 1 < subset.size()) {
            s += '+';
        }
    }
    return s;
}

} // namespace

EntropyTrace layerwise_entropy(const gen::GeneratorConfig& config,
                               std::span<const double> params,
                               const std::vector<std::vector<int>>& subsets,
                               int draws_per_mode, std::uint64_t seed) {
    QIG_CHECK(!subsets.empty(), "no qubit subsets given");
    QIG_CHECK(draws_per_mode >= 1, "draws_per_mode must be >= 1");
    const int n = config.qubit_count();
    const int layers = config.layers;
    Rng rng(seed);

    // accumulate sum and sum of squares per (layer, mode, subset)
    const std::size_t cells =
        static_cast<std::size_t>(layers + 1) * config.modes * subsets.size();
    std::vector<double> sum(cells, 0.0);
    std::vector<double> sum_sq(cells, 0.0);
    const auto cell = [&](int layer, int mode, std::size_t subset) {
        return (static_cast<std::size_t>(layer) * config.modes + mode) * subsets.size() +
               subset;
    };

    for (int mode = 0; mode < config.modes; ++mode) {
        for (int d = 0; d < draws_per_mode; ++d) {
            gen::NoiseDraw draw;
            draw.mode = mode;
            draw.epsilon.resize(static_cast<std::size_t>(config.noise_dim()));
            for (double& e : draw.epsilon) {
                e = rng.normal();
            }
            const gen::GateProgram program = gen::build_program(config, params, draw);
            sv::QuantumState state = sv::QuantumState::zero(n);
            std::size_t gate = 0;
            for (int layer = 0; layer <= layers; ++layer) {
                const std::size_t end = program.layer_end[static_cast<std::size_t>(layer)];
                for (; gate < end; ++gate) {
                    gen::apply_gate(state, program.gates[gate]);
                }
                for (std::size_t s = 0; s < subsets.size(); ++s) {
                    const double bits =
                        sv::entropy_bits(sv::reduced_density(state, subsets[s]));
                    sum[cell(layer, mode, s)] += bits;
                    sum_sq[cell(layer, mode, s)] += bits * bits;
                }
            }
        }
    }

    EntropyTrace trace;
    for (int layer = 0; layer <= layers; ++layer) {
        for (int mode = 0; mode < config.modes; ++mode) {
            for (std::size_t s = 0; s < subsets.size(); ++s) {
                const double k = static_cast<double>(draws_per_mode);
                const double mean = sum[cell(layer, mode, s)] / k;
                const double var =
                    std::max(sum_sq[cell(layer, mode, s)] / k - mean * mean, 0.0);
                trace.rows.push_back(
                    {layer, mode, subset_name(subsets[s]), mean, std::sqrt(var)});
            }
        }
    }
    return trace;
}

void write_entropy_csv(const EntropyTrace& trace, const std::string& path) {
    std::ofstream os(path);
    QIG_CHECK(os.is_open(), "cannot write ", path);
    os << "layer,mode,subset,mean,std\n";
    for (const auto& r : trace.rows) {
        os << r.layer << ',' << r.mode << ',' << r.subset << ',' << r.mean << ','
           << r.stddev << '\n';
    }
    QIG_CHECK(os.good(), "write failed: ", path);
}

double grad_magnitude(const gen::GeneratorConfig& config, std::span<const double> params,
                      const critic::CriticNetwork& net, int batch, std::uint64_t seed) {
    QIG_CHECK(batch >= 1, "batch must be >= 1");
    Rng rng(seed);
    std::vector<gen::NoiseDraw> draws(static_cast<std::size_t>(batch));
    for (auto& d : draws) {
        d = gen::sample_noise(config, rng);
    }
    const train::LossAndGrad g =
        train::generator_loss_and_grad(config, params, draws, net, std::nullopt, nullptr);
    double norm_sq = 0.0;
    for (double v : g.grad) {
        norm_sq += v * v;
    }
    return std::sqrt(norm_sq) / static_cast<double>(params.size());
}

std::vector<std::pair<double, std::vector<double>>>
pca_components(const std::vector<std::vector<double>>& samples) {
    QIG_CHECK(samples.size() >= 2, "PCA needs at least 2 samples, got ", samples.size());
    const std::size_t dim = samples[0].size();
    for (const auto& s : samples) {
        QIG_CHECK(s.size() == dim, "PCA sample dimension mismatch");
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < dim; ++i) {
            mean[static_cast<Eigen::Index>(i)] += s[i];
        }
    }
    mean /= static_cast<double>(samples.size());
    Eigen::MatrixXd cov =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (const auto& s : samples) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) {
            c[static_cast<Eigen::Index>(i)] = s[i];
        }
        c -= mean;
        cov.noalias() += c * c.transpose();
    }
    cov /= static_cast<double>(samples.size() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    QIG_CHECK(solver.info() == Eigen::Success, "PCA eigendecomposition failed");

    std::vector<std::pair<double, std::vector<double>>> components;
    components.reserve(dim);
    for (Eigen::Index i = static_cast<Eigen::Index>(dim) - 1; i >= 0; --i) {
        Eigen::VectorXd axis = solver.eigenvectors().col(i);
        // deterministic sign: largest-|entry| coordinate positive
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis[arg] < 0.0) {
            axis = -axis;
        }
        components.emplace_back(std::max(solver.eigenvalues()[i], 0.0),
                                std::vector<double>(axis.data(), axis.data() + dim));
    }
    return components;
}

PcaResult mode_pca(const std::vector<std::vector<double>>& samples) {
    const auto components = pca_components(samples);
    const std::size_t dim = samples[0].size();
    PcaResult r;
    r.mean.assign(dim, 0.0);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < dim; ++i) {
            r.mean[i] += s[i];
        }
    }
    for (double& v : r.mean) {
        v /= static_cast<double>(samples.size());
    }
    const double lambda = components[0].first;
    if (lambda <= 1e-18) {
        r.zero_variance = true;
        r.axis.assign(dim, 0.0);
        r.sigma = 0.0;
        r.plus3 = r.mean;
        r.minus3 = r.mean;
        return r;
    }
    r.axis = components[0].second;
    r.sigma = std::sqrt(lambda);
    r.plus3.resize(dim);
    r.minus3.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        r.plus3[i] = std::clamp(r.mean[i] + 3.0 * r.sigma * r.axis[i], 0.0, 1.0);
        r.minus3[i] = std::clamp(r.mean[i] - 3.0 * r.sigma * r.axis[i], 0.0, 1.0);
    }
    return r;
}

} // namespace qig::analysis
