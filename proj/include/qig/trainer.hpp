#pragma once

#include "qig/dataset.hpp"
#include "qig/discriminator.hpp"
#include "qig/generator.hpp"
#include "qig/metrics.hpp"

#include <optional>
#include <string>

namespace qig::train {

/// WGAN-GP schedule. Defaults follow the published setup: Adam(0.5, 0.9),
/// gradient-penalty coefficient 10, ten critic updates per generator update,
/// checkpoints every 500 iterations, critic learning rate = generator / 10.
struct TrainConfig {
    int batch = 64;
    double lr_g = 0.0025;
    double lr_d = 0.00025;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double adam_eps = 1e-8;
    double lambda = 10.0;
    int n_critic = 10;
    int iterations = 0;
    double sigma_init = 0.1;        // stddev of the general parameter init
    double noise_init_factor = 0.1; // noise-tuning blocks start at sigma_init/10
    std::optional<std::uint64_t> shots;
    int checkpoint_interval = 500;
    std::uint64_t seed = 1;
    int mmd_samples = 512;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    static AdamState zeros(std::size_t n) {
        AdamState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        return s;
    }
};

/// Standard bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps);

/// L_G = -mean of the critic scores of a generated batch.
double generator_loss(std::span<const double> fake_scores);

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Penalized critic loss over paired batches,
///   mean_b [ D(fake_b) - D(real_b) + lambda (|grad_xhat D(xhat_b)|_2 - 1)^2 ],
/// with xhat_b = u_b real_b + (1 - u_b) fake_b. Returns the gradient with
/// respect to the packed critic parameters. `u` holds one interpolation
/// coefficient per pair.
LossAndGrad critic_loss(const std::vector<codec::ImageTensor>& reals,
                        const std::vector<codec::ImageTensor>& fakes,
                        const critic::CriticNetwork& net, double lambda,
                        std::span<const double> u);

/// Generator objective over a batch of noise draws: builds circuit ->
/// probabilities [-> shot perturbation] -> decode -> critic score per element
/// and returns L_G with its gradient w.r.t. the flat generator parameters.
/// `shot_rngs` supplies one child stream per element when shots are set.
LossAndGrad generator_loss_and_grad(const gen::GeneratorConfig& config,
                                    std::span<const double> params,
                                    const std::vector<gen::NoiseDraw>& draws,
                                    const critic::CriticNetwork& net,
                                    std::optional<std::uint64_t> shots,
                                    std::vector<Rng>* shot_rngs);

struct Checkpoint {
    static constexpr int kFormatVersion = 1;
    std::int64_t iteration = 0;
    gen::GeneratorConfig gen_config;
    critic::CriticConfig critic_config;
    TrainConfig train_config;
    std::vector<double> gen_params;
    AdamState gen_adam;
    std::vector<double> critic_params;
    AdamState critic_adam;
    Rng rng;
};

/// Writes base.json (manifest) + base.bin (little-endian doubles), atomically
/// via a temp file + rename.
void save_checkpoint(const Checkpoint& ckpt, const std::string& base_path);
Checkpoint load_checkpoint(const std::string& json_path);

std::uint64_t config_hash(const gen::GeneratorConfig& g, const critic::CriticConfig& c,
                          const TrainConfig& t);

struct TrainResult {
    std::string run_dir;
    std::string metrics_path;
    std::vector<std::string> checkpoints; // .json manifest paths, iteration order
    double initial_rbf_mmd = 0.0;
    double final_rbf_mmd = 0.0;
    std::int64_t final_iteration = 0;
};

/// Full training run. Per generator iteration: n_critic critic updates on
/// fresh real/fake batches, then one generator update. Writes the resolved
/// config, a metrics CSV (iteration,loss_g,loss_d,mmd_linear,mmd_poly,mmd_rbf,
/// MMD columns filled at checkpoint intervals) and checkpoint files into
/// out_dir. Fully deterministic per seed.
///
/// Draw order per critic step: B real indices, then B noise draws (mode, then
/// epsilon components), then B interpolation coefficients, then (shots only)
/// B child streams. Per generator step: B noise draws, then (shots only) B
/// child streams. Initialization draws the generator parameter vector in flat
/// index order, then the critic weights. MMD evaluation uses its own stream
/// derived from (seed, iteration) and does not advance the run stream.
TrainResult train(const gen::GeneratorConfig& gen_config,
                  const critic::CriticConfig& critic_config, const TrainConfig& config,
                  const data::Dataset& dataset, const std::string& out_dir,
                  const std::optional<std::string>& resume_from = std::nullopt);

/// Initial parameter vector: general entries ~ N(0, sigma_init^2), noise-mu /
/// noise-sigma entries ~ N(0, (sigma_init * noise_init_factor)^2), drawn in
/// flat layout order.
std::vector<double> init_generator_params(const gen::GeneratorConfig& config,
                                          const TrainConfig& tc, Rng& rng);

/// Per-checkpoint MMD report between generated samples and dataset samples,
/// on a stream derived from (seed, iteration).
metrics::MmdReport checkpoint_mmd(const gen::GeneratorConfig& config,
                                  std::span<const double> params,
                                  const data::Dataset& dataset, const TrainConfig& tc,
                                  std::int64_t iteration);

} // namespace qig::train
