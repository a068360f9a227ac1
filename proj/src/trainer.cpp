#include "qig/trainer.hpp"

#include "qig/config_json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace qig::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    QIG_CHECK(batch >= 1, "batch must be >= 1, got ", batch);
    QIG_CHECK(lr_g > 0.0 && lr_d > 0.0, "learning rates must be positive");
    QIG_CHECK(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
              "Adam betas must lie in [0, 1)");
    QIG_CHECK(lambda >= 0.0, "penalty coefficient must be >= 0");
    QIG_CHECK(n_critic >= 1, "n_critic must be >= 1, got ", n_critic);
    QIG_CHECK(iterations >= 0, "iterations must be >= 0");
    QIG_CHECK(checkpoint_interval >= 1, "checkpoint interval must be >= 1");
    QIG_CHECK(mmd_samples >= 1, "mmd_samples must be >= 1");
    if (shots.has_value()) {
        QIG_CHECK(*shots >= 1, "shots must be >= 1");
    }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
    QIG_CHECK(params.size() == grads.size() && params.size() == state.m.size(),
              "adam size mismatch: ", params.size(), " params, ", grads.size(),
              " grads, ", state.m.size(), " moments");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

double generator_loss(std::span<const double> fake_scores) {
    QIG_CHECK(!fake_scores.empty(), "generator loss over an empty batch");
    double mean = 0.0;
    for (double s : fake_scores) {
        mean += s;
    }
    return -mean / static_cast<double>(fake_scores.size());
}

LossAndGrad critic_loss(const std::vector<codec::ImageTensor>& reals,
                        const std::vector<codec::ImageTensor>& fakes,
                        const critic::CriticNetwork& net, double lambda,
                        std::span<const double> u) {
    QIG_CHECK(!reals.empty(), "critic loss over an empty batch");
    QIG_CHECK(reals.size() == fakes.size() && reals.size() == u.size(),
              "critic loss batch mismatch: ", reals.size(), " real, ", fakes.size(),
              " fake, ", u.size(), " interpolation coefficients");
    const std::size_t batch = reals.size();
    const critic::CriticPlan plan = critic::make_plan(net.config);
    const int n_params = net.parameter_count();

    std::vector<double> losses(batch, 0.0);
    std::vector<std::vector<double>> grads(batch);
    parallel_for(batch, [&](std::size_t b) {
        ad::Tape tape;
        const critic::CriticLeaves leaves = critic::insert_leaves(tape, net);
        const ad::Tensor real_t = critic::image_to_tensor(reals[b]);
        const ad::Tensor fake_t = critic::image_to_tensor(fakes[b]);
        QIG_CHECK(real_t.same_shape(fake_t), "real/fake shape mismatch at element ", b);

        const ad::NodeId score_real =
            critic::score_node(tape, plan, leaves, tape.constant(real_t));
        const ad::NodeId score_fake =
            critic::score_node(tape, plan, leaves, tape.constant(fake_t));

        // xhat on the line between the pair
        ad::Tensor mix = real_t;
        for (std::size_t i = 0; i < mix.data.size(); ++i) {
            mix.data[i] = u[b] * real_t.data[i] + (1.0 - u[b]) * fake_t.data[i];
        }
        const ad::NodeId xhat = tape.leaf(std::move(mix));
        const ad::NodeId score_mix = critic::score_node(tape, plan, leaves, xhat);
        const ad::NodeId grad_x = tape.gradient_node(score_mix, xhat);
        const ad::NodeId norm = tape.sqrt(tape.dot(grad_x, grad_x));
        const ad::NodeId penalty = tape.square(tape.offset(norm, -1.0));
        const ad::NodeId loss =
            tape.add(tape.sub(score_fake, score_real), tape.scale(penalty, lambda));

        losses[b] = tape.value(loss).scalar_value();
        const std::vector<ad::NodeId> wrt = leaves.all();
        const std::vector<ad::Tensor> g = tape.gradient(loss, wrt);
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(n_params));
        for (const ad::Tensor& t : g) {
            flat.insert(flat.end(), t.data.begin(), t.data.end());
        }
        grads[b] = std::move(flat);
    });

    LossAndGrad out;
    out.grad.assign(static_cast<std::size_t>(n_params), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        out.loss += losses[b] * inv_b;
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            out.grad[i] += grads[b][i] * inv_b;
        }
    }
    return out;
}

LossAndGrad generator_loss_and_grad(const gen::GeneratorConfig& config,
                                    std::span<const double> params,
                                    const std::vector<gen::NoiseDraw>& draws,
                                    const critic::CriticNetwork& net,
                                    std::optional<std::uint64_t> shots,
                                    std::vector<Rng>* shot_rngs) {
    QIG_CHECK(!draws.empty(), "generator step over an empty batch");
    if (shots.has_value()) {
        QIG_CHECK(shot_rngs != nullptr && shot_rngs->size() == draws.size(),
                  "shot training needs one child stream per batch element");
    }
    const std::size_t batch = draws.size();
    const critic::CriticPlan plan = critic::make_plan(net.config);
    const ad::Tensor theta(std::vector<int>{static_cast<int>(params.size())},
                           std::vector<double>(params.begin(), params.end()));

    std::vector<double> scores(batch, 0.0);
    std::vector<std::vector<double>> grads(batch);
    parallel_for(batch, [&](std::size_t b) {
        ad::Tape tape;
        const ad::NodeId theta_leaf = tape.leaf(theta);
        ad::NodeId probs = gen::circuit_probs_node(tape, theta_leaf, config, draws[b]);
        if (shots.has_value()) {
            probs = gen::shot_perturb_node(tape, probs, *shots, (*shot_rngs)[b]);
        }
        const ad::NodeId image = gen::decode_node(tape, probs, config);
        const critic::CriticLeaves leaves = critic::insert_constants(tape, net);
        const ad::NodeId score = critic::score_node(tape, plan, leaves, image);
        scores[b] = tape.value(score).scalar_value();
        const ad::NodeId wrt[1] = {theta_leaf};
        grads[b] = tape.gradient(score, std::span<const ad::NodeId>(wrt))[0].data;
    });

    LossAndGrad out;
    out.loss = generator_loss(scores);
    out.grad.assign(params.size(), 0.0);
    const double inv_b = -1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            out.grad[i] += grads[b][i] * inv_b;
        }
    }
    return out;
}

std::uint64_t config_hash(const gen::GeneratorConfig& g, const critic::CriticConfig& c,
                          const TrainConfig& t) {
    Json j;
    j["generator"] = to_json(g);
    j["critic"] = to_json(c);
    j["train"] = to_json(t);
    return fnv1a64(j.dump());
}

namespace {

void write_doubles(std::ostream& os, std::span<const double> v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& is, std::size_t count,
                                 const std::string& path) {
    std::vector<double> v(count);
    const std::streamsize bytes = static_cast<std::streamsize>(count * sizeof(double));
    is.read(reinterpret_cast<char*>(v.data()), bytes);
    QIG_CHECK(is.gcount() == bytes, path, ": truncated checkpoint sidecar");
    return v;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& base_path) {
    Json manifest;
    manifest["format_version"] = Checkpoint::kFormatVersion;
    manifest["layout_version"] = gen::ParamLayout::kVersion;
    manifest["iteration"] = ckpt.iteration;
    manifest["config_hash"] =
        hash_hex(config_hash(ckpt.gen_config, ckpt.critic_config, ckpt.train_config));
    manifest["generator"] = to_json(ckpt.gen_config);
    manifest["critic"] = to_json(ckpt.critic_config);
    manifest["train"] = to_json(ckpt.train_config);
    manifest["rng_state"] = ckpt.rng.serialize();
    manifest["gen_adam_step"] = ckpt.gen_adam.step;
    manifest["critic_adam_step"] = ckpt.critic_adam.step;
    Json arrays = Json::array();
    const auto describe = [&arrays](const char* name, const std::vector<double>& v) {
        Json a;
        a["name"] = name;
        a["count"] = v.size();
        arrays.push_back(a);
    };
    describe("gen_params", ckpt.gen_params);
    describe("gen_adam_m", ckpt.gen_adam.m);
    describe("gen_adam_v", ckpt.gen_adam.v);
    describe("critic_params", ckpt.critic_params);
    describe("critic_adam_m", ckpt.critic_adam.m);
    describe("critic_adam_v", ckpt.critic_adam.v);
    manifest["arrays"] = arrays;

    const std::string tmp_json = base_path + ".json.tmp";
    const std::string tmp_bin = base_path + ".bin.tmp";
    {
        std::ofstream os(tmp_bin, std::ios::binary);
        QIG_CHECK(os.is_open(), "cannot open ", tmp_bin, " for writing");
        write_doubles(os, ckpt.gen_params);
        write_doubles(os, ckpt.gen_adam.m);
        write_doubles(os, ckpt.gen_adam.v);
        write_doubles(os, ckpt.critic_params);
        write_doubles(os, ckpt.critic_adam.m);
        write_doubles(os, ckpt.critic_adam.v);
        QIG_CHECK(os.good(), "checkpoint sidecar write failed");
    }
    {
        std::ofstream os(tmp_json, std::ios::binary);
        QIG_CHECK(os.is_open(), "cannot open ", tmp_json, " for writing");
        os << manifest.dump(2) << "\n";
        QIG_CHECK(os.good(), "checkpoint manifest write failed");
    }
    fs::rename(tmp_bin, base_path + ".bin");
    fs::rename(tmp_json, base_path + ".json");
}

Checkpoint load_checkpoint(const std::string& json_path) {
    std::ifstream is(json_path);
    QIG_CHECK(is.is_open(), "cannot open ", json_path);
    Json manifest = Json::parse(is, nullptr, true);
    QIG_CHECK(manifest.value("format_version", -1) == Checkpoint::kFormatVersion,
              json_path, ": unsupported checkpoint format version");
    QIG_CHECK(manifest.value("layout_version", -1) == gen::ParamLayout::kVersion,
              json_path, ": unsupported parameter layout version");

    Checkpoint ckpt;
    ckpt.iteration = manifest["iteration"].get<std::int64_t>();
    ckpt.gen_config = generator_config_from_json(manifest["generator"]);
    ckpt.critic_config = critic_config_from_json(manifest["critic"]);
    ckpt.train_config = train_config_from_json(manifest["train"]);
    ckpt.rng = Rng::deserialize(manifest["rng_state"].get<std::string>());
    ckpt.gen_adam.step = manifest["gen_adam_step"].get<std::int64_t>();
    ckpt.critic_adam.step = manifest["critic_adam_step"].get<std::int64_t>();

    std::string bin_path = json_path;
    const auto pos = bin_path.rfind(".json");
    QIG_CHECK(pos != std::string::npos, "checkpoint manifest must end in .json");
    bin_path.replace(pos, std::string::npos, ".bin");
    std::ifstream bin(bin_path, std::ios::binary);
    QIG_CHECK(bin.is_open(), "cannot open ", bin_path);
    for (const auto& a : manifest["arrays"]) {
        const std::string name = a["name"].get<std::string>();
        const std::size_t count = a["count"].get<std::size_t>();
        std::vector<double> v = read_doubles(bin, count, bin_path);
        if (name == "gen_params") {
            ckpt.gen_params = std::move(v);
        } else if (name == "gen_adam_m") {
            ckpt.gen_adam.m = std::move(v);
        } else if (name == "gen_adam_v") {
            ckpt.gen_adam.v = std::move(v);
        } else if (name == "critic_params") {
            ckpt.critic_params = std::move(v);
        } else if (name == "critic_adam_m") {
            ckpt.critic_adam.m = std::move(v);
        } else if (name == "critic_adam_v") {
            ckpt.critic_adam.v = std::move(v);
        } else {
            fail(json_path, ": unknown checkpoint array '", name, "'");
        }
    }
    QIG_CHECK(static_cast<int>(ckpt.gen_params.size()) ==
                  gen::count_parameters(ckpt.gen_config),
              json_path, ": generator parameter count mismatch");
    return ckpt;
}

std::vector<double> init_generator_params(const gen::GeneratorConfig& config,
                                          const TrainConfig& tc, Rng& rng) {
    const gen::ParamLayout layout = gen::make_layout(config);
    std::vector<double> params(static_cast<std::size_t>(layout.total));
    const double noise_std = tc.sigma_init * tc.noise_init_factor;
    for (int i = 0; i < layout.total; ++i) {
        const double stddev = i < layout.noise_block ? noise_std : tc.sigma_init;
        params[static_cast<std::size_t>(i)] = stddev * rng.normal();
    }
    return params;
}

metrics::MmdReport checkpoint_mmd(const gen::GeneratorConfig& config,
                                  std::span<const double> params,
                                  const data::Dataset& dataset, const TrainConfig& tc,
                                  std::int64_t iteration) {
    // Derived stream: keeps the run stream untouched so resumed runs replay
    // identically.
    Rng rng(tc.seed ^ (0x4d4d445f6d657472ULL + 0x9e3779b97f4a7c15ULL *
                                                   static_cast<std::uint64_t>(iteration + 1)));
    const int k = std::min<int>(tc.mmd_samples, static_cast<int>(dataset.size()));
    std::vector<gen::NoiseDraw> draws(static_cast<std::size_t>(k));
    std::vector<Rng> children(static_cast<std::size_t>(k));
    std::vector<std::vector<double>> generated(static_cast<std::size_t>(k));
    std::vector<std::vector<double>> reals(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        draws[static_cast<std::size_t>(i)] = gen::sample_noise(config, rng);
        children[static_cast<std::size_t>(i)] = rng.split();
        reals[static_cast<std::size_t>(i)] = dataset.sample(rng).values;
    }
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t i) {
        const sv::QuantumState state = gen::forward(config, params, draws[i]);
        std::vector<double> probs = sv::probabilities(state);
        if (tc.shots.has_value()) {
            probs = gen::shot_noise_perturb(probs, *tc.shots, children[i]);
        }
        generated[i] = gen::decode_probabilities(config, probs).values;
    });
    return metrics::mmd_report(reals, generated);
}

namespace {

std::string checkpoint_base(const std::string& dir, std::int64_t iteration) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "checkpoint_%06lld",
                  static_cast<long long>(iteration));
    return (fs::path(dir) / buf).string();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

TrainResult train(const gen::GeneratorConfig& gen_config,
                  const critic::CriticConfig& critic_config, const TrainConfig& config,
                  const data::Dataset& dataset, const std::string& out_dir,
                  const std::optional<std::string>& resume_from) {
    gen_config.validate();
    critic_config.validate();
    config.validate();
    QIG_CHECK(!dataset.images.empty(), "training needs a non-empty dataset");
    const codec::ImageTensor& probe = dataset.images.front();
    QIG_CHECK(probe.height == gen_config.side && probe.width == gen_config.side,
              "dataset image side ", probe.height, "x", probe.width,
              " does not match generator side ", gen_config.side);
    QIG_CHECK(probe.channels == critic_config.channels &&
                  probe.height == critic_config.side,
              "dataset does not match critic input ", critic_config.channels, "x",
              critic_config.side, "x", critic_config.side);

    fs::create_directories(out_dir);

    Checkpoint state;
    if (resume_from.has_value()) {
        state = load_checkpoint(*resume_from);
        QIG_CHECK(state.gen_config == gen_config && state.critic_config == critic_config,
                  "resume checkpoint was produced by a different model configuration");
    } else {
        state.iteration = 0;
        state.gen_config = gen_config;
        state.critic_config = critic_config;
        state.train_config = config;
        state.rng = Rng(config.seed);
        state.gen_params = init_generator_params(gen_config, config, state.rng);
        state.gen_adam = AdamState::zeros(state.gen_params.size());
        const critic::CriticNetwork net = critic::critic_init(critic_config, state.rng);
        state.critic_params = net.pack();
        state.critic_adam = AdamState::zeros(state.critic_params.size());
    }
    state.train_config = config;

    // resolved run configuration, hash and seed: enough to re-run bit-identically
    {
        Json j;
        j["generator"] = to_json(gen_config);
        j["critic"] = to_json(critic_config);
        j["train"] = to_json(config);
        j["config_hash"] = hash_hex(config_hash(gen_config, critic_config, config));
        std::ofstream os(fs::path(out_dir) / "resolved_config.json");
        QIG_CHECK(os.is_open(), "cannot write resolved config in ", out_dir);
        os << j.dump(2) << "\n";
    }

    TrainResult result;
    result.run_dir = out_dir;
    result.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    std::ofstream metrics_csv(result.metrics_path);
    QIG_CHECK(metrics_csv.is_open(), "cannot write ", result.metrics_path);
    metrics_csv << "iteration,loss_g,loss_d,mmd_linear,mmd_poly,mmd_rbf\n";

    critic::CriticNetwork net = critic::critic_init_zero(critic_config);
    net.unpack(state.critic_params);

    const auto emit_checkpoint = [&](std::int64_t iteration) {
        state.iteration = iteration;
        state.critic_params = net.pack();
        const std::string base = checkpoint_base(out_dir, iteration);
        save_checkpoint(state, base);
        result.checkpoints.push_back(base + ".json");
        return checkpoint_mmd(gen_config, state.gen_params, dataset, config, iteration);
    };

    if (!resume_from.has_value()) {
        const metrics::MmdReport report = emit_checkpoint(0);
        result.initial_rbf_mmd = report.rbf;
        result.final_rbf_mmd = report.rbf;
        metrics_csv << "0,,," << format_double(report.linear) << ','
                    << format_double(report.poly) << ',' << format_double(report.rbf)
                    << '\n';
    }

    const std::size_t batch = static_cast<std::size_t>(config.batch);
    for (std::int64_t iter = state.iteration + 1; iter <= config.iterations; ++iter) {
        double loss_d = 0.0;
        for (int c = 0; c < config.n_critic; ++c) {
            // draw order: real indices, noise draws, u coefficients, shot streams
            std::vector<codec::ImageTensor> reals;
            reals.reserve(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                reals.push_back(dataset.images[state.rng.below(dataset.images.size())]);
            }
            std::vector<gen::NoiseDraw> draws(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                draws[b] = gen::sample_noise(gen_config, state.rng);
            }
            std::vector<double> u(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                u[b] = state.rng.uniform();
            }
            std::vector<Rng> children(batch);
            if (config.shots.has_value()) {
                for (std::size_t b = 0; b < batch; ++b) {
                    children[b] = state.rng.split();
                }
            }
            std::vector<codec::ImageTensor> fakes(batch);
            parallel_for(batch, [&](std::size_t b) {
                const sv::QuantumState s =
                    gen::forward(gen_config, state.gen_params, draws[b]);
                std::vector<double> probs = sv::probabilities(s);
                if (config.shots.has_value()) {
                    probs = gen::shot_noise_perturb(probs, *config.shots, children[b]);
                }
                fakes[b] = gen::decode_probabilities(gen_config, probs);
            });
            const LossAndGrad critic_step =
                critic_loss(reals, fakes, net, config.lambda, u);
            loss_d = critic_step.loss;
            if (!std::isfinite(loss_d)) {
                state.critic_params = net.pack();
                state.iteration = iter;
                const std::string diag = (fs::path(out_dir) / "checkpoint_diagnostic").string();
                save_checkpoint(state, diag);
                fail("non-finite critic loss at iteration ", iter,
                     "; diagnostic checkpoint written to ", diag, ".json");
            }
            std::vector<double> packed = net.pack();
            adam_step(packed, critic_step.grad, state.critic_adam, config.lr_d,
                      config.beta1, config.beta2, config.adam_eps);
            net.unpack(packed);
        }

        std::vector<gen::NoiseDraw> draws(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            draws[b] = gen::sample_noise(gen_config, state.rng);
        }
        std::vector<Rng> children(batch);
        if (config.shots.has_value()) {
            for (std::size_t b = 0; b < batch; ++b) {
                children[b] = state.rng.split();
            }
        }
        LossAndGrad gen_step;
        try {
            gen_step = generator_loss_and_grad(gen_config, state.gen_params, draws, net,
                                               config.shots, &children);
            QIG_CHECK(std::isfinite(gen_step.loss), "non-finite generator loss");
        } catch (const Error&) {
            state.critic_params = net.pack();
            state.iteration = iter;
            save_checkpoint(state, (fs::path(out_dir) / "checkpoint_diagnostic").string());
            throw;
        }
        adam_step(state.gen_params, gen_step.grad, state.gen_adam, config.lr_g,
                  config.beta1, config.beta2, config.adam_eps);

        metrics_csv << iter << ',' << format_double(gen_step.loss) << ','
                    << format_double(loss_d);
        if (iter % config.checkpoint_interval == 0 || iter == config.iterations) {
            const metrics::MmdReport report = emit_checkpoint(iter);
            result.final_rbf_mmd = report.rbf;
            metrics_csv << ',' << format_double(report.linear) << ','
                        << format_double(report.poly) << ',' << format_double(report.rbf);
        } else {
            metrics_csv << ",,,";
        }
        metrics_csv << '\n';
        result.final_iteration = iter;
    }
    metrics_csv.flush();
    QIG_CHECK(metrics_csv.good(), "metric log write failed");
    return result;
}

} // namespace qig::train
