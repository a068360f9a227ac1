#include "qig/config_json.hpp"

namespace qig {

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        QIG_CHECK(ok, where, ": unknown key '", key, "'");
    }
}

Json to_json(const gen::GeneratorConfig& c) {
    Json j;
    j["encoding"] = gen::to_string(c.encoding);
    j["ansatz"] = gen::to_string(c.ansatz);
    j["side"] = c.side;
    j["layers"] = c.layers;
    j["sublayers"] = c.sublayers;
    j["modes"] = c.modes;
    j["amplitude_rotation_layer"] = c.amplitude_rotation_layer;
    return j;
}

gen::GeneratorConfig generator_config_from_json(const Json& j) {
    reject_unknown_keys(j,
                        {"encoding", "ansatz", "side", "layers", "sublayers", "modes",
                         "amplitude_rotation_layer"},
                        "generator config");
    gen::GeneratorConfig c;
    c.encoding = gen::encoding_from_string(j.value("encoding", "frqi"));
    c.ansatz = gen::ansatz_from_string(j.value("ansatz", "task_specific"));
    c.side = j.value("side", 4);
    c.layers = j.value("layers", 8);
    c.sublayers = j.value("sublayers", 2);
    c.modes = j.value("modes", 2);
    c.amplitude_rotation_layer = j.value("amplitude_rotation_layer", false);
    c.validate();
    return c;
}

Json to_json(const critic::CriticConfig& c) {
    Json j;
    j["side"] = c.side;
    j["channels"] = c.channels;
    j["filters"] = c.filters;
    j["kernel"] = c.kernel;
    j["stride"] = c.stride;
    j["leaky_slope"] = c.leaky_slope;
    return j;
}

critic::CriticConfig critic_config_from_json(const Json& j) {
    reject_unknown_keys(j, {"side", "channels", "filters", "kernel", "stride", "leaky_slope"},
                        "critic config");
    critic::CriticConfig c;
    c.side = j.value("side", 32);
    c.channels = j.value("channels", 1);
    if (j.contains("filters")) {
        const auto f = j["filters"].get<std::vector<int>>();
        QIG_CHECK(f.size() == 3, "critic config: filters must list 3 values");
        c.filters = {f[0], f[1], f[2]};
    }
    c.kernel = j.value("kernel", 5);
    c.stride = j.value("stride", 2);
    c.leaky_slope = j.value("leaky_slope", 0.2);
    c.validate();
    return c;
}

Json to_json(const train::TrainConfig& c) {
    Json j;
    j["batch"] = c.batch;
    j["lr_g"] = c.lr_g;
    j["lr_d"] = c.lr_d;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_eps"] = c.adam_eps;
    j["lambda"] = c.lambda;
    j["n_critic"] = c.n_critic;
    j["iterations"] = c.iterations;
    j["sigma_init"] = c.sigma_init;
    j["noise_init_factor"] = c.noise_init_factor;
    if (c.shots.has_value()) {
        j["shots"] = *c.shots;
    } else {
        j["shots"] = nullptr;
    }
    j["checkpoint_interval"] = c.checkpoint_interval;
    j["seed"] = c.seed;
    j["mmd_samples"] = c.mmd_samples;
    return j;
}

train::TrainConfig train_config_from_json(const Json& j) {
    reject_unknown_keys(j,
                        {"batch", "lr_g", "lr_d", "beta1", "beta2", "adam_eps", "lambda",
                         "n_critic", "iterations", "sigma_init", "noise_init_factor",
                         "shots", "checkpoint_interval", "seed", "mmd_samples"},
                        "train config");
    train::TrainConfig c;
    c.batch = j.value("batch", c.batch);
    c.lr_g = j.value("lr_g", c.lr_g);
    c.lr_d = j.value("lr_d", c.lr_d);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.lambda = j.value("lambda", c.lambda);
    c.n_critic = j.value("n_critic", c.n_critic);
    c.iterations = j.value("iterations", c.iterations);
    c.sigma_init = j.value("sigma_init", c.sigma_init);
    c.noise_init_factor = j.value("noise_init_factor", c.noise_init_factor);
    if (j.contains("shots") && !j["shots"].is_null()) {
        c.shots = j["shots"].get<std::uint64_t>();
    }
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.seed = j.value("seed", c.seed);
    c.mmd_samples = j.value("mmd_samples", c.mmd_samples);
    c.validate();
    return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace qig
