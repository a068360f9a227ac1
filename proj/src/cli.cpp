#include "qig/cli.hpp"

#include "qig/analysis.hpp"
#include "qig/config_json.hpp"
#include "qig/metrics.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace qig::cli {

namespace fs = std::filesystem;

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    QIG_CHECK(is.is_open(), "cannot open run config ", path);
    Json j = Json::parse(is, nullptr, true);
    reject_unknown_keys(j, {"generator", "critic", "train", "dataset"}, path);

    RunConfig rc;
    if (j.contains("generator")) {
        rc.generator = generator_config_from_json(j["generator"]);
    }
    if (j.contains("critic")) {
        rc.critic = critic_config_from_json(j["critic"]);
    } else {
        rc.critic.side = rc.generator.side;
        rc.critic.channels = rc.generator.encoding == gen::Encoding::MCRQI ? 3 : 1;
    }
    if (j.contains("train")) {
        rc.train = train_config_from_json(j["train"]);
    }
    if (j.contains("dataset")) {
        const Json& d = j["dataset"];
        reject_unknown_keys(
            d, {"path", "labels_path", "classes", "resize", "synthetic", "count"},
            "dataset descriptor");
        rc.dataset_path = d.value("path", "");
        rc.labels_path = d.value("labels_path", "");
        if (d.contains("classes")) {
            rc.class_filter = d["classes"].get<std::vector<int>>();
        }
        if (d.contains("resize")) {
            rc.resize_to = d["resize"].get<int>();
        }
        rc.synthetic_kind = d.value("synthetic", "");
        rc.synthetic_count = d.value("count", rc.synthetic_count);
    }
    QIG_CHECK(rc.dataset_path.empty() != rc.synthetic_kind.empty(),
              path, ": dataset needs exactly one of 'path' or 'synthetic'");
    return rc;
}

data::Dataset build_dataset(const RunConfig& rc) {
    if (!rc.synthetic_kind.empty()) {
        Rng rng(rc.train.seed ^ 0x646174617365740aULL);
        return data::make_synthetic(rc.synthetic_kind, rc.generator.side,
                                    rc.synthetic_count, rng);
    }
    std::optional<std::string> labels;
    if (!rc.labels_path.empty()) {
        labels = rc.labels_path;
    }
    return data::load_idx(rc.dataset_path, labels, rc.class_filter, rc.resize_to);
}

namespace {

sv::QuantumState encode_with(gen::Encoding enc, const codec::ImageTensor& img) {
    switch (enc) {
    case gen::Encoding::FRQI: return codec::frqi_encode(img);
    case gen::Encoding::MCRQI: return codec::mcrqi_encode(img);
    case gen::Encoding::Amplitude: return codec::amplitude_encode(img);
    }
    fail("bad encoding");
}

codec::ImageTensor decode_with(gen::Encoding enc, const sv::QuantumState& state) {
    const std::vector<double> probs = sv::probabilities(state);
    int a = 0;
    switch (enc) {
    case gen::Encoding::FRQI: a = state.n_qubits - 1; break;
    case gen::Encoding::MCRQI: a = state.n_qubits - 3; break;
    case gen::Encoding::Amplitude: a = state.n_qubits; break;
    }
    QIG_CHECK(a >= 2 && a % 2 == 0, "state with ", state.n_qubits,
              " qubits does not describe a square ", to_string(enc), " image");
    const int side = 1 << (a / 2);
    switch (enc) {
    case gen::Encoding::FRQI: return codec::frqi_decode(probs, side);
    case gen::Encoding::MCRQI: return codec::mcrqi_decode(probs, side);
    case gen::Encoding::Amplitude: return codec::amplitude_decode(probs, side);
    }
    fail("bad encoding");
}

codec::ImageTensor image_grid(const std::vector<codec::ImageTensor>& images) {
    QIG_CHECK(!images.empty(), "no images to arrange");
    const int side = images[0].height;
    const int channels = images[0].channels;
    const int cols = static_cast<int>(std::ceil(std::sqrt(images.size())));
    const int rows = static_cast<int>((images.size() + cols - 1) / cols);
    codec::ImageTensor grid = codec::ImageTensor::zeros(rows * side, cols * side, channels);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const int r0 = static_cast<int>(i) / cols * side;
        const int c0 = static_cast<int>(i) % cols * side;
        for (int ch = 0; ch < channels; ++ch) {
            for (int r = 0; r < side; ++r) {
                for (int c = 0; c < side; ++c) {
                    grid.at(ch, r0 + r, c0 + c) = images[i].at(ch, r, c);
                }
            }
        }
    }
    return grid;
}

std::vector<std::vector<int>> parse_subsets(const std::string& spec) {
    std::vector<std::vector<int>> subsets;
    std::stringstream groups(spec);
    std::string group;
    while (std::getline(groups, group, ';')) {
        std::vector<int> subset;
        std::stringstream items(group);
        std::string item;
        while (std::getline(items, item, ',')) {
            if (!item.empty()) {
                subset.push_back(std::stoi(item));
            }
        }
        if (!subset.empty()) {
            subsets.push_back(std::move(subset));
        }
    }
    QIG_CHECK(!subsets.empty(), "no qubit subsets in '", spec, "'");
    return subsets;
}

int command_encode(const std::string& in, const std::string& out,
                   const std::string& encoding) {
    const codec::ImageTensor img = codec::read_image_file(in);
    const sv::QuantumState state = encode_with(gen::encoding_from_string(encoding), img);
    sv::save_qsv_file(state, out);
    std::cout << "encoded " << in << " -> " << out << " (" << state.n_qubits
              << " qubits)\n";
    return 0;
}

int command_decode(const std::string& in, const std::string& out,
                   const std::string& encoding, const std::string& raw_out) {
    const sv::QuantumState state = sv::load_qsv_file(in);
    const codec::ImageTensor img =
        decode_with(gen::encoding_from_string(encoding), state);
    codec::write_pnm(img, out);
    if (!raw_out.empty()) {
        codec::write_imgf64(img, raw_out);
    }
    std::cout << "decoded " << in << " -> " << out << " (" << img.height << "x"
              << img.width << ")\n";
    return 0;
}

int command_train(const std::string& config_path, const std::string& out_dir,
                  const std::string& resume) {
    const RunConfig rc = load_run_config(config_path);
    const data::Dataset dataset = build_dataset(rc);
    std::optional<std::string> resume_opt;
    if (!resume.empty()) {
        resume_opt = resume;
    }
    const train::TrainResult result =
        train::train(rc.generator, rc.critic, rc.train, dataset, out_dir, resume_opt);
    std::cout << "trained " << result.final_iteration << " iterations; "
              << result.checkpoints.size() << " checkpoints in " << result.run_dir
              << "\nfinal rbf mmd " << result.final_rbf_mmd << "\n";
    return 0;
}

int command_sample(const std::string& checkpoint, const std::string& out, int count,
                   std::uint64_t shots, int mode, bool invert, std::uint64_t seed,
                   const std::string& raw_out) {
    const train::Checkpoint ckpt = train::load_checkpoint(checkpoint);
    QIG_CHECK(count >= 1, "count must be >= 1");
    QIG_CHECK(mode < ckpt.gen_config.modes, "mode ", mode, " out of range, model has ",
              ckpt.gen_config.modes);
    Rng rng(seed);
    std::vector<codec::ImageTensor> images;
    images.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        gen::NoiseDraw draw = gen::sample_noise(ckpt.gen_config, rng);
        if (mode >= 0) {
            draw.mode = mode;
        }
        const sv::QuantumState state =
            gen::forward(ckpt.gen_config, ckpt.gen_params, draw);
        std::vector<double> probs = sv::probabilities(state);
        if (shots > 0) {
            probs = gen::shot_noise_perturb(probs, shots, rng);
        }
        codec::ImageTensor img = gen::decode_probabilities(ckpt.gen_config, probs);
        if (invert) {
            img = codec::invert(img);
        }
        images.push_back(std::move(img));
    }
    const codec::ImageTensor grid = image_grid(images);
    codec::write_pnm(grid, out);
    if (!raw_out.empty()) {
        codec::write_imgf64(grid, raw_out);
    }
    std::cout << "wrote " << count << " samples to " << out << "\n";
    return 0;
}

int command_select(const std::string& run_dir) {
    const std::string csv_path = (fs::path(run_dir) / "metrics.csv").string();
    std::ifstream is(csv_path);
    QIG_CHECK(is.is_open(), "cannot open ", csv_path);
    std::string line;
    QIG_CHECK(static_cast<bool>(std::getline(is, line)), csv_path, ": empty metric log");
    std::vector<std::int64_t> iterations;
    std::vector<std::vector<double>> series(3);
    while (std::getline(is, line)) {
        std::stringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) {
            fields.push_back(field);
        }
        if (fields.size() < 6 || fields[3].empty()) {
            continue; // no MMD at this iteration
        }
        iterations.push_back(std::stoll(fields[0]));
        for (int k = 0; k < 3; ++k) {
            series[static_cast<std::size_t>(k)].push_back(
                std::stod(fields[static_cast<std::size_t>(3 + k)]));
        }
    }
    QIG_CHECK(!iterations.empty(), csv_path, ": no checkpoint rows with MMD values");
    const std::size_t best = metrics::select_checkpoint(series);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "checkpoint_%06lld",
                  static_cast<long long>(iterations[best]));
    std::cout << "best checkpoint index " << best << " (iteration " << iterations[best]
              << "): " << (fs::path(run_dir) / (std::string(buf) + ".json")).string()
              << "\n";
    return 0;
}

int command_analyze_entropy(const std::string& checkpoint, const std::string& out,
                            const std::string& subsets_spec, int draws,
                            std::uint64_t seed) {
    const train::Checkpoint ckpt = train::load_checkpoint(checkpoint);
    std::vector<std::vector<int>> subsets;
    if (!subsets_spec.empty()) {
        subsets = parse_subsets(subsets_spec);
    } else {
        // defaults mirroring the layer-wise study: color qubit, odd address
        // qubits (with color), finest two address qubits
        const int n = ckpt.gen_config.qubit_count();
        subsets.push_back({0});
        std::vector<int> odd{0};
        for (int q = 1; q < n; q += 2) {
            odd.push_back(q);
        }
        subsets.push_back(odd);
        if (n >= 3) {
            subsets.push_back({n - 2, n - 1});
        }
    }
    const analysis::EntropyTrace trace = analysis::layerwise_entropy(
        ckpt.gen_config, ckpt.gen_params, subsets, draws, seed);
    analysis::write_entropy_csv(trace, out);
    std::cout << "wrote entropy trace (" << trace.rows.size() << " rows) to " << out
              << "\n";
    return 0;
}

int command_analyze_grad(const std::string& checkpoint, int batch, std::uint64_t seed) {
    const train::Checkpoint ckpt = train::load_checkpoint(checkpoint);
    critic::CriticNetwork net = critic::critic_init_zero(ckpt.critic_config);
    net.unpack(ckpt.critic_params);
    const double value = analysis::grad_magnitude(ckpt.gen_config, ckpt.gen_params, net,
                                                  batch, seed);
    std::cout << "relative generator gradient magnitude " << value << " (K="
              << ckpt.gen_params.size() << ")\n";
    return 0;
}

int command_analyze_pca(const std::string& checkpoint, int mode, int count,
                        const std::string& out_prefix, std::uint64_t seed) {
    const train::Checkpoint ckpt = train::load_checkpoint(checkpoint);
    QIG_CHECK(mode >= 0 && mode < ckpt.gen_config.modes, "mode ", mode,
              " out of range, model has ", ckpt.gen_config.modes);
    Rng rng(seed);
    std::vector<std::vector<double>> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        gen::NoiseDraw draw = gen::sample_noise(ckpt.gen_config, rng);
        draw.mode = mode;
        const sv::QuantumState state =
            gen::forward(ckpt.gen_config, ckpt.gen_params, draw);
        samples.push_back(
            gen::decode_probabilities(ckpt.gen_config, sv::probabilities(state)).values);
    }
    const analysis::PcaResult pca = analysis::mode_pca(samples);
    const int side = ckpt.gen_config.side;
    const int channels = ckpt.gen_config.encoding == gen::Encoding::MCRQI ? 3 : 1;
    const auto as_image = [&](const std::vector<double>& v) {
        codec::ImageTensor img = codec::ImageTensor::zeros(side, side, channels);
        img.values = v;
        return img;
    };
    codec::write_pnm(as_image(pca.mean), out_prefix + "_mean.pgm");
    codec::write_pnm(as_image(pca.plus3), out_prefix + "_plus3.pgm");
    codec::write_pnm(as_image(pca.minus3), out_prefix + "_minus3.pgm");
    std::ofstream os(out_prefix + "_axis.csv");
    QIG_CHECK(os.is_open(), "cannot write ", out_prefix, "_axis.csv");
    os << "sigma," << pca.sigma << "\nzero_variance," << (pca.zero_variance ? 1 : 0)
       << "\n";
    for (double v : pca.axis) {
        os << v << "\n";
    }
    std::cout << "mode " << mode << " pca: sigma1=" << pca.sigma
              << (pca.zero_variance ? " (zero variance)" : "") << "; images at "
              << out_prefix << "_{mean,plus3,minus3}.pgm\n";
    return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"quantum-image generative modeling toolkit"};
    app.require_subcommand(1);

    std::string in_path, out_path, encoding = "frqi", raw_path;
    auto* enc_cmd = app.add_subcommand("encode", "encode an image file into a .qsv statevector");
    enc_cmd->add_option("--in", in_path, "input image (pgm/ppm/imgf64)")->required();
    enc_cmd->add_option("--out", out_path, "output .qsv path")->required();
    enc_cmd->add_option("--encoding", encoding, "frqi|mcrqi|amplitude");

    auto* dec_cmd = app.add_subcommand("decode", "decode a .qsv statevector into an image");
    dec_cmd->add_option("--in", in_path, "input .qsv path")->required();
    dec_cmd->add_option("--out", out_path, "output image (pgm/ppm)")->required();
    dec_cmd->add_option("--encoding", encoding, "frqi|mcrqi|amplitude");
    dec_cmd->add_option("--imgf64", raw_path, "also write a lossless float image");

    std::string config_path, run_dir, resume;
    auto* train_cmd = app.add_subcommand("train", "run a WGAN-GP training loop");
    train_cmd->add_option("--config", config_path, "run config json")->required();
    train_cmd->add_option("--out", run_dir, "run directory")->required();
    train_cmd->add_option("--resume", resume, "checkpoint manifest to resume from");

    std::string checkpoint;
    int count = 16;
    std::uint64_t shots = 0;
    int mode = -1;
    bool invert = false;
    std::uint64_t seed = 1;
    auto* sample_cmd = app.add_subcommand("sample", "generate an image grid from a checkpoint");
    sample_cmd->add_option("--checkpoint", checkpoint, "checkpoint .json")->required();
    sample_cmd->add_option("--out", out_path, "output grid image")->required();
    sample_cmd->add_option("--count", count, "number of samples");
    sample_cmd->add_option("--shots", shots, "finite measurement shots (0 = exact)");
    sample_cmd->add_option("--mode", mode, "fix the noise mode (-1 = sample)");
    sample_cmd->add_flag("--invert", invert, "invert grays for display");
    sample_cmd->add_option("--seed", seed, "sampling seed");
    sample_cmd->add_option("--imgf64", raw_path, "also write a lossless float grid");

    auto* select_cmd = app.add_subcommand("select", "pick the best checkpoint of a run via MMD");
    select_cmd->add_option("--dir", run_dir, "run directory with metrics.csv")->required();

    auto* analyze = app.add_subcommand("analyze", "post-training analyses");
    analyze->require_subcommand(1);
    std::string subsets_spec;
    int draws = 32;
    auto* entropy_cmd = analyze->add_subcommand("entropy", "layer-wise subsystem entropies");
    entropy_cmd->add_option("--checkpoint", checkpoint, "checkpoint .json")->required();
    entropy_cmd->add_option("--out", out_path, "output csv")->required();
    entropy_cmd->add_option("--subsets", subsets_spec,
                            "qubit subsets, e.g. '0;1,2;3,4' (default: standard trio)");
    entropy_cmd->add_option("--draws", draws, "noise draws per mode");
    entropy_cmd->add_option("--seed", seed, "noise seed");

    int batch = 64;
    auto* grad_cmd = analyze->add_subcommand("grad", "relative generator gradient magnitude");
    grad_cmd->add_option("--checkpoint", checkpoint, "checkpoint .json")->required();
    grad_cmd->add_option("--batch", batch, "noise batch size");
    grad_cmd->add_option("--seed", seed, "noise seed");

    std::string out_prefix;
    int pca_count = 100;
    auto* pca_cmd = analyze->add_subcommand("pca", "per-mode PCA with +/-3 sigma images");
    pca_cmd->add_option("--checkpoint", checkpoint, "checkpoint .json")->required();
    pca_cmd->add_option("--mode", mode, "noise mode")->required();
    pca_cmd->add_option("--count", pca_count, "samples for the PCA");
    pca_cmd->add_option("--out-prefix", out_prefix, "output file prefix")->required();
    pca_cmd->add_option("--seed", seed, "sampling seed");

    try {
        app.parse(argc, argv);
        if (*enc_cmd) {
            return command_encode(in_path, out_path, encoding);
        }
        if (*dec_cmd) {
            return command_decode(in_path, out_path, encoding, raw_path);
        }
        if (*train_cmd) {
            return command_train(config_path, run_dir, resume);
        }
        if (*sample_cmd) {
            return command_sample(checkpoint, out_path, count, shots, mode, invert, seed,
                                  raw_path);
        }
        if (*select_cmd) {
            return command_select(run_dir);
        }
        if (*entropy_cmd) {
            return command_analyze_entropy(checkpoint, out_path, subsets_spec, draws, seed);
        }
        if (*grad_cmd) {
            return command_analyze_grad(checkpoint, batch, seed);
        }
        if (*pca_cmd) {
            return command_analyze_pca(checkpoint, mode, pca_count, out_prefix, seed);
        }
        std::cerr << "no command\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace qig::cli
