#include "qig/generator.hpp"

#include <algorithm>
#include <cmath>

namespace qig::gen {

std::string to_string(Encoding e) {
    switch (e) {
    case Encoding::FRQI: return "frqi";
    case Encoding::MCRQI: return "mcrqi";
    case Encoding::Amplitude: return "amplitude";
    }
    return "?";
}

std::string to_string(Ansatz a) {
    return a == Ansatz::TaskSpecific ? "task_specific" : "task_agnostic";
}

Encoding encoding_from_string(const std::string& s) {
    if (s == "frqi") {
        return Encoding::FRQI;
    }
    if (s == "mcrqi") {
        return Encoding::MCRQI;
    }
    if (s == "amplitude") {
        return Encoding::Amplitude;
    }
    fail("unknown encoding '", s, "' (expected frqi|mcrqi|amplitude)");
}

Ansatz ansatz_from_string(const std::string& s) {
    if (s == "task_specific") {
        return Ansatz::TaskSpecific;
    }
    if (s == "task_agnostic") {
        return Ansatz::TaskAgnostic;
    }
    fail("unknown ansatz '", s, "' (expected task_specific|task_agnostic)");
}

void GeneratorConfig::validate() const {
    QIG_CHECK(side >= 2 && (side & (side - 1)) == 0, "side ", side,
              " must be a power of two >= 2");
    QIG_CHECK(layers >= 1, "layers must be >= 1, got ", layers);
    QIG_CHECK(sublayers >= 1, "sublayers must be >= 1, got ", sublayers);
    QIG_CHECK(modes >= 1, "modes must be >= 1, got ", modes);
}

namespace {

/// Qubits of the entangling chain, coarsest address qubit first.
std::vector<int> address_chain(const GeneratorConfig& config) {
    const int a = config.address_qubit_count();
    std::vector<int> chain(static_cast<std::size_t>(a));
    const int first = config.encoding == Encoding::MCRQI ? 3
                      : config.encoding == Encoding::FRQI ? 1
                                                          : 0;
    for (int i = 0; i < a; ++i) {
        chain[static_cast<std::size_t>(i)] = first + i;
    }
    return chain;
}

/// Controlled-Ry control qubits, address qubits first, then the two
/// channel-selector qubits for MCRQI.
std::vector<int> control_qubits(const GeneratorConfig& config) {
    std::vector<int> controls = address_chain(config);
    if (config.encoding == Encoding::MCRQI) {
        controls.push_back(1);
        controls.push_back(2);
    }
    return controls;
}

int ladder_params_per_sublayer(int a) {
    if (a < 2) {
        return 0;
    }
    int p = sv::kN2ParamCount * (a - 1);
    if (a >= 3) {
        p += sv::kN3ParamCount * (a - 2) + sv::kLadderCapParamCount;
    }
    return p;
}

int per_layer_params(const GeneratorConfig& config) {
    if (config.ansatz == Ansatz::TaskAgnostic) {
        return 3 * config.qubit_count();
    }
    const int a = config.address_qubit_count();
    int p = config.sublayers * ladder_params_per_sublayer(a);
    switch (config.encoding) {
    case Encoding::FRQI:
        p += a + 1;
        break;
    case Encoding::MCRQI:
        p += (a + 2) + 1;
        break;
    case Encoding::Amplitude:
        if (config.amplitude_rotation_layer) {
            p += a;
        }
        break;
    }
    return p;
}

} // namespace

ParamLayout make_layout(const GeneratorConfig& config) {
    config.validate();
    ParamLayout layout;
    layout.noise_dim = config.noise_dim();
    layout.layers = config.layers;
    layout.modes = config.modes;
    layout.noise_block = 2 * config.modes * config.layers * layout.noise_dim;
    layout.per_layer = per_layer_params(config);
    layout.total = layout.noise_block + config.layers * layout.per_layer;
    return layout;
}

int count_parameters(const GeneratorConfig& config) { return make_layout(config).total; }

NoiseDraw sample_noise(const GeneratorConfig& config, Rng& rng) {
    NoiseDraw draw;
    draw.mode = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.modes)));
    draw.epsilon.resize(static_cast<std::size_t>(config.noise_dim()));
    for (double& e : draw.epsilon) {
        e = rng.normal();
    }
    return draw;
}

std::vector<double> tuned_noise(const GeneratorConfig& config,
                                std::span<const double> params, const NoiseDraw& noise) {
    const ParamLayout layout = make_layout(config);
    QIG_CHECK(static_cast<int>(params.size()) == layout.total, "parameter count ",
              params.size(), " does not match layout total ", layout.total);
    QIG_CHECK(noise.mode >= 0 && noise.mode < config.modes, "mode ", noise.mode,
              " out of range for ", config.modes, " modes");
    QIG_CHECK(static_cast<int>(noise.epsilon.size()) == layout.noise_dim,
              "noise draw has ", noise.epsilon.size(), " components, expected ",
              layout.noise_dim);
    std::vector<double> z(static_cast<std::size_t>(config.layers) * layout.noise_dim);
    for (int l = 0; l < config.layers; ++l) {
        for (int a = 0; a < layout.noise_dim; ++a) {
            const double mu = params[layout.mu_index(noise.mode, l, a)];
            const double sigma = params[layout.sigma_index(noise.mode, l, a)];
            z[static_cast<std::size_t>(l) * layout.noise_dim + a] =
                mu + sigma * noise.epsilon[static_cast<std::size_t>(a)];
        }
    }
    return z;
}

namespace {

struct ProgramBuilder {
    GateProgram program;
    std::span<const double> params;

    void h(int q) { program.gates.push_back({GateOp::Kind::H, q, -1, 0.0, -1, -1, -1}); }
    void cnot(int control, int target) {
        program.gates.push_back({GateOp::Kind::CNOT, target, control, 0.0, -1, -1, -1});
    }
    void rot(GateOp::Kind kind, int q, int param_index) {
        program.gates.push_back(
            {kind, q, -1, params[static_cast<std::size_t>(param_index)], param_index, -1,
             -1});
    }
    void noise_rx(int q, double angle, int layer, int component) {
        program.gates.push_back({GateOp::Kind::RX, q, -1, angle, -1, layer, component});
    }
    void cry(int control, int target, int param_index) {
        program.gates.push_back({GateOp::Kind::CRY, target, control,
                                 params[static_cast<std::size_t>(param_index)],
                                 param_index, -1, -1});
    }
    void mark_layer() { program.layer_end.push_back(program.gates.size()); }
};

// One alternating N2/N3 ladder over the chain. Walking top-down, rung i
// couples (c_i, c_{i+1}) with an N2 gate and (c_i, c_{i+2}) with an N3 gate;
// the walk is mirrored (order and gate orientation) on bottom-up sub-layers,
// and closes with the Ry (x) Ry cap on the last N3 pair.
void emit_ladder(ProgramBuilder& b, const std::vector<int>& chain, bool top_down,
                 int& p) {
    const int a = static_cast<int>(chain.size());
    if (a < 2) {
        return;
    }
    const auto n2 = [&](int i) {
        const int qa = top_down ? chain[i] : chain[i + 1];
        const int qb = top_down ? chain[i + 1] : chain[i];
        b.rot(GateOp::Kind::RY, qa, p++);
        b.rot(GateOp::Kind::RY, qb, p++);
        b.cnot(qa, qb);
        b.rot(GateOp::Kind::RY, qa, p++);
        b.rot(GateOp::Kind::RY, qb, p++);
        b.cnot(qa, qb);
        b.rot(GateOp::Kind::RY, qa, p++);
        b.rot(GateOp::Kind::RY, qb, p++);
    };
    const auto n3 = [&](int i) {
        const int qa = top_down ? chain[i] : chain[i + 2];
        const int qb = top_down ? chain[i + 2] : chain[i];
        b.cnot(qa, qb);
        b.rot(GateOp::Kind::RY, qa, p++);
        b.rot(GateOp::Kind::RY, qb, p++);
        b.cnot(qa, qb);
    };
    int last_n3 = -1;
    if (top_down) {
        for (int i = 0; i < a - 1; ++i) {
            n2(i);
            if (i < a - 2) {
                n3(i);
                last_n3 = i;
            }
        }
    } else {
        for (int i = a - 2; i >= 0; --i) {
            n2(i);
            if (i >= 1) {
                n3(i - 1);
                last_n3 = i - 1;
            }
        }
    }
    if (last_n3 >= 0) {
        const int qa = top_down ? chain[last_n3] : chain[last_n3 + 2];
        const int qb = top_down ? chain[last_n3 + 2] : chain[last_n3];
        b.rot(GateOp::Kind::RY, qa, p++);
        b.rot(GateOp::Kind::RY, qb, p++);
    }
}

} // namespace

GateProgram build_program(const GeneratorConfig& config, std::span<const double> params,
                          const NoiseDraw& noise) {
    const ParamLayout layout = make_layout(config);
    const std::vector<double> z = tuned_noise(config, params, noise);
    const int n = config.qubit_count();

    ProgramBuilder b;
    b.params = params;
    for (int q = 0; q < n; ++q) {
        b.h(q);
    }
    b.mark_layer(); // layer 0: the equal superposition

    if (config.ansatz == Ansatz::TaskAgnostic) {
        for (int l = 0; l < config.layers; ++l) {
            int p = layout.layer_offset(l);
            for (int q = 0; q < n; ++q) {
                b.noise_rx(q, z[static_cast<std::size_t>(l) * layout.noise_dim + q], l, q);
            }
            for (int q = 0; q < n; ++q) {
                b.rot(GateOp::Kind::RZ, q, p++);
                b.rot(GateOp::Kind::RY, q, p++);
                b.rot(GateOp::Kind::RZ, q, p++);
            }
            if (n >= 2) {
                for (int q = 0; q < n; ++q) {
                    b.cnot(q, (q + 1) % n);
                }
            }
            b.mark_layer();
        }
        return std::move(b.program);
    }

    const std::vector<int> chain = address_chain(config);
    const std::vector<int> controls = control_qubits(config);
    const bool has_color = config.encoding != Encoding::Amplitude;
    for (int l = 0; l < config.layers; ++l) {
        int p = layout.layer_offset(l);
        for (int a = 0; a < layout.noise_dim; ++a) {
            b.noise_rx(chain[static_cast<std::size_t>(a)],
                       z[static_cast<std::size_t>(l) * layout.noise_dim + a], l, a);
        }
        for (int s = 0; s < config.sublayers; ++s) {
            emit_ladder(b, chain, s % 2 == 0, p);
        }
        if (has_color) {
            for (int control : controls) {
                b.cry(control, 0, p++);
            }
            b.rot(GateOp::Kind::RY, 0, p++);
        } else if (config.amplitude_rotation_layer) {
            for (int q : chain) {
                b.rot(GateOp::Kind::RY, q, p++);
            }
        }
        QIG_CHECK(p == layout.layer_offset(l) + layout.per_layer,
                  "layer parameter accounting mismatch: consumed ",
                  p - layout.layer_offset(l), ", layout says ", layout.per_layer);
        b.mark_layer();
    }
    return std::move(b.program);
}

void apply_gate(sv::QuantumState& state, const GateOp& g) {
    switch (g.kind) {
    case GateOp::Kind::H:
        sv::apply_hadamard(state, g.target);
        return;
    case GateOp::Kind::RX:
        sv::apply_rotation(state, sv::Axis::X, g.target, g.angle);
        return;
    case GateOp::Kind::RY:
        sv::apply_rotation(state, sv::Axis::Y, g.target, g.angle);
        return;
    case GateOp::Kind::RZ:
        sv::apply_rotation(state, sv::Axis::Z, g.target, g.angle);
        return;
    case GateOp::Kind::CNOT:
        sv::apply_cnot(state, g.control, g.target);
        return;
    case GateOp::Kind::CRY:
        sv::apply_controlled_rotation(state, sv::Axis::Y, g.control, g.target, g.angle);
        return;
    }
}

sv::QuantumState run_program(const GateProgram& program, int n_qubits,
                             std::size_t gate_count) {
    sv::QuantumState state = sv::QuantumState::zero(n_qubits);
    for (std::size_t i = 0; i < gate_count; ++i) {
        apply_gate(state, program.gates[i]);
    }
    return state;
}

sv::QuantumState forward(const GeneratorConfig& config, std::span<const double> params,
                         const NoiseDraw& noise) {
    const GateProgram program = build_program(config, params, noise);
    return run_program(program, config.qubit_count(), program.gates.size());
}

namespace {

void unapply_gate(sv::QuantumState& state, const GateOp& g) {
    switch (g.kind) {
    case GateOp::Kind::H:
        sv::apply_hadamard(state, g.target);
        return;
    case GateOp::Kind::RX:
        sv::apply_rotation(state, sv::Axis::X, g.target, -g.angle);
        return;
    case GateOp::Kind::RY:
        sv::apply_rotation(state, sv::Axis::Y, g.target, -g.angle);
        return;
    case GateOp::Kind::RZ:
        sv::apply_rotation(state, sv::Axis::Z, g.target, -g.angle);
        return;
    case GateOp::Kind::CNOT:
        sv::apply_cnot(state, g.control, g.target);
        return;
    case GateOp::Kind::CRY:
        sv::apply_controlled_rotation(state, sv::Axis::Y, g.control, g.target, -g.angle);
        return;
    }
}

sv::Axis axis_of(GateOp::Kind kind) {
    switch (kind) {
    case GateOp::Kind::RX: return sv::Axis::X;
    case GateOp::Kind::RY:
    case GateOp::Kind::CRY: return sv::Axis::Y;
    default: return sv::Axis::Z;
    }
}

} // namespace

std::vector<double> circuit_gradient(const GeneratorConfig& config,
                                     std::span<const double> params,
                                     const NoiseDraw& noise,
                                     std::span<const double> dprobs) {
    const ParamLayout layout = make_layout(config);
    const GateProgram program = build_program(config, params, noise);
    sv::QuantumState phi = run_program(program, config.qubit_count(), program.gates.size());
    QIG_CHECK(dprobs.size() == phi.dim(), "dprobs length ", dprobs.size(),
              " does not match state dimension ", phi.dim());

    // Costate w = (dL/dp) . psi; dL = 2 Re<w|d psi>. Swept backwards with the
    // state through the inverted gate sequence; each parameterized gate
    // contributes Im<w| G |psi> with G its rotation generator.
    sv::QuantumState w = phi;
    for (std::size_t i = 0; i < w.dim(); ++i) {
        w.amps[i] *= dprobs[i];
    }

    std::vector<double> grad(static_cast<std::size_t>(layout.total), 0.0);
    for (std::size_t k = program.gates.size(); k-- > 0;) {
        const GateOp& g = program.gates[k];
        const bool parameterized = g.kind == GateOp::Kind::RX ||
                                   g.kind == GateOp::Kind::RY ||
                                   g.kind == GateOp::Kind::RZ ||
                                   g.kind == GateOp::Kind::CRY;
        if (parameterized) {
            const int control = g.kind == GateOp::Kind::CRY ? g.control : -1;
            const double d = sv::imag_inner_generator(w, phi, axis_of(g.kind), g.target,
                                                      control);
            if (g.param_index >= 0) {
                grad[static_cast<std::size_t>(g.param_index)] += d;
            } else {
                // noise upload: z = mu + sigma * eps
                const int mu = layout.mu_index(noise.mode, g.noise_layer,
                                               g.noise_component);
                const int sig = layout.sigma_index(noise.mode, g.noise_layer,
                                                   g.noise_component);
                grad[static_cast<std::size_t>(mu)] += d;
                grad[static_cast<std::size_t>(sig)] +=
                    d * noise.epsilon[static_cast<std::size_t>(g.noise_component)];
            }
        }
        unapply_gate(phi, g);
        unapply_gate(w, g);
    }
    return grad;
}

namespace {

class CircuitProbsOp final : public ad::CustomOp {
  public:
    CircuitProbsOp(GeneratorConfig config, NoiseDraw noise)
        : config_(std::move(config)), noise_(std::move(noise)) {}

    std::string_view name() const override { return "circuit_probs"; }

    ad::Tensor forward(std::span<const ad::Tensor* const> inputs) override {
        const ad::Tensor& theta = *inputs[0];
        const sv::QuantumState state = gen::forward(config_, theta.data, noise_);
        return ad::Tensor::vector(sv::probabilities(state));
    }

    void vjp(std::span<const ad::Tensor* const> inputs, const ad::Tensor&,
             const ad::Tensor& out_grad,
             std::span<ad::Tensor* const> input_grads) override {
        const ad::Tensor& theta = *inputs[0];
        const std::vector<double> g =
            circuit_gradient(config_, theta.data, noise_, out_grad.data);
        for (std::size_t i = 0; i < g.size(); ++i) {
            input_grads[0]->data[i] += g[i];
        }
    }

  private:
    GeneratorConfig config_;
    NoiseDraw noise_;
};

} // namespace

ad::NodeId circuit_probs_node(ad::Tape& tape, ad::NodeId params,
                              const GeneratorConfig& config, const NoiseDraw& noise) {
    const ad::NodeId inputs[1] = {params};
    return tape.custom(std::make_shared<CircuitProbsOp>(config, noise),
                       std::span<const ad::NodeId>(inputs));
}

std::vector<std::uint64_t> multinomial_counts(std::span<const double> p,
                                              std::uint64_t shots, Rng& rng) {
    QIG_CHECK(shots >= 1, "shot count must be >= 1");
    std::vector<double> cdf(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        QIG_CHECK(p[i] >= -1e-15, "negative probability ", p[i]);
        acc += std::max(p[i], 0.0);
        cdf[i] = acc;
    }
    QIG_CHECK(acc > 0.0, "probability vector sums to zero");
    std::vector<std::uint64_t> counts(p.size(), 0);
    for (std::uint64_t s = 0; s < shots; ++s) {
        const double u = rng.uniform() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t idx =
            std::min(static_cast<std::size_t>(it - cdf.begin()), p.size() - 1);
        ++counts[idx];
    }
    return counts;
}

std::vector<double> perturb_from_counts(std::span<const double> p,
                                        std::span<const std::uint64_t> counts) {
    QIG_CHECK(p.size() == counts.size(), "count vector length mismatch");
    std::uint64_t total = 0;
    for (std::uint64_t c : counts) {
        total += c;
    }
    QIG_CHECK(total > 0, "empty counts");
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    return out;
}

std::vector<double> shot_noise_perturb(std::span<const double> p, std::uint64_t shots,
                                       Rng& rng) {
    return perturb_from_counts(p, multinomial_counts(p, shots, rng));
}

ad::NodeId shot_perturb_node(ad::Tape& tape, ad::NodeId probs, std::uint64_t shots,
                             Rng& rng) {
    const ad::Tensor& p = tape.value(probs);
    const std::vector<double> hat = shot_noise_perturb(p.data, shots, rng);
    ad::Tensor eps = ad::Tensor::zeros(p.shape);
    for (std::size_t i = 0; i < hat.size(); ++i) {
        eps.data[i] = hat[i] - p.data[i];
    }
    // clip(P + eps) then renormalize; eps is a constant so the gradient flows
    // only through the exact distribution (masked where the clip bites).
    const ad::NodeId clipped = tape.relu(tape.add(probs, tape.constant(std::move(eps))));
    return tape.div(clipped, tape.sum(clipped));
}

codec::ImageTensor decode_probabilities(const GeneratorConfig& config,
                                        const std::vector<double>& probs) {
    switch (config.encoding) {
    case Encoding::FRQI: return codec::frqi_decode(probs, config.side);
    case Encoding::MCRQI: return codec::mcrqi_decode(probs, config.side);
    case Encoding::Amplitude: return codec::amplitude_decode(probs, config.side);
    }
    fail("bad encoding");
}

ad::NodeId decode_node(ad::Tape& tape, ad::NodeId probs, const GeneratorConfig& config) {
    switch (config.encoding) {
    case Encoding::FRQI: return codec::frqi_decode_node(tape, probs, config.side);
    case Encoding::MCRQI: return codec::mcrqi_decode_node(tape, probs, config.side);
    case Encoding::Amplitude:
        return codec::amplitude_decode_node(tape, probs, config.side);
    }
    fail("bad encoding");
}

codec::ImageTensor generate_image(const GeneratorConfig& config,
                                  std::span<const double> params, Rng& rng,
                                  std::optional<std::uint64_t> shots) {
    const NoiseDraw noise = sample_noise(config, rng);
    const sv::QuantumState state = forward(config, params, noise);
    std::vector<double> probs = sv::probabilities(state);
    if (shots.has_value()) {
        probs = shot_noise_perturb(probs, *shots, rng);
    }
    return decode_probabilities(config, probs);
}

} // namespace qig::gen
