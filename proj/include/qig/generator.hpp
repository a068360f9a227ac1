#pragma once

#include "qig/image_codec.hpp"
#include "qig/rng.hpp"
#include "qig/statevector.hpp"
#include "qig/tape.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qig::gen {

enum class Encoding : std::uint8_t { FRQI, MCRQI, Amplitude };
enum class Ansatz : std::uint8_t { TaskSpecific, TaskAgnostic };

std::string to_string(Encoding e);
std::string to_string(Ansatz a);
Encoding encoding_from_string(const std::string& s);
Ansatz ansatz_from_string(const std::string& s);

/// Generator hyperparameters. The task-specific ansatz places, per layer,
/// `sublayers` alternating N2/N3 ladders over the address qubits (direction
/// alternating top-down / bottom-up), followed by one controlled Ry per
/// control qubit onto the color qubit and a single color-qubit Ry. For MCRQI
/// the two channel-selector qubits are decoded as the two finest address
/// qubits and act as two extra controlled-Ry controls; noise uploads and the
/// entangling ladders stay on the spatial address qubits, which is the
/// accounting that reproduces the published parameter counts.
struct GeneratorConfig {
    Encoding encoding = Encoding::FRQI;
    Ansatz ansatz = Ansatz::TaskSpecific;
    int side = 4;      // image side, power of two
    int layers = 8;    // L
    int sublayers = 2; // entangling ladders per layer
    int modes = 2;     // M noise modes
    // Amplitude-encoding arm: the controlled color-rotation layer does not
    // exist; this flag swaps in a per-qubit Ry layer instead of omitting it.
    bool amplitude_rotation_layer = false;

    int address_qubit_count() const { return codec::address_qubits(side); }

    int qubit_count() const {
        const int a = address_qubit_count();
        switch (encoding) {
        case Encoding::FRQI: return a + 1;
        case Encoding::MCRQI: return a + 3;
        case Encoding::Amplitude: return a;
        }
        return 0;
    }

    /// Noise components per draw: address qubits for the task-specific
    /// ansatz, all qubits for the task-agnostic one.
    int noise_dim() const {
        return ansatz == Ansatz::TaskSpecific ? address_qubit_count() : qubit_count();
    }

    void validate() const;
    bool operator==(const GeneratorConfig&) const = default;
};

/// Flat parameter vector layout, version 1:
///   [ noise_mu (M x L x A_n) | noise_sigma (M x L x A_n) | per-layer blocks ]
/// Task-specific layer block: per sub-layer, ladder parameters in walk order
/// (N2 and N3 gates interleaved, then the 2-parameter cap), then controlled-Ry
/// angles by control qubit index, then the color-qubit Ry.
/// Task-agnostic layer block: per qubit, the Rz-Ry-Rz angle triple.
struct ParamLayout {
    static constexpr int kVersion = 1;
    int noise_dim = 0;
    int layers = 0;
    int modes = 0;
    int noise_block = 0; // 2 * M * L * A_n
    int per_layer = 0;
    int total = 0;

    int mu_index(int mode, int layer, int component) const {
        return (mode * layers + layer) * noise_dim + component;
    }
    int sigma_index(int mode, int layer, int component) const {
        return noise_block / 2 + mu_index(mode, layer, component);
    }
    int layer_offset(int layer) const { return noise_block + layer * per_layer; }
};

ParamLayout make_layout(const GeneratorConfig& config);

/// Closed-form trainable parameter count for a configuration.
int count_parameters(const GeneratorConfig& config);

struct NoiseDraw {
    int mode = 0;                // 0-based
    std::vector<double> epsilon; // length A_n, shared across layers
};

/// Draws mode ~ U{1..M} then the Gaussian components of epsilon, in that
/// order, from `rng`.
NoiseDraw sample_noise(const GeneratorConfig& config, Rng& rng);

/// Tuned noise z_{m,l} = mu_{m,l} + sigma_{m,l} . epsilon for the drawn mode;
/// returns the L x A_n matrix flattened layer-major.
std::vector<double> tuned_noise(const GeneratorConfig& config,
                                std::span<const double> params, const NoiseDraw& noise);

struct GateOp {
    enum class Kind : std::uint8_t { H, RX, RY, RZ, CNOT, CRY } kind = Kind::H;
    int target = -1;
    int control = -1;     // CNOT / CRY only
    double angle = 0.0;
    int param_index = -1; // index into the flat parameter vector, -1 for noise/fixed
    int noise_layer = -1; // for noise uploads: z indices for the mu/sigma chain rule
    int noise_component = -1;
};

struct GateProgram {
    std::vector<GateOp> gates;
    /// gates[0 .. layer_end[l]) is the circuit through layer l; layer_end[0]
    /// marks the initial Hadamard wall.
    std::vector<std::size_t> layer_end;
};

GateProgram build_program(const GeneratorConfig& config, std::span<const double> params,
                          const NoiseDraw& noise);

void apply_gate(sv::QuantumState& state, const GateOp& gate);

sv::QuantumState run_program(const GateProgram& program, int n_qubits,
                             std::size_t gate_count);

/// Circuit forward pass: |0...0> -> ansatz state.
sv::QuantumState forward(const GeneratorConfig& config, std::span<const double> params,
                         const NoiseDraw& noise);

/// Adjoint-method gradient of sum_i dprobs[i] * p_i(theta) with respect to
/// the full flat parameter vector (noise-tuning entries included via the
/// reparameterization chain rule).
std::vector<double> circuit_gradient(const GeneratorConfig& config,
                                     std::span<const double> params,
                                     const NoiseDraw& noise,
                                     std::span<const double> dprobs);

/// Tape node producing the 2^n basis probabilities from the flat parameter
/// leaf. Backward is the adjoint sweep (first-order; the WGAN objectives
/// never differentiate twice through the circuit).
ad::NodeId circuit_probs_node(ad::Tape& tape, ad::NodeId params,
                              const GeneratorConfig& config, const NoiseDraw& noise);

/// Multinomial counts of `shots` draws from p.
std::vector<std::uint64_t> multinomial_counts(std::span<const double> p,
                                              std::uint64_t shots, Rng& rng);

/// Empirical distribution counts / shots.
std::vector<double> perturb_from_counts(std::span<const double> p,
                                        std::span<const std::uint64_t> counts);

std::vector<double> shot_noise_perturb(std::span<const double> p, std::uint64_t shots,
                                       Rng& rng);

/// Tape version: numerically equals the renormalized clipped empirical
/// distribution; the gradient path sees only the exact probabilities (the
/// deviation enters as a constant).
ad::NodeId shot_perturb_node(ad::Tape& tape, ad::NodeId probs, std::uint64_t shots,
                             Rng& rng);

/// Full generation pipeline: noise -> circuit -> probabilities
/// [-> shot noise] -> decode. Deterministic given the rng state.
codec::ImageTensor generate_image(const GeneratorConfig& config,
                                  std::span<const double> params, Rng& rng,
                                  std::optional<std::uint64_t> shots = std::nullopt);

codec::ImageTensor decode_probabilities(const GeneratorConfig& config,
                                        const std::vector<double>& probs);

ad::NodeId decode_node(ad::Tape& tape, ad::NodeId probs, const GeneratorConfig& config);

} // namespace qig::gen
