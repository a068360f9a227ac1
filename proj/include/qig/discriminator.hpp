#pragma once

#include "qig/image_codec.hpp"
#include "qig/rng.hpp"
#include "qig/tape.hpp"

#include <array>

namespace qig::critic {

/// Three stride-2 "same"-padded 5x5 convolutions with leaky-ReLU activations,
/// then a dense layer to a single unpenalized scalar. Filter counts follow
/// the WGAN-GP MNIST critic (64/128/256); desk-scale runs shrink them.
struct CriticConfig {
    int side = 32;
    int channels = 1;
    std::array<int, 3> filters{64, 128, 256};
    int kernel = 5;
    int stride = 2;
    double leaky_slope = 0.2;

    void validate() const;
    bool operator==(const CriticConfig&) const = default;
};

/// Precomputed index maps for the im2col convolutions; immutable and shared
/// across tapes/threads.
struct ConvPlan {
    int in_c = 0, in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;
    int filters = 0;
    std::shared_ptr<const std::vector<std::int64_t>> im2col; // [C*K*K, OH*OW]
    std::shared_ptr<const std::vector<std::int64_t>> bias;   // broadcast [F, OH*OW]
};

struct CriticPlan {
    CriticConfig config;
    std::array<ConvPlan, 3> conv;
    int flat = 0; // flattened feature count feeding the dense layer
};

CriticPlan make_plan(const CriticConfig& config);

/// Output spatial side of one "same"-padded strided convolution.
int conv_out_side(int in, int stride);

struct CriticNetwork {
    CriticConfig config;
    std::array<ad::Tensor, 3> kernels; // [F, C, K, K]
    std::array<ad::Tensor, 3> biases;  // [F]
    ad::Tensor dense;                  // [flat]
    ad::Tensor dense_bias;             // scalar

    int parameter_count() const;
    std::vector<double> pack() const;
    void unpack(std::span<const double> flat);
};

/// Weights ~ N(0, 1/fan_in), biases zero; bit-reproducible per seed.
CriticNetwork critic_init(const CriticConfig& config, Rng& rng);
CriticNetwork critic_init_zero(const CriticConfig& config);

struct CriticLeaves {
    std::array<ad::NodeId, 3> kernels{};
    std::array<ad::NodeId, 3> biases{};
    ad::NodeId dense = ad::kNoNode;
    ad::NodeId dense_bias = ad::kNoNode;

    std::vector<ad::NodeId> all() const;
};

/// Inserts the weights as trainable leaves (for critic updates) or constants
/// (for generator updates).
CriticLeaves insert_leaves(ad::Tape& tape, const CriticNetwork& net);
CriticLeaves insert_constants(ad::Tape& tape, const CriticNetwork& net);

/// Builds the critic forward pass; `image` is a [C, H, W] node.
ad::NodeId score_node(ad::Tape& tape, const CriticPlan& plan, const CriticLeaves& leaves,
                      ad::NodeId image);

/// Generic "same"-padded strided convolution builder (also usable standalone,
/// e.g. stride-1 3x3 test cases): image [C,H,W] (*) kernel [F,C,K,K] -> [F,OH,OW].
ad::NodeId conv2d_node(ad::Tape& tape, ad::NodeId image, ad::NodeId kernel,
                       ad::NodeId bias, int stride);

double critic_forward(const CriticNetwork& net, const codec::ImageTensor& image);

/// Exact input gradient d score / d image as a plain tensor.
ad::Tensor critic_input_gradient(const CriticNetwork& net,
                                 const codec::ImageTensor& image);

ad::Tensor image_to_tensor(const codec::ImageTensor& image);
codec::ImageTensor tensor_to_image(const ad::Tensor& t);

} // namespace qig::critic
