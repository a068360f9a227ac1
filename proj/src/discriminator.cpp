#include "qig/discriminator.hpp"

#include <cmath>

namespace qig::critic {

void CriticConfig::validate() const {
    QIG_CHECK(side >= 2, "critic input side ", side, " too small");
    QIG_CHECK(channels == 1 || channels == 3, "critic channels must be 1 or 3, got ",
              channels);
    for (int f : filters) {
        QIG_CHECK(f >= 1, "filter count must be >= 1, got ", f);
    }
    QIG_CHECK(kernel >= 1 && stride >= 1, "bad kernel/stride ", kernel, "/", stride);
}

int conv_out_side(int in, int stride) { return (in + stride - 1) / stride; }

namespace {

ConvPlan make_conv_plan(int in_c, int in_h, int in_w, int filters, int kernel,
                        int stride) {
    ConvPlan plan;
    plan.in_c = in_c;
    plan.in_h = in_h;
    plan.in_w = in_w;
    plan.filters = filters;
    plan.out_h = conv_out_side(in_h, stride);
    plan.out_w = conv_out_side(in_w, stride);
    const int pad_h = std::max((plan.out_h - 1) * stride + kernel - in_h, 0);
    const int pad_w = std::max((plan.out_w - 1) * stride + kernel - in_w, 0);
    const int pad_top = pad_h / 2;
    const int pad_left = pad_w / 2;

    auto idx = std::make_shared<std::vector<std::int64_t>>();
    idx->reserve(static_cast<std::size_t>(in_c) * kernel * kernel * plan.out_h *
                 plan.out_w);
    for (int c = 0; c < in_c; ++c) {
        for (int kh = 0; kh < kernel; ++kh) {
            for (int kw = 0; kw < kernel; ++kw) {
                for (int oh = 0; oh < plan.out_h; ++oh) {
                    for (int ow = 0; ow < plan.out_w; ++ow) {
                        const int r = oh * stride + kh - pad_top;
                        const int col = ow * stride + kw - pad_left;
                        const bool inside =
                            r >= 0 && r < in_h && col >= 0 && col < in_w;
                        idx->push_back(inside ? (static_cast<std::int64_t>(c) * in_h + r) *
                                                        in_w +
                                                    col
                                              : -1);
                    }
                }
            }
        }
    }
    plan.im2col = std::move(idx);

    auto bias_idx = std::make_shared<std::vector<std::int64_t>>();
    bias_idx->reserve(static_cast<std::size_t>(filters) * plan.out_h * plan.out_w);
    for (int f = 0; f < filters; ++f) {
        for (int p = 0; p < plan.out_h * plan.out_w; ++p) {
            bias_idx->push_back(f);
        }
    }
    plan.bias = std::move(bias_idx);
    return plan;
}

} // namespace

CriticPlan make_plan(const CriticConfig& config) {
    config.validate();
    CriticPlan plan;
    plan.config = config;
    int h = config.side;
    int w = config.side;
    int c = config.channels;
    for (int layer = 0; layer < 3; ++layer) {
        plan.conv[static_cast<std::size_t>(layer)] =
            make_conv_plan(c, h, w, config.filters[static_cast<std::size_t>(layer)],
                           config.kernel, config.stride);
        h = plan.conv[static_cast<std::size_t>(layer)].out_h;
        w = plan.conv[static_cast<std::size_t>(layer)].out_w;
        c = config.filters[static_cast<std::size_t>(layer)];
    }
    plan.flat = c * h * w;
    return plan;
}

int CriticNetwork::parameter_count() const {
    int n = 0;
    for (const auto& k : kernels) {
        n += static_cast<int>(k.numel());
    }
    for (const auto& b : biases) {
        n += static_cast<int>(b.numel());
    }
    n += static_cast<int>(dense.numel()) + 1;
    return n;
}

std::vector<double> CriticNetwork::pack() const {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(parameter_count()));
    for (int i = 0; i < 3; ++i) {
        flat.insert(flat.end(), kernels[static_cast<std::size_t>(i)].data.begin(),
                    kernels[static_cast<std::size_t>(i)].data.end());
        flat.insert(flat.end(), biases[static_cast<std::size_t>(i)].data.begin(),
                    biases[static_cast<std::size_t>(i)].data.end());
    }
    flat.insert(flat.end(), dense.data.begin(), dense.data.end());
    flat.push_back(dense_bias.data[0]);
    return flat;
}

void CriticNetwork::unpack(std::span<const double> flat) {
    QIG_CHECK(static_cast<int>(flat.size()) == parameter_count(),
              "critic parameter vector has ", flat.size(), " entries, expected ",
              parameter_count());
    std::size_t off = 0;
    const auto take = [&](ad::Tensor& t) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                  flat.begin() + static_cast<std::ptrdiff_t>(off + t.data.size()),
                  t.data.begin());
        off += t.data.size();
    };
    for (int i = 0; i < 3; ++i) {
        take(kernels[static_cast<std::size_t>(i)]);
        take(biases[static_cast<std::size_t>(i)]);
    }
    take(dense);
    take(dense_bias);
}

CriticNetwork critic_init(const CriticConfig& config, Rng& rng) {
    const CriticPlan plan = make_plan(config);
    CriticNetwork net;
    net.config = config;
    for (int i = 0; i < 3; ++i) {
        const ConvPlan& cp = plan.conv[static_cast<std::size_t>(i)];
        const int fan_in = cp.in_c * config.kernel * config.kernel;
        const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
        ad::Tensor k =
            ad::Tensor::zeros({cp.filters, cp.in_c, config.kernel, config.kernel});
        for (double& v : k.data) {
            v = stddev * rng.normal();
        }
        net.kernels[static_cast<std::size_t>(i)] = std::move(k);
        net.biases[static_cast<std::size_t>(i)] = ad::Tensor::zeros({cp.filters});
    }
    net.dense = ad::Tensor::zeros({plan.flat});
    const double stddev = 1.0 / std::sqrt(static_cast<double>(plan.flat));
    for (double& v : net.dense.data) {
        v = stddev * rng.normal();
    }
    net.dense_bias = ad::Tensor::scalar(0.0);
    return net;
}

CriticNetwork critic_init_zero(const CriticConfig& config) {
    const CriticPlan plan = make_plan(config);
    CriticNetwork net;
    net.config = config;
    for (int i = 0; i < 3; ++i) {
        const ConvPlan& cp = plan.conv[static_cast<std::size_t>(i)];
        net.kernels[static_cast<std::size_t>(i)] =
            ad::Tensor::zeros({cp.filters, cp.in_c, config.kernel, config.kernel});
        net.biases[static_cast<std::size_t>(i)] = ad::Tensor::zeros({cp.filters});
    }
    net.dense = ad::Tensor::zeros({plan.flat});
    net.dense_bias = ad::Tensor::scalar(0.0);
    return net;
}

std::vector<ad::NodeId> CriticLeaves::all() const {
    std::vector<ad::NodeId> ids;
    for (int i = 0; i < 3; ++i) {
        ids.push_back(kernels[static_cast<std::size_t>(i)]);
        ids.push_back(biases[static_cast<std::size_t>(i)]);
    }
    ids.push_back(dense);
    ids.push_back(dense_bias);
    return ids;
}

namespace {

CriticLeaves insert(ad::Tape& tape, const CriticNetwork& net, bool trainable) {
    CriticLeaves leaves;
    const auto put = [&](const ad::Tensor& t) {
        return trainable ? tape.leaf(t) : tape.constant(t);
    };
    for (int i = 0; i < 3; ++i) {
        leaves.kernels[static_cast<std::size_t>(i)] =
            put(net.kernels[static_cast<std::size_t>(i)]);
        leaves.biases[static_cast<std::size_t>(i)] =
            put(net.biases[static_cast<std::size_t>(i)]);
    }
    leaves.dense = put(net.dense);
    leaves.dense_bias = put(net.dense_bias);
    return leaves;
}

ad::NodeId conv_with_plan(ad::Tape& tape, const ConvPlan& plan, ad::NodeId image,
                          ad::NodeId kernel, ad::NodeId bias, int kernel_size) {
    const int rows = plan.in_c * kernel_size * kernel_size;
    const int cols = plan.out_h * plan.out_w;
    const ad::NodeId patches = tape.gather(image, plan.im2col, {rows, cols});
    const ad::NodeId kmat = tape.reshape(kernel, {plan.filters, rows});
    ad::NodeId out = tape.matmul(kmat, patches);
    const ad::NodeId bias_grid = tape.gather(bias, plan.bias, {plan.filters, cols});
    out = tape.add(out, bias_grid);
    return out; // [F, OH*OW]
}

} // namespace

CriticLeaves insert_leaves(ad::Tape& tape, const CriticNetwork& net) {
    return insert(tape, net, true);
}

CriticLeaves insert_constants(ad::Tape& tape, const CriticNetwork& net) {
    return insert(tape, net, false);
}

ad::NodeId conv2d_node(ad::Tape& tape, ad::NodeId image, ad::NodeId kernel,
                       ad::NodeId bias, int stride) {
    const auto& ishape = tape.value(image).shape;
    const auto& kshape = tape.value(kernel).shape;
    QIG_CHECK(ishape.size() == 3, "conv2d image must be [C,H,W], got ",
              ad::shape_str(ishape));
    QIG_CHECK(kshape.size() == 4 && kshape[1] == ishape[0] && kshape[2] == kshape[3],
              "conv2d kernel must be [F,C,K,K] matching image channels, got ",
              ad::shape_str(kshape), " for image ", ad::shape_str(ishape));
    const ConvPlan plan =
        make_conv_plan(ishape[0], ishape[1], ishape[2], kshape[0], kshape[2], stride);
    const ad::NodeId flat =
        conv_with_plan(tape, plan, image, kernel, bias, kshape[2]);
    return tape.reshape(flat, {plan.filters, plan.out_h, plan.out_w});
}

ad::NodeId score_node(ad::Tape& tape, const CriticPlan& plan, const CriticLeaves& leaves,
                      ad::NodeId image) {
    const auto& shape = tape.value(image).shape;
    QIG_CHECK(shape.size() == 3 && shape[0] == plan.config.channels &&
                  shape[1] == plan.config.side && shape[2] == plan.config.side,
              "critic expects a [", plan.config.channels, ",", plan.config.side, ",",
              plan.config.side, "] image, got ", ad::shape_str(shape));
    ad::NodeId x = image;
    for (int i = 0; i < 3; ++i) {
        x = conv_with_plan(tape, plan.conv[static_cast<std::size_t>(i)], x,
                           leaves.kernels[static_cast<std::size_t>(i)],
                           leaves.biases[static_cast<std::size_t>(i)],
                           plan.config.kernel);
        x = tape.leaky_relu(x, plan.config.leaky_slope);
    }
    const ad::NodeId flat = tape.reshape(x, {plan.flat});
    return tape.add(tape.dot(leaves.dense, flat), leaves.dense_bias);
}

ad::Tensor image_to_tensor(const codec::ImageTensor& image) {
    return ad::Tensor({image.channels, image.height, image.width}, image.values);
}

codec::ImageTensor tensor_to_image(const ad::Tensor& t) {
    QIG_CHECK(t.shape.size() == 3, "expected [C,H,W] tensor, got ",
              ad::shape_str(t.shape));
    codec::ImageTensor img;
    img.channels = t.shape[0];
    img.height = t.shape[1];
    img.width = t.shape[2];
    img.values = t.data;
    return img;
}

double critic_forward(const CriticNetwork& net, const codec::ImageTensor& image) {
    ad::Tape tape;
    const CriticPlan plan = make_plan(net.config);
    const CriticLeaves leaves = insert_constants(tape, net);
    const ad::NodeId x = tape.constant(image_to_tensor(image));
    return tape.value(score_node(tape, plan, leaves, x)).scalar_value();
}

ad::Tensor critic_input_gradient(const CriticNetwork& net,
                                 const codec::ImageTensor& image) {
    ad::Tape tape;
    const CriticPlan plan = make_plan(net.config);
    const CriticLeaves leaves = insert_constants(tape, net);
    const ad::NodeId x = tape.leaf(image_to_tensor(image));
    const ad::NodeId score = score_node(tape, plan, leaves, x);
    const ad::NodeId wrt[1] = {x};
    return tape.gradient(score, std::span<const ad::NodeId>(wrt))[0];
}

} // namespace qig::critic
