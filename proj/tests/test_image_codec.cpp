#include "doctest.h"

#include "qig/image_codec.hpp"
#include "test_util.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace qig;
using namespace qig::codec;

namespace {

ImageTensor random_image(int side, int channels, Rng& rng) {
    ImageTensor img = ImageTensor::zeros(side, side, channels);
    for (double& v : img.values) {
        v = rng.uniform();
    }
    return img;
}

} // namespace

TEST_CASE("morton hand cases for side 4") {
    CHECK(morton_index(0, 0, 4) == 0);
    CHECK(morton_index(1, 1, 4) == 3);
    // y=10, x=01 interleaved as y1 x1 y0 x0 = 1001
    CHECK(morton_index(2, 1, 4) == 9);
    CHECK(morton_inverse(9, 4) == std::pair<int, int>{2, 1});
}

TEST_CASE("morton is a bijection, exhaustively up to side 32") {
    for (int side : {2, 4, 8, 16, 32}) {
        std::vector<bool> seen(static_cast<std::size_t>(side) * side, false);
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                const std::uint64_t j = morton_index(r, c, side);
                REQUIRE(j < seen.size());
                CHECK(!seen[j]);
                seen[j] = true;
                CHECK(morton_inverse(j, side) == std::pair<int, int>{r, c});
            }
        }
    }
}

TEST_CASE("morton quadrant hierarchy: leading bit pair selects the quadrant") {
    const int side = 8;
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const std::uint64_t j = morton_index(r, c, side);
            const int quadrant = static_cast<int>(j >> 4); // top bit pair of 6
            const int expected = (r >= 4 ? 2 : 0) + (c >= 4 ? 1 : 0);
            CHECK(quadrant == expected);
        }
    }
}

TEST_CASE("morton rejects non-power-of-two sides and out-of-range pixels") {
    CHECK_THROWS_AS((void)morton_index(0, 0, 3), Error);
    CHECK_THROWS_AS((void)morton_index(4, 0, 4), Error);
    CHECK_THROWS_AS((void)morton_inverse(16, 4), Error);
}

TEST_CASE("frqi encoding of flat images") {
    // all-black: amplitude 1/2 on the |0> color block
    ImageTensor black = ImageTensor::zeros(2, 2, 1);
    const sv::QuantumState zero_state = frqi_encode(black);
    for (int j = 0; j < 4; ++j) {
        CHECK(zero_state.amps[j].real() == doctest::Approx(0.5));
        CHECK(std::abs(zero_state.amps[4 + j]) < 1e-15);
    }
    // all-0.5: every amplitude sqrt(2)/4
    ImageTensor gray = ImageTensor::zeros(2, 2, 1);
    for (double& v : gray.values) {
        v = 0.5;
    }
    const sv::QuantumState gray_state = frqi_encode(gray);
    for (int i = 0; i < 8; ++i) {
        CHECK(gray_state.amps[i].real() == doctest::Approx(std::sqrt(2.0) / 4.0));
    }
}

TEST_CASE("frqi encoding of a single white pixel") {
    ImageTensor img = ImageTensor::zeros(2, 2, 1); // pixel (0,0) is morton 0
    img.at(0, 0, 0) = 1.0;
    const sv::QuantumState s = frqi_encode(img);
    CHECK(std::abs(s.amps[0]) < 1e-15);
    CHECK(s.amps[4].real() == doctest::Approx(0.5));
    for (int j = 1; j < 4; ++j) {
        CHECK(s.amps[j].real() == doctest::Approx(0.5));
        CHECK(std::abs(s.amps[4 + j]) < 1e-15);
    }
}

TEST_CASE("frqi encode rejects out-of-range values") {
    ImageTensor img = ImageTensor::zeros(2, 2, 1);
    img.values[0] = 1.5;
    CHECK_THROWS_AS((void)frqi_encode(img), Error);
}

TEST_CASE("frqi decode hand cases") {
    // uniform probabilities decode to the all-gray image
    std::vector<double> uniform(8, 1.0 / 8.0);
    const ImageTensor gray = frqi_decode(uniform, 2);
    for (double v : gray.values) {
        CHECK(v == doctest::Approx(0.5));
    }
    // p0 = 0.03, p1 = 0.01 -> arccos(sqrt(3)/2) = pi/6 -> x = 1/3
    CHECK(decode_pixel(0.03, 0.01) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // unobserved pixel decodes to neutral gray
    CHECK(decode_pixel(0.0, 0.0) == 0.5);
    CHECK_THROWS_AS((void)decode_pixel(-0.1, 0.2), Error);
}

TEST_CASE("frqi roundtrip reproduces random images at sides 2, 4, 8") {
    Rng rng(100);
    for (int side : {2, 4, 8}) {
        const ImageTensor img = random_image(side, 1, rng);
        const std::vector<double> probs = sv::probabilities(frqi_encode(img));
        const ImageTensor back = frqi_decode(probs, side);
        for (std::size_t i = 0; i < img.values.size(); ++i) {
            CHECK(std::abs(back.values[i] - img.values[i]) < 1e-9);
        }
    }
}

TEST_CASE("encoded frqi states have uniform pixel marginals") {
    Rng rng(101);
    const int side = 4;
    const double expected = 1.0 / 16.0;
    for (int trial = 0; trial < 20; ++trial) {
        const ImageTensor img = random_image(side, 1, rng);
        const std::vector<double> probs = sv::probabilities(frqi_encode(img));
        const PixelProbabilities pp = frqi_pixel_probabilities(probs, side);
        for (std::size_t pix = 0; pix < 16; ++pix) {
            CHECK(std::abs(pp.p0[0][pix] + pp.p1[0][pix] - expected) < 1e-10);
        }
    }
}

TEST_CASE("decoding depends only on the p0/p1 ratio") {
    Rng rng(102);
    for (int trial = 0; trial < 50; ++trial) {
        const double p0 = rng.uniform() * 0.1;
        const double p1 = rng.uniform() * 0.1;
        const double c = 0.01 + 5.0 * rng.uniform();
        CHECK(decode_pixel(p0, p1) == doctest::Approx(decode_pixel(c * p0, c * p1)).epsilon(1e-12));
    }
}

TEST_CASE("mcrqi color block of flat black and white pixels") {
    // 2x2 all-black: cosine terms 1 on all four channel slots
    ImageTensor black = ImageTensor::zeros(2, 2, 3);
    const sv::QuantumState s = mcrqi_encode(black);
    REQUIRE(s.n_qubits == 5);
    // color block (intensity, ch1, ch0) for pixel j=0: indices c * 4 at stride 2^A = 4
    for (int ch = 0; ch < 4; ++ch) {
        CHECK(s.amps[static_cast<std::size_t>(ch) * 4].real() == doctest::Approx(0.25));
        CHECK(std::abs(s.amps[static_cast<std::size_t>(4 + ch) * 4]) < 1e-15);
    }
    // all-white: sines 1 on RGB, cosine 1 on the zeroed alpha
    ImageTensor white = ImageTensor::zeros(2, 2, 3);
    for (double& v : white.values) {
        v = 1.0;
    }
    const sv::QuantumState w = mcrqi_encode(white);
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(std::abs(w.amps[static_cast<std::size_t>(ch) * 4]) < 1e-15);
        CHECK(w.amps[static_cast<std::size_t>(4 + ch) * 4].real() == doctest::Approx(0.25));
    }
    CHECK(w.amps[3 * 4].real() == doctest::Approx(0.25)); // alpha |011>
    CHECK(std::abs(w.amps[7 * 4]) < 1e-15);               // alpha |111>
}

TEST_CASE("mcrqi roundtrip reproduces random color images") {
    Rng rng(103);
    for (int side : {2, 4}) {
        const ImageTensor img = random_image(side, 3, rng);
        const std::vector<double> probs = sv::probabilities(mcrqi_encode(img));
        const ImageTensor back = mcrqi_decode(probs, side);
        REQUIRE(back.channels == 3);
        for (std::size_t i = 0; i < img.values.size(); ++i) {
            CHECK(std::abs(back.values[i] - img.values[i]) < 1e-9);
        }
    }
}

TEST_CASE("amplitude encoding hand cases and roundtrip up to scale") {
    ImageTensor onehot = ImageTensor::zeros(2, 2, 1);
    onehot.at(0, 1, 0) = 1.0; // morton index 2
    const sv::QuantumState s = amplitude_encode(onehot);
    CHECK(s.amps[2].real() == doctest::Approx(1.0));

    ImageTensor uniform = ImageTensor::zeros(4, 4, 1);
    for (double& v : uniform.values) {
        v = 0.7;
    }
    const sv::QuantumState u = amplitude_encode(uniform);
    for (const auto& a : u.amps) {
        CHECK(a.real() == doctest::Approx(0.25));
    }

    CHECK_THROWS_AS((void)amplitude_encode(ImageTensor::zeros(2, 2, 1)), Error);

    Rng rng(104);
    ImageTensor img = random_image(4, 1, rng);
    img.values[5] = 1.0; // pin the max so decode rescaling is exact
    const ImageTensor back = amplitude_decode(sv::probabilities(amplitude_encode(img)), 4);
    double max_in = 0.0;
    for (double v : img.values) {
        max_in = std::max(max_in, v);
    }
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        CHECK(std::abs(back.values[i] - img.values[i] / max_in) < 1e-9);
    }
}

TEST_CASE("bilinear resize: constants, identity, and a hand-computed checkerboard") {
    ImageTensor flat = ImageTensor::zeros(4, 4, 1);
    for (double& v : flat.values) {
        v = 0.3;
    }
    const ImageTensor up = bilinear_resize(flat, 8);
    for (double v : up.values) {
        CHECK(v == doctest::Approx(0.3));
    }

    Rng rng(105);
    const ImageTensor same = random_image(4, 1, rng);
    const ImageTensor kept = bilinear_resize(same, 4);
    for (std::size_t i = 0; i < same.values.size(); ++i) {
        CHECK(kept.values[i] == same.values[i]);
    }

    // checkerboard (1,0;0,1) to 4x4 with corner-aligned sampling: sample
    // coordinates are i/3 along each axis
    ImageTensor board = ImageTensor::zeros(2, 2, 1);
    board.at(0, 0, 0) = 1.0;
    board.at(0, 1, 1) = 1.0;
    const ImageTensor big = bilinear_resize(board, 4);
    const auto expected = [](int i, int j) {
        const double fy = i / 3.0;
        const double fx = j / 3.0;
        return (1 - fy) * (1 - fx) * 1.0 + fy * fx * 1.0;
    };
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(big.at(0, i, j) == doctest::Approx(expected(i, j)).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS((void)bilinear_resize(flat, 0), Error);
}

TEST_CASE("pnm and imgf64 files roundtrip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "qig_codec_test";
    fs::create_directories(dir);
    Rng rng(106);

    ImageTensor gray = random_image(4, 1, rng);
    write_pnm(gray, (dir / "g.pgm").string());
    const ImageTensor gray_back = read_image_file((dir / "g.pgm").string());
    for (std::size_t i = 0; i < gray.values.size(); ++i) {
        CHECK(std::abs(gray_back.values[i] - gray.values[i]) <= 0.5 / 255.0 + 1e-12);
    }

    ImageTensor color = random_image(4, 3, rng);
    write_pnm(color, (dir / "c.ppm").string());
    const ImageTensor color_back = read_image_file((dir / "c.ppm").string());
    REQUIRE(color_back.channels == 3);
    for (std::size_t i = 0; i < color.values.size(); ++i) {
        CHECK(std::abs(color_back.values[i] - color.values[i]) <= 0.5 / 255.0 + 1e-12);
    }

    write_imgf64(color, (dir / "c.imgf64").string());
    const ImageTensor lossless = read_imgf64((dir / "c.imgf64").string());
    CHECK(lossless.values == color.values);

    fs::remove_all(dir);
}

TEST_CASE("differentiable decoders agree with the plain decoders") {
    Rng rng(107);
    // frqi
    {
        const ImageTensor img = random_image(4, 1, rng);
        const std::vector<double> probs = sv::probabilities(frqi_encode(img));
        ad::Tape t;
        const ad::NodeId p = t.constant(ad::Tensor::vector(probs));
        const ad::NodeId x = frqi_decode_node(t, p, 4);
        const ImageTensor plain = frqi_decode(probs, 4);
        for (std::size_t i = 0; i < plain.values.size(); ++i) {
            CHECK(t.value(x).data[i] == doctest::Approx(plain.values[i]).epsilon(1e-14));
        }
    }
    // mcrqi
    {
        const ImageTensor img = random_image(2, 3, rng);
        const std::vector<double> probs = sv::probabilities(mcrqi_encode(img));
        ad::Tape t;
        const ad::NodeId p = t.constant(ad::Tensor::vector(probs));
        const ad::NodeId x = mcrqi_decode_node(t, p, 2);
        const ImageTensor plain = mcrqi_decode(probs, 2);
        REQUIRE(t.value(x).shape == std::vector<int>{3, 2, 2});
        for (std::size_t i = 0; i < plain.values.size(); ++i) {
            CHECK(t.value(x).data[i] == doctest::Approx(plain.values[i]).epsilon(1e-14));
        }
    }
    // amplitude
    {
        ImageTensor img = random_image(4, 1, rng);
        img.values[3] = 1.0;
        const std::vector<double> probs = sv::probabilities(amplitude_encode(img));
        ad::Tape t;
        const ad::NodeId p = t.constant(ad::Tensor::vector(probs));
        const ad::NodeId x = amplitude_decode_node(t, p, 4);
        const ImageTensor plain = amplitude_decode(probs, 4);
        for (std::size_t i = 0; i < plain.values.size(); ++i) {
            CHECK(t.value(x).data[i] == doctest::Approx(plain.values[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("frqi decode node gradient matches finite differences") {
    Rng rng(108);
    const ImageTensor img = random_image(2, 1, rng);
    std::vector<double> probs = sv::probabilities(frqi_encode(img));
    const std::vector<double> weights = test::random_vector(4, rng);
    const auto f = [&](const std::vector<double>& p) {
        ad::Tape t;
        const ad::NodeId x = frqi_decode_node(t, t.leaf(ad::Tensor::vector(p)), 2);
        return t.value(t.dot(t.reshape(x, {4}), t.constant(ad::Tensor::vector(weights))))
            .scalar_value();
    };
    ad::Tape t;
    const ad::NodeId p = t.leaf(ad::Tensor::vector(probs));
    const ad::NodeId x = frqi_decode_node(t, p, 2);
    const ad::NodeId y = t.dot(t.reshape(x, {4}), t.constant(ad::Tensor::vector(weights)));
    const ad::NodeId wrt[1] = {p};
    const auto g = t.gradient(y, std::span<const ad::NodeId>(wrt));
    const auto fd = test::central_diff(f, probs, 1e-6);
    CHECK(test::max_rel_error(g[0].data, fd, 1e-5) < 1e-4);
}
