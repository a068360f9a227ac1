#pragma once

#include "qig/statevector.hpp"
#include "qig/tape.hpp"

#include <string>
#include <vector>

namespace qig::codec {

/// Pixel intensities in [0, 1]. Multi-channel images are stored as channel
/// planes, each row-major, matching the critic's input layout.
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> values;

    static ImageTensor zeros(int h, int w, int c = 1) {
        ImageTensor img;
        img.height = h;
        img.width = w;
        img.channels = c;
        img.values.assign(static_cast<std::size_t>(h) * w * c, 0.0);
        return img;
    }

    std::size_t index(int c, int r, int col) const {
        return (static_cast<std::size_t>(c) * height + r) * width + col;
    }
    double at(int c, int r, int col) const { return values[index(c, r, col)]; }
    double& at(int c, int r, int col) { return values[index(c, r, col)]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

/// Per-pixel color-qubit probability pairs, one block per channel.
struct PixelProbabilities {
    int side = 0;
    int channels = 1;
    // [channel][pixel] in row-major pixel order
    std::vector<std::vector<double>> p0;
    std::vector<std::vector<double>> p1;
};

// Morton (Z-order) indexing. The first bit pair of the index selects the
// quadrant, the next pair the subquadrant, and so on; the row bit is the more
// significant bit within each pair.
std::uint64_t morton_index(int row, int col, int side);
std::pair<int, int> morton_inverse(std::uint64_t index, int side);

/// Address qubit count for a side x side image: A = log2(side^2).
int address_qubits(int side);

sv::QuantumState frqi_encode(const ImageTensor& image);
ImageTensor frqi_decode(const std::vector<double>& probabilities, int side);

sv::QuantumState mcrqi_encode(const ImageTensor& image);
ImageTensor mcrqi_decode(const std::vector<double>& probabilities, int side);

sv::QuantumState amplitude_encode(const ImageTensor& image);
ImageTensor amplitude_decode(const std::vector<double>& probabilities, int side);

PixelProbabilities frqi_pixel_probabilities(const std::vector<double>& probabilities,
                                            int side);
PixelProbabilities mcrqi_pixel_probabilities(const std::vector<double>& probabilities,
                                             int side);

/// Decodes a single pixel from its color-qubit probability pair. Pixels with
/// p0 + p1 = 0 decode to neutral gray 0.5.
double decode_pixel(double p0, double p1);

/// Tape builders for the differentiable decode paths. `probs` is the full
/// 2^n basis probability vector in the statevector's index convention; the
/// result is a [channels, side, side] node.
ad::NodeId frqi_decode_node(ad::Tape& tape, ad::NodeId probs, int side);
ad::NodeId mcrqi_decode_node(ad::Tape& tape, ad::NodeId probs, int side);
ad::NodeId amplitude_decode_node(ad::Tape& tape, ad::NodeId probs, int side);

/// Corner-aligned bilinear resize, output clamped to [0, 1].
ImageTensor bilinear_resize(const ImageTensor& image, int new_side);

ImageTensor invert(const ImageTensor& image);

// Image files: binary PGM (P5) / PPM (P6), 8-bit, round-half-up quantization;
// .imgf64 = (height, width, channels) as 32-bit little-endian + channel
// planes of row-major 64-bit floats.
ImageTensor read_image_file(const std::string& path);
void write_pnm(const ImageTensor& image, const std::string& path);
void write_imgf64(const ImageTensor& image, const std::string& path);
ImageTensor read_imgf64(const std::string& path);

} // namespace qig::codec
