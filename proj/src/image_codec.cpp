#include "qig/image_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>

namespace qig::codec {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_exact(int v) {
    int k = 0;
    while ((1 << k) < v) {
        ++k;
    }
    return k;
}

void check_side(int side) {
    QIG_CHECK(is_power_of_two(side), "image side ", side, " is not a power of two");
}

void check_values(const ImageTensor& image) {
    for (double v : image.values) {
        QIG_CHECK(v >= 0.0 && v <= 1.0, "pixel value ", v, " outside [0,1]");
    }
}

void check_square(const ImageTensor& image) {
    QIG_CHECK(image.height == image.width, "encoding requires a square image, got ",
              image.height, "x", image.width);
    check_side(image.width);
}

} // namespace

std::uint64_t morton_index(int row, int col, int side) {
    check_side(side);
    QIG_CHECK(row >= 0 && row < side && col >= 0 && col < side, "pixel (", row, ",", col,
              ") outside side ", side);
    const int k = log2_exact(side);
    std::uint64_t j = 0;
    for (int b = 0; b < k; ++b) {
        j |= static_cast<std::uint64_t>((col >> b) & 1) << (2 * b);
        j |= static_cast<std::uint64_t>((row >> b) & 1) << (2 * b + 1);
    }
    return j;
}

std::pair<int, int> morton_inverse(std::uint64_t index, int side) {
    check_side(side);
    QIG_CHECK(index < static_cast<std::uint64_t>(side) * side, "morton index ", index,
              " outside ", side, "x", side, " image");
    const int k = log2_exact(side);
    int row = 0;
    int col = 0;
    for (int b = 0; b < k; ++b) {
        col |= static_cast<int>((index >> (2 * b)) & 1) << b;
        row |= static_cast<int>((index >> (2 * b + 1)) & 1) << b;
    }
    return {row, col};
}

int address_qubits(int side) {
    check_side(side);
    return 2 * log2_exact(side);
}

sv::QuantumState frqi_encode(const ImageTensor& image) {
    check_square(image);
    check_values(image);
    QIG_CHECK(image.channels == 1, "frqi_encode expects a grayscale image, got ",
              image.channels, " channels");
    const int side = image.width;
    const int a = address_qubits(side);
    const std::size_t pixels = std::size_t{1} << a;
    const double scale = 1.0 / std::sqrt(static_cast<double>(pixels));
    sv::QuantumState state = sv::QuantumState::zero(a + 1);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const std::uint64_t j = morton_index(r, c, side);
            const double x = image.at(0, r, c);
            state.amps[j] = std::cos(0.5 * kPi * x) * scale;
            state.amps[pixels + j] = std::sin(0.5 * kPi * x) * scale;
        }
    }
    return state;
}

double decode_pixel(double p0, double p1) {
    QIG_CHECK(p0 >= 0.0 && p1 >= 0.0, "negative probability entries (", p0, ", ", p1, ")");
    const double total = p0 + p1;
    if (total <= 0.0) {
        return 0.5; // pixel never observed: neutral gray
    }
    return (2.0 / kPi) * std::atan2(std::sqrt(p1), std::sqrt(p0));
}

PixelProbabilities frqi_pixel_probabilities(const std::vector<double>& probabilities,
                                            int side) {
    const int a = address_qubits(side);
    const std::size_t pixels = std::size_t{1} << a;
    QIG_CHECK(probabilities.size() == 2 * pixels, "expected ", 2 * pixels,
              " basis probabilities for side ", side, ", got ", probabilities.size());
    PixelProbabilities pp;
    pp.side = side;
    pp.channels = 1;
    pp.p0.assign(1, std::vector<double>(pixels));
    pp.p1.assign(1, std::vector<double>(pixels));
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const std::uint64_t j = morton_index(r, c, side);
            const std::size_t pix = static_cast<std::size_t>(r) * side + c;
            pp.p0[0][pix] = probabilities[j];
            pp.p1[0][pix] = probabilities[pixels + j];
        }
    }
    return pp;
}

ImageTensor frqi_decode(const std::vector<double>& probabilities, int side) {
    const PixelProbabilities pp = frqi_pixel_probabilities(probabilities, side);
    ImageTensor img = ImageTensor::zeros(side, side, 1);
    for (std::size_t pix = 0; pix < img.pixel_count(); ++pix) {
        img.values[pix] = decode_pixel(pp.p0[0][pix], pp.p1[0][pix]);
    }
    return img;
}

sv::QuantumState mcrqi_encode(const ImageTensor& image) {
    check_square(image);
    check_values(image);
    QIG_CHECK(image.channels == 3, "mcrqi_encode expects a 3-channel image, got ",
              image.channels);
    const int side = image.width;
    const int a = address_qubits(side);
    const std::size_t pixels = std::size_t{1} << a;
    const double scale = 0.5 / std::sqrt(static_cast<double>(pixels));
    sv::QuantumState state = sv::QuantumState::zero(a + 3);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const std::uint64_t j = morton_index(r, c, side);
            for (int ch = 0; ch < 4; ++ch) {
                const double x = ch < 3 ? image.at(ch, r, c) : 0.0; // alpha pinned to 0
                const std::size_t base = static_cast<std::size_t>(ch) << a;
                state.amps[base + j] = std::cos(0.5 * kPi * x) * scale;
                state.amps[(std::size_t{4} << a) + base + j] =
                    std::sin(0.5 * kPi * x) * scale;
            }
        }
    }
    return state;
}

PixelProbabilities mcrqi_pixel_probabilities(const std::vector<double>& probabilities,
                                             int side) {
    const int a = address_qubits(side);
    const std::size_t pixels = std::size_t{1} << a;
    QIG_CHECK(probabilities.size() == 8 * pixels, "expected ", 8 * pixels,
              " basis probabilities for side ", side, ", got ", probabilities.size());
    PixelProbabilities pp;
    pp.side = side;
    pp.channels = 3;
    pp.p0.assign(3, std::vector<double>(pixels));
    pp.p1.assign(3, std::vector<double>(pixels));
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const std::uint64_t j = morton_index(r, c, side);
            const std::size_t pix = static_cast<std::size_t>(r) * side + c;
            for (int ch = 0; ch < 3; ++ch) { // alpha block ignored
                const std::size_t base = static_cast<std::size_t>(ch) << a;
                pp.p0[ch][pix] = probabilities[base + j];
                pp.p1[ch][pix] = probabilities[(std::size_t{4} << a) + base + j];
            }
        }
    }
    return pp;
}

ImageTensor mcrqi_decode(const std::vector<double>& probabilities, int side) {
    const PixelProbabilities pp = mcrqi_pixel_probabilities(probabilities, side);
    ImageTensor img = ImageTensor::zeros(side, side, 3);
    for (int ch = 0; ch < 3; ++ch) {
        for (std::size_t pix = 0; pix < img.pixel_count(); ++pix) {
            img.values[static_cast<std::size_t>(ch) * img.pixel_count() + pix] =
                decode_pixel(pp.p0[ch][pix], pp.p1[ch][pix]);
        }
    }
    return img;
}

sv::QuantumState amplitude_encode(const ImageTensor& image) {
    check_square(image);
    check_values(image);
    QIG_CHECK(image.channels == 1, "amplitude_encode expects a grayscale image");
    const int side = image.width;
    const int a = address_qubits(side);
    double norm_sq = 0.0;
    for (double v : image.values) {
        norm_sq += v * v;
    }
    QIG_CHECK(norm_sq > 0.0, "amplitude encoding of the all-zero image is undefined");
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    sv::QuantumState state = sv::QuantumState::zero(a);
    state.amps[0] = 0.0;
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            state.amps[morton_index(r, c, side)] = image.at(0, r, c) * inv_norm;
        }
    }
    return state;
}

ImageTensor amplitude_decode(const std::vector<double>& probabilities, int side) {
    const int a = address_qubits(side);
    const std::size_t pixels = std::size_t{1} << a;
    QIG_CHECK(probabilities.size() == pixels, "expected ", pixels,
              " basis probabilities for side ", side, ", got ", probabilities.size());
    ImageTensor img = ImageTensor::zeros(side, side, 1);
    double max_s = 0.0;
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const double p = probabilities[morton_index(r, c, side)];
            QIG_CHECK(p >= 0.0, "negative probability entry ", p);
            const double s = std::sqrt(p);
            img.at(0, r, c) = s;
            max_s = std::max(max_s, s);
        }
    }
    if (max_s > 0.0) {
        for (double& v : img.values) {
            v /= max_s;
        }
    }
    return img;
}

namespace {

using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;

IndexMap make_pixel_map(int side, std::int64_t block_offset) {
    auto idx = std::make_shared<std::vector<std::int64_t>>();
    idx->reserve(static_cast<std::size_t>(side) * side);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            idx->push_back(block_offset +
                           static_cast<std::int64_t>(morton_index(r, c, side)));
        }
    }
    return idx;
}

// mask * x + (1 - mask) * 0.5
ad::NodeId gray_fallback(ad::Tape& tape, ad::NodeId x, ad::NodeId mask) {
    const ad::NodeId masked = tape.mul(mask, x);
    const ad::NodeId inv_mask = tape.offset(tape.neg(mask), 1.0);
    return tape.add(masked, tape.scale(inv_mask, 0.5));
}

ad::NodeId decode_pair_node(ad::Tape& tape, ad::NodeId probs, int side,
                            std::int64_t off0, std::int64_t off1) {
    const std::vector<int> flat{side * side};
    const ad::NodeId p0 = tape.gather(probs, make_pixel_map(side, off0), flat);
    const ad::NodeId p1 = tape.gather(probs, make_pixel_map(side, off1), flat);
    const ad::NodeId mask = tape.pos_mask(tape.add(p0, p1));
    const ad::NodeId angle = tape.atan2(tape.sqrt(p1), tape.sqrt(p0));
    return gray_fallback(tape, tape.scale(angle, 2.0 / kPi), mask);
}

} // namespace

ad::NodeId frqi_decode_node(ad::Tape& tape, ad::NodeId probs, int side) {
    const int a = address_qubits(side);
    QIG_CHECK(tape.value(probs).numel() == std::int64_t{1} << (a + 1),
              "frqi decode expects ", std::int64_t{1} << (a + 1), " probabilities, got ",
              tape.value(probs).numel());
    const ad::NodeId x = decode_pair_node(tape, probs, side, 0, std::int64_t{1} << a);
    return tape.reshape(x, {1, side, side});
}

ad::NodeId mcrqi_decode_node(ad::Tape& tape, ad::NodeId probs, int side) {
    const int a = address_qubits(side);
    QIG_CHECK(tape.value(probs).numel() == std::int64_t{8} << a, "mcrqi decode expects ",
              std::int64_t{8} << a, " probabilities, got ", tape.value(probs).numel());
    const std::int64_t pixels = std::int64_t{1} << a;
    ad::NodeId out = ad::kNoNode;
    for (int ch = 0; ch < 3; ++ch) {
        const ad::NodeId x =
            decode_pair_node(tape, probs, side, ch * pixels, (4 + ch) * pixels);
        // stack channel planes into [3, side, side]
        auto idx = std::make_shared<std::vector<std::int64_t>>();
        idx->reserve(static_cast<std::size_t>(pixels));
        for (std::int64_t i = 0; i < pixels; ++i) {
            idx->push_back(ch * pixels + i);
        }
        const ad::NodeId placed = tape.scatter_add(x, idx, {3, side, side});
        out = out == ad::kNoNode ? placed : tape.add(out, placed);
    }
    return out;
}

ad::NodeId amplitude_decode_node(ad::Tape& tape, ad::NodeId probs, int side) {
    const int a = address_qubits(side);
    QIG_CHECK(tape.value(probs).numel() == std::int64_t{1} << a,
              "amplitude decode expects ", std::int64_t{1} << a, " probabilities, got ",
              tape.value(probs).numel());
    const ad::NodeId s =
        tape.sqrt(tape.gather(probs, make_pixel_map(side, 0), {side * side}));
    const ad::NodeId x = tape.div(s, tape.max_reduce(s));
    return tape.reshape(x, {1, side, side});
}

ImageTensor bilinear_resize(const ImageTensor& image, int new_side) {
    QIG_CHECK(new_side > 0, "resize target must be positive, got ", new_side);
    if (new_side == image.height && new_side == image.width) {
        return image;
    }
    ImageTensor out = ImageTensor::zeros(new_side, new_side, image.channels);
    const double ry =
        new_side > 1 ? static_cast<double>(image.height - 1) / (new_side - 1) : 0.0;
    const double rx =
        new_side > 1 ? static_cast<double>(image.width - 1) / (new_side - 1) : 0.0;
    for (int ch = 0; ch < image.channels; ++ch) {
        for (int i = 0; i < new_side; ++i) {
            const double sy = i * ry;
            const int y0 = std::min(static_cast<int>(sy), image.height - 1);
            const int y1 = std::min(y0 + 1, image.height - 1);
            const double fy = sy - y0;
            for (int j = 0; j < new_side; ++j) {
                const double sx = j * rx;
                const int x0 = std::min(static_cast<int>(sx), image.width - 1);
                const int x1 = std::min(x0 + 1, image.width - 1);
                const double fx = sx - x0;
                const double v = (1 - fy) * ((1 - fx) * image.at(ch, y0, x0) +
                                             fx * image.at(ch, y0, x1)) +
                                 fy * ((1 - fx) * image.at(ch, y1, x0) +
                                       fx * image.at(ch, y1, x1));
                out.at(ch, i, j) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

ImageTensor invert(const ImageTensor& image) {
    ImageTensor out = image;
    for (double& v : out.values) {
        v = 1.0 - v;
    }
    return out;
}

namespace {

int read_pnm_token(std::istream& is) {
    // skips whitespace and '#' comments
    for (;;) {
        int c = is.peek();
        QIG_CHECK(c != EOF, "truncated image header");
        if (std::isspace(c)) {
            is.get();
        } else if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else {
            break;
        }
    }
    int v = 0;
    QIG_CHECK(static_cast<bool>(is >> v), "malformed image header");
    return v;
}

} // namespace

ImageTensor read_image_file(const std::string& path) {
    if (path.size() > 7 && path.substr(path.size() - 7) == ".imgf64") {
        return read_imgf64(path);
    }
    std::ifstream is(path, std::ios::binary);
    QIG_CHECK(is.is_open(), "cannot open ", path);
    char magic[2] = {0, 0};
    is.read(magic, 2);
    QIG_CHECK(is.gcount() == 2 && magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'),
              path, ": expected binary PGM (P5) or PPM (P6)");
    const int channels = magic[1] == '5' ? 1 : 3;
    const int width = read_pnm_token(is);
    const int height = read_pnm_token(is);
    const int maxval = read_pnm_token(is);
    QIG_CHECK(maxval == 255, path, ": only 8-bit images supported, maxval=", maxval);
    is.get(); // single whitespace after header
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    std::vector<unsigned char> raw(count);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    QIG_CHECK(static_cast<std::size_t>(is.gcount()) == count, path,
              ": truncated payload, expected ", count, " bytes, got ", is.gcount());
    ImageTensor img = ImageTensor::zeros(height, width, channels);
    // interleaved samples -> channel planes
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            for (int ch = 0; ch < channels; ++ch) {
                img.at(ch, r, c) =
                    raw[(static_cast<std::size_t>(r) * width + c) * channels + ch] / 255.0;
            }
        }
    }
    return img;
}

void write_pnm(const ImageTensor& image, const std::string& path) {
    QIG_CHECK(image.channels == 1 || image.channels == 3, "pnm supports 1 or 3 channels");
    std::ofstream os(path, std::ios::binary);
    QIG_CHECK(os.is_open(), "cannot open ", path, " for writing");
    os << (image.channels == 1 ? "P5" : "P6") << "\n"
       << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> raw;
    raw.reserve(image.values.size());
    for (int r = 0; r < image.height; ++r) {
        for (int c = 0; c < image.width; ++c) {
            for (int ch = 0; ch < image.channels; ++ch) {
                const double v = std::clamp(image.at(ch, r, c), 0.0, 1.0);
                raw.push_back(static_cast<unsigned char>(std::floor(v * 255.0 + 0.5)));
            }
        }
    }
    os.write(reinterpret_cast<const char*>(raw.data()),
             static_cast<std::streamsize>(raw.size()));
    QIG_CHECK(os.good(), "write failed: ", path);
}

void write_imgf64(const ImageTensor& image, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    QIG_CHECK(os.is_open(), "cannot open ", path, " for writing");
    const std::int32_t header[3] = {image.height, image.width, image.channels};
    os.write(reinterpret_cast<const char*>(header), sizeof(header));
    os.write(reinterpret_cast<const char*>(image.values.data()),
             static_cast<std::streamsize>(image.values.size() * sizeof(double)));
    QIG_CHECK(os.good(), "write failed: ", path);
}

ImageTensor read_imgf64(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    QIG_CHECK(is.is_open(), "cannot open ", path);
    std::int32_t header[3];
    is.read(reinterpret_cast<char*>(header), sizeof(header));
    QIG_CHECK(is.gcount() == sizeof(header), path, ": truncated imgf64 header");
    QIG_CHECK(header[0] > 0 && header[1] > 0 && (header[2] == 1 || header[2] == 3), path,
              ": bad imgf64 dimensions ", header[0], "x", header[1], "x", header[2]);
    ImageTensor img = ImageTensor::zeros(header[0], header[1], header[2]);
    const std::streamsize bytes =
        static_cast<std::streamsize>(img.values.size() * sizeof(double));
    is.read(reinterpret_cast<char*>(img.values.data()), bytes);
    QIG_CHECK(is.gcount() == bytes, path, ": truncated imgf64 payload, expected ", bytes,
              " bytes, got ", is.gcount());
    return img;
}

} // namespace qig::codec
