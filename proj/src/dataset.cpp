#include "qig/dataset.hpp"

#include <algorithm>
#include <fstream>

namespace qig::data {

namespace {

std::uint32_t read_be32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    QIG_CHECK(is.gcount() == 4, path, ": truncated header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
           (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    QIG_CHECK(is.is_open(), "cannot open ", path);
    const std::uint32_t magic = read_be32(is, path);
    QIG_CHECK(magic == 2049, path, ": bad label magic ", magic, ", expected 2049");
    const std::uint32_t count = read_be32(is, path);
    std::vector<unsigned char> raw(count);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    QIG_CHECK(static_cast<std::uint32_t>(is.gcount()) == count, path,
              ": truncated labels, expected ", count, " bytes, got ", is.gcount());
    return std::vector<int>(raw.begin(), raw.end());
}

} // namespace

Dataset load_idx(const std::string& images_path,
                 const std::optional<std::string>& labels_path,
                 const std::vector<int>& class_filter, std::optional<int> resize_to) {
    std::ifstream is(images_path, std::ios::binary);
    QIG_CHECK(is.is_open(), "cannot open ", images_path);
    const std::uint32_t magic = read_be32(is, images_path);
    QIG_CHECK(magic == 2051, images_path, ": bad image magic ", magic, ", expected 2051");
    const std::uint32_t count = read_be32(is, images_path);
    const std::uint32_t rows = read_be32(is, images_path);
    const std::uint32_t cols = read_be32(is, images_path);
    const std::size_t expected = std::size_t{count} * rows * cols;
    std::vector<unsigned char> raw(expected);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
    QIG_CHECK(static_cast<std::size_t>(is.gcount()) == expected, images_path,
              ": truncated payload, expected ", expected, " pixel bytes, got ",
              is.gcount());

    std::vector<int> labels;
    if (labels_path.has_value()) {
        labels = load_idx_labels(*labels_path);
        QIG_CHECK(labels.size() == count, "label count ", labels.size(),
                  " does not match image count ", count);
    }
    QIG_CHECK(class_filter.empty() || !labels.empty(),
              "class filter requires a labels file");

    Dataset ds;
    ds.provenance = images_path;
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!class_filter.empty() &&
            std::find(class_filter.begin(), class_filter.end(), labels[i]) ==
                class_filter.end()) {
            continue;
        }
        codec::ImageTensor img = codec::ImageTensor::zeros(static_cast<int>(rows),
                                                           static_cast<int>(cols), 1);
        const std::size_t base = std::size_t{i} * rows * cols;
        for (std::size_t p = 0; p < std::size_t{rows} * cols; ++p) {
            img.values[p] = raw[base + p] / 255.0;
        }
        if (resize_to.has_value()) {
            img = codec::bilinear_resize(img, *resize_to);
        }
        ds.images.push_back(std::move(img));
        if (!labels.empty()) {
            ds.labels.push_back(labels[i]);
        }
    }
    return ds;
}

Dataset make_synthetic(const std::string& kind, int side, int count, Rng& rng) {
    QIG_CHECK(count > 0, "synthetic dataset needs count > 0");
    QIG_CHECK(side >= 2 && (side & (side - 1)) == 0, "side ", side,
              " must be a power of two >= 2");
    Dataset ds;
    ds.provenance = "synthetic:" + kind;
    ds.images.reserve(static_cast<std::size_t>(count));
    ds.labels.reserve(static_cast<std::size_t>(count));

    if (kind == "quadrant") {
        const int half = side / 2;
        for (int i = 0; i < count; ++i) {
            const int quadrant = static_cast<int>(rng.below(4));
            codec::ImageTensor img = codec::ImageTensor::zeros(side, side, 1);
            const int r0 = (quadrant / 2) * half;
            const int c0 = (quadrant % 2) * half;
            for (int r = 0; r < half; ++r) {
                for (int c = 0; c < half; ++c) {
                    img.at(0, r0 + r, c0 + c) = 1.0;
                }
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(quadrant);
        }
        return ds;
    }
    if (kind == "bimodal") {
        // Two patterns, dark pixels in [0.05, 0.15], bright in [0.90, 1.00]:
        // no center-pixel mass anywhere near [0.4, 0.6].
        for (int i = 0; i < count; ++i) {
            const int bright = static_cast<int>(rng.below(2));
            codec::ImageTensor img = codec::ImageTensor::zeros(side, side, 1);
            for (double& v : img.values) {
                const double jitter = 0.10 * rng.uniform();
                v = bright ? 0.90 + jitter : 0.05 + jitter;
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(bright);
        }
        return ds;
    }
    if (kind == "stripes") {
        for (int i = 0; i < count; ++i) {
            const int vertical = static_cast<int>(rng.below(2));
            const int phase = static_cast<int>(rng.below(2));
            codec::ImageTensor img = codec::ImageTensor::zeros(side, side, 1);
            for (int r = 0; r < side; ++r) {
                for (int c = 0; c < side; ++c) {
                    const int band = vertical ? c : r;
                    img.at(0, r, c) = (band + phase) % 2 == 0 ? 1.0 : 0.0;
                }
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(vertical);
        }
        return ds;
    }
    fail("unknown synthetic dataset kind '", kind, "' (expected quadrant|bimodal|stripes)");
}

} // namespace qig::data
