#pragma once

#include "qig/image_codec.hpp"
#include "qig/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qig::data {

struct Dataset {
    std::vector<codec::ImageTensor> images;
    std::vector<int> labels; // empty when unlabeled
    std::string provenance;

    std::size_t size() const { return images.size(); }
    const codec::ImageTensor& sample(Rng& rng) const {
        QIG_CHECK(!images.empty(), "sampling from an empty dataset");
        return images[rng.below(images.size())];
    }
};

/// Big-endian IDX files (magic 2051 for images, 2049 for labels), pixel bytes
/// mapped to [0,1] by /255. Optional class filter and square bilinear resize.
Dataset load_idx(const std::string& images_path,
                 const std::optional<std::string>& labels_path = std::nullopt,
                 const std::vector<int>& class_filter = {},
                 std::optional<int> resize_to = std::nullopt);

/// Synthetic desk-scale datasets:
///   "quadrant" - one bright quadrant on a black image, label = quadrant id
///   "bimodal"  - two-pattern set with near-black / near-white pixels (the
///                center-pixel histogram is bimodal), label = pattern
///   "stripes"  - alternating bars, horizontal or vertical, label = orientation
Dataset make_synthetic(const std::string& kind, int side, int count, Rng& rng);

} // namespace qig::data
