#pragma once

#include "qig/dataset.hpp"
#include "qig/trainer.hpp"

#include <string>
#include <vector>

namespace qig::cli {

/// Full run configuration: generator + critic + train + dataset descriptor.
/// Unknown keys are rejected; every field has a default.
struct RunConfig {
    gen::GeneratorConfig generator;
    critic::CriticConfig critic;
    train::TrainConfig train;
    // dataset descriptor
    std::string dataset_path;        // IDX images, empty for synthetic
    std::string labels_path;         // optional IDX labels
    std::vector<int> class_filter;   // keep these labels only
    std::optional<int> resize_to;    // bilinear resize target
    std::string synthetic_kind;      // quadrant | bimodal | stripes
    int synthetic_count = 2048;
};

RunConfig load_run_config(const std::string& path);
data::Dataset build_dataset(const RunConfig& config);

/// CLI entry point (also used directly by tests). Returns the process exit
/// status; errors print to stderr and return non-zero.
int run(int argc, const char* const* argv);

} // namespace qig::cli
