#pragma once

#include "qig/discriminator.hpp"
#include "qig/generator.hpp"
#include "qig/trainer.hpp"

#include <json.hpp>

namespace qig {

using Json = nlohmann::ordered_json;

Json to_json(const gen::GeneratorConfig& c);
gen::GeneratorConfig generator_config_from_json(const Json& j);

Json to_json(const critic::CriticConfig& c);
critic::CriticConfig critic_config_from_json(const Json& j);

Json to_json(const train::TrainConfig& c);
train::TrainConfig train_config_from_json(const Json& j);

/// Rejects keys that are not consumed by the corresponding parser.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> known,
                         const std::string& where);

std::uint64_t fnv1a64(std::string_view bytes);

} // namespace qig
