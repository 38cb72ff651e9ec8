#pragma once

#include <string>

#include "json.hpp"
#include "twoloc/model.hpp"

namespace twoloc {

using Json = nlohmann::json;

ModelParams params_from_json(const Json& j);
Json params_to_json(const ModelParams& p);

SampleConfig config_from_json(const Json& j);
Json config_to_json(const SampleConfig& cfg);

Json read_json_file(const std::string& path);

/// 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace twoloc
