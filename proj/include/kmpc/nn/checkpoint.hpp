#pragma once

#include <vector>

#include "json.hpp"
#include "kmpc/nn/layers.hpp"

namespace kmpc::nn {

// [{"name": ..., "shape": [rows, cols], "data": [...]}, ...]
nlohmann::ordered_json tensors_to_json(const std::vector<NamedTensor>& tensors);

// Fills every named tensor from the JSON list. Missing names and shape
// mismatches throw ParseError.
void tensors_from_json(const nlohmann::json& j, const std::vector<NamedTensor>& tensors);

}  // namespace kmpc::nn
