#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "slim/model.hpp"
#include "slim/numerics.hpp"

namespace slim {

// Binary tensor container:
//
//   magic        8 bytes  "SLIMWT1\0"
//   count        u32
//   per tensor:  u32 name_len, name bytes, u32 rows, u32 cols,
//                rows*cols f32 row-major
//
// All integers and floats are little-endian. Tensors are written in name order
// so identical contents produce identical bytes.
inline constexpr char kCheckpointMagic[8] = {'S', 'L', 'I', 'M', 'W', 'T', '1', '\0'};

using TensorMap = std::map<std::string, Matrix>;

void write_tensors(std::ostream& out, const TensorMap& tensors);
TensorMap read_tensors(std::istream& in);

void save_tensors(const std::filesystem::path& path, const TensorMap& tensors);
TensorMap load_tensors(const std::filesystem::path& path);

// Naming: "config", "layer.<l>.w_q", "layer.<l>.router",
// "layer.<l>.expert.<e>.w_g", ...
TensorMap model_to_tensors(const model::ModelConfig& cfg,
                           const std::vector<model::LayerWeights>& layers);

struct LoadedModel {
    model::ModelConfig config;
    std::vector<model::LayerWeights> layers;
};

LoadedModel model_from_tensors(const TensorMap& tensors);

}  // namespace slim
