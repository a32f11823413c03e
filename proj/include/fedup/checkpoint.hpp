#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedup/model.hpp"

namespace fedup {

// Checkpoint layout (all integers and floats little-endian):
//   magic "FUPM", version u16, layer count u32, then per layer:
//   kind u8, shape rank u8, dims u32 each, weight count u64, f32 weights,
//   bias count u64, f32 biases. Round-trips bit-exactly.
std::vector<std::uint8_t> serialize_model(const ModelParams& m);
ModelParams deserialize_model(const std::uint8_t* data, std::size_t size);

void save_model(const std::string& path, const ModelParams& m);
ModelParams load_model(const std::string& path);

std::size_t checkpoint_bytes(const ModelParams& m);

}  // namespace fedup
