#pragma once

#include <string>

#include "json.hpp"

#include "topicdial/tensor.hpp"

namespace topicdial {

// On-disk model snapshot: <base>.manifest.json lists config and tensor
// layout (name, shape, byte offset), <base>.bin holds the raw little-endian
// IEEE-754 float64 payload in manifest order.
struct Checkpoint {
  nlohmann::json meta;  // run/model configuration block
  TensorMap tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& base_path);

// Throws DataError on a malformed manifest or a payload whose size or
// offsets disagree with it.
Checkpoint load_checkpoint(const std::string& base_path);

}  // namespace topicdial
