#ifndef SPGNN_CHECKPOINT_HPP
#define SPGNN_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spgnn/tensor.hpp"

namespace spgnn {

// Binary tensor container: magic "SPGN", u32 version=1, u32 count, then per
// tensor a u16 name length, the UTF-8 name, u8 ndim, u32 dims[], and the
// little-endian float payload. Round-trips bit-exactly.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const NamedTensors& tensors, const std::string& path);
NamedTensors load_checkpoint(const std::string& path);

const Tensor& find_tensor(const NamedTensors& ts, const std::string& name);
bool has_tensor(const NamedTensors& ts, const std::string& name);

// Bit-pattern bridges for stashing integers in float slots (used by the
// "__meta__" tensor that carries seed/epoch/config ids).
float bits_to_float(uint32_t bits);
uint32_t float_to_bits(float v);

}  // namespace spgnn

#endif
