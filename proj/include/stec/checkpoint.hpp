#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stec/tensor.hpp"

namespace stec {

// Flat little-endian checkpoint: "STEC0001" magic, u64 entry count, then per
// entry u32 name length, name bytes, u32 rank, i64 dims, f64 data. See
// docs/checkpoint_format.md.
void save_parameters(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& params);

// Loads strictly: every stored entry must match a registered parameter's
// shape, and every parameter must be present.
void load_parameters(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& params);

}  // namespace stec
