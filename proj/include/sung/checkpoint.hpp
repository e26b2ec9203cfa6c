#pragma once
#include <string>

#include "sung/param_tree.hpp"

namespace sung {

// Checkpoint layout (little-endian): magic "SUNGCK1\0", u64 parameter count,
// then per parameter: u32 name length, UTF-8 name, u32 rank, u64 dims,
// raw 64-bit float payload.
void save_checkpoint(const ParamTree& params, const std::string& path);

ParamTree load_checkpoint(const std::string& path);

// Overwrites values of an existing tree. The checkpoint must contain exactly
// the same names and shapes; anything else means the checkpoint was written
// for a different configuration.
void load_checkpoint_into(ParamTree& params, const std::string& path);

}  // namespace sung
