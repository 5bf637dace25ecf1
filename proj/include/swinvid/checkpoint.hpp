#pragma once

#include <string>
#include <utility>
#include <vector>

#include "swinvid/array.hpp"

// Flat binary tensor container: the magic bytes "SWV1", then for each named
// tensor: name length (u32 LE), name bytes, rank (u32 LE), one u32 LE per
// dim, then the values as 64-bit little-endian floats. No padding anywhere,
// so files are byte-identical across runs that produce the same values.

namespace swinvid {

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Array>>& entries);

// read every (name, tensor) pair in file order
std::vector<std::pair<std::string, Array>> read_checkpoint(const std::string& path);

// copy stored values into the matching named parameters; the file must carry
// exactly the given parameter set, each with the exact shape, or a
// validation_error naming the offending parameter is thrown
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Array>>& params);

}  // namespace swinvid
