#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vqa/tensor.hpp"

namespace vqa {

/// Named parameter list in checkpoint order.
using NamedTensors = std::vector<std::pair<std::string, TensorPtr>>;

/// Flat binary container for parameters:
///
///   8 bytes   magic "C3DVQACP"
///   u32 LE    version (1)
///   u32 LE    entry count
///   entries:  u32 name length, name bytes,
///             u32 rank, u32 LE extents[rank],
///             f32 LE values (row-major)
///
/// save/load round-trip byte-exactly.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& params);

/// Loads values into the given tensors by name. Every name in the file must
/// match a tensor of identical shape and vice versa.
void load_checkpoint(const std::filesystem::path& path, const NamedTensors& params);

}  // namespace vqa
