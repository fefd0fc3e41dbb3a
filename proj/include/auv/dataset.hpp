#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "auv/scale_kernels.hpp"

namespace auv {

inline const char* const classes_sidecar = "classes.json";

/// Lists the `.npy` tensors of a dataset directory sorted by sample id. Class
/// ids come from `sidecar` when given, else from `<dir>/classes.json` when it
/// exists, else default to the channel indices. A single tensor file is
/// accepted in place of a directory. Throws InputError when nothing is found.
std::vector<DatasetEntry> scan_dataset(const std::filesystem::path& input,
                                       std::optional<std::filesystem::path> sidecar = {});

}  // namespace auv
