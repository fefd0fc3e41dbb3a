#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "auv/spectrum.hpp"
#include "auv/tensor.hpp"

namespace auv {

struct ScaleOptions {
    double epsilon = default_epsilon;
    bool center = true;
    SvdRoute route = SvdRoute::automatic;
};

/// Semantic perception scale of one class channel.
double class_scale(const FeatureVolume& volume, int class_id,
                   const ScaleOptions& options = {});

/// Scales of every class in `volume`, or only of those in `subset` that the
/// volume carries when `subset` is non-empty.
std::map<int, double> class_scales(const FeatureVolume& volume,
                                   std::span<const int> subset = {},
                                   const ScaleOptions& options = {});

struct DatasetEntry {
    std::string sample_id;
    std::filesystem::path path;
    std::vector<int> class_ids;  ///< empty means channels 0..C-1
};

struct SampleScales {
    std::string sample_id;
    std::map<int, double> per_class;
    std::string error;  ///< non-empty when the sample failed

    bool ok() const noexcept { return error.empty(); }
};

/// Parallel kernels. Each sample is computed independently by one thread and
/// written to its own slot, so output is identical for every worker count.
/// `workers <= 0` uses the OpenMP default.
std::vector<std::map<int, double>> class_scales_batch(
    std::span<const FeatureVolume> volumes, std::span<const int> subset,
    const ScaleOptions& options, int workers = 0);

std::vector<SampleScales> compute_sample_scales(
    std::span<const DatasetEntry> entries, std::span<const int> subset,
    const ScaleOptions& options, int workers = 0);

/// Serial references for the kernels above, kept for tests and benchmarks.
namespace serial {

std::vector<std::map<int, double>> class_scales_batch(
    std::span<const FeatureVolume> volumes, std::span<const int> subset,
    const ScaleOptions& options);

std::vector<SampleScales> compute_sample_scales(
    std::span<const DatasetEntry> entries, std::span<const int> subset,
    const ScaleOptions& options);

}  // namespace serial

}  // namespace auv
