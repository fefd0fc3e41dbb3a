#include "auv/scale_kernels.hpp"

#include <algorithm>
#include <exception>

#include <omp.h>

namespace auv {

namespace {

SampleScales scales_for_entry(const DatasetEntry& entry, std::span<const int> subset,
                              const ScaleOptions& options) {
    SampleScales out;
    out.sample_id = entry.sample_id;
    try {
        const auto volume = load_feature_volume(entry.path, entry.class_ids);
        out.per_class = class_scales(volume, subset, options);
        if (out.per_class.empty())
            out.error = "none of the selected classes is present";
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

int thread_count(int workers) {
    return workers > 0 ? workers : omp_get_max_threads();
}

}  // namespace

double class_scale(const FeatureVolume& volume, int class_id, const ScaleOptions& options) {
    const auto matrix = class_matrix(volume, class_id, options.center);
    return semantic_scale(
        energy_distribution(singular_values(matrix, options.route), options.epsilon));
}

std::map<int, double> class_scales(const FeatureVolume& volume, std::span<const int> subset,
                                   const ScaleOptions& options) {
    std::map<int, double> out;
    for (int c : volume.class_ids()) {
        if (!subset.empty() && std::find(subset.begin(), subset.end(), c) == subset.end())
            continue;
        out[c] = class_scale(volume, c, options);
    }
    return out;
}

std::vector<std::map<int, double>> class_scales_batch(std::span<const FeatureVolume> volumes,
                                                      std::span<const int> subset,
                                                      const ScaleOptions& options,
                                                      int workers) {
    const auto n = static_cast<std::ptrdiff_t>(volumes.size());
    std::vector<std::map<int, double>> out(volumes.size());
    std::vector<std::exception_ptr> errors(volumes.size());

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(workers))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = class_scales(volumes[i], subset, options);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }

    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

std::vector<SampleScales> compute_sample_scales(std::span<const DatasetEntry> entries,
                                                std::span<const int> subset,
                                                const ScaleOptions& options, int workers) {
    const auto n = static_cast<std::ptrdiff_t>(entries.size());
    std::vector<SampleScales> out(entries.size());

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(workers))
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[i] = scales_for_entry(entries[i], subset, options);

    return out;
}

namespace serial {

std::vector<std::map<int, double>> class_scales_batch(std::span<const FeatureVolume> volumes,
                                                      std::span<const int> subset,
                                                      const ScaleOptions& options) {
    std::vector<std::map<int, double>> out;
    out.reserve(volumes.size());
    for (const auto& v : volumes)
        out.push_back(class_scales(v, subset, options));
    return out;
}

std::vector<SampleScales> compute_sample_scales(std::span<const DatasetEntry> entries,
                                                std::span<const int> subset,
                                                const ScaleOptions& options) {
    std::vector<SampleScales> out;
    out.reserve(entries.size());
    for (const auto& e : entries)
        out.push_back(scales_for_entry(e, subset, options));
    return out;
}

}  // namespace serial

}  // namespace auv
