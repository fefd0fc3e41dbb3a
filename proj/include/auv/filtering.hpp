#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auv/spectrum.hpp"

namespace auv {

/// (a)-(d): whether the features came from raw or mask-normalized images,
/// and whether the threshold is global or per class. Raw vs normalized is
/// provenance only; it is recorded, not acted on.
enum class Strategy { global_raw, global_normalized, per_class_raw, per_class_normalized };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);
bool is_per_class(Strategy s) noexcept;

inline const std::string global_key = "GLOBAL";

struct ManifestEntry {
    std::string sample_id;
    double auv = 0.0;
    std::map<int, double> per_class_auv;
    bool retained = true;
    std::string reason;  ///< GLOBAL, a class id, NONE, or empty when retained
};

struct FilterManifest {
    Strategy strategy = Strategy::global_raw;
    double quantile = 0.95;
    bool union_mode = false;
    std::vector<int> classes;
    std::map<std::string, double> thresholds;
    std::vector<ManifestEntry> entries;  ///< sorted by sample_id

    std::size_t retained_count() const noexcept;
};

/// Smallest observed value a with #{v <= a} / N >= p_tilde.
double quantile_threshold(std::span<const double> values, double p_tilde);

FilterManifest filter_global(const std::vector<AUVRecord>& records, double p_tilde,
                             Strategy strategy = Strategy::global_raw);

/// Each class's AUVs are normalized over the samples carrying that class and
/// thresholded at that class's own quantile. By default a sample is kept only
/// if it passes for every selected class it carries; with `union_mode` it is
/// kept if it passes for any of them. `classes` empty selects every class seen.
FilterManifest filter_per_class(const std::vector<AUVRecord>& records, double p_tilde,
                                std::vector<int> classes = {},
                                Strategy strategy = Strategy::per_class_raw,
                                bool union_mode = false,
                                double floor = default_floor);

std::vector<std::size_t> histogram_counts(std::span<const double> auvs, std::size_t bins);
/// CSV `bin_lo,bin_hi,count` over [0, 1].
void export_histogram(std::span<const double> auvs, std::size_t bins,
                      const std::filesystem::path& path);

/// Header object carries run metadata (`extra` merged in), then one line per entry.
std::string format_manifest(const FilterManifest& manifest, const std::string& extra_json = "{}");
void write_manifest(const std::filesystem::path& path, const FilterManifest& manifest,
                    const std::string& extra_json = "{}");

/// Reads the entries of a manifest file (and its header fields).
FilterManifest read_manifest(const std::filesystem::path& path);

}  // namespace auv
