#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "auv/tensor.hpp"

namespace auv {

inline constexpr double default_epsilon = 1e-12;
inline constexpr double default_floor = 1e-12;
/// Largest min(rows, cols) for which the automatic route takes the Gram path.
inline constexpr Eigen::Index gram_route_limit = 64;

/// Singular values sorted non-increasing, length min(rows, cols).
struct SingularSpectrum {
    std::vector<double> values;

    std::size_t rank_bound() const noexcept { return values.size(); }
};

/// p_j = sigma_j^2 / (sum sigma^2 + epsilon).
struct EnergySpectrum {
    std::vector<double> probs;
    double epsilon = default_epsilon;
};

struct AUVRecord {
    std::string sample_id;
    std::map<int, double> per_class_scale;
    double sample_scale = 0.0;
    double auv = 0.0;
};

/// Batch statistics of log(max(S, floor)) used to map scales onto [0, 1].
struct LogRange {
    double log_min = 0.0;
    double log_max = 0.0;
};

enum class SvdRoute {
    automatic,  ///< Gram eigendecomposition when min-dim <= gram_route_limit
    gram,
    bidiagonal,
};

SingularSpectrum singular_values(const RowMatrix& matrix,
                                 SvdRoute route = SvdRoute::automatic);
SingularSpectrum singular_values(const ClassFeatureMatrix& matrix,
                                 SvdRoute route = SvdRoute::automatic);

EnergySpectrum energy_distribution(const SingularSpectrum& spectrum,
                                   double epsilon = default_epsilon);

/// Shannon entropy of the energy distribution divided by log(r), with
/// 0 log 0 = 0. Zero when r == 1 or when the distribution carries no energy.
double semantic_scale(const EnergySpectrum& energy);

/// Sum of per-class scales, optionally restricted to `subset`. Classes of the
/// subset that are missing from the map are skipped; throws ParameterError if
/// nothing is left to sum.
double sample_scale(const std::map<int, double>& per_class,
                    std::span<const int> subset = {});

LogRange log_range(std::span<const double> scales, double floor = default_floor);

/// 1 - (log S - min) / (max - min), clamped to [0, 1]; 0 when max == min.
double auv_value(double scale, const LogRange& range, double floor = default_floor);

/// Normalizes every sample scale against the batch's own log range.
std::vector<double> auv_values(std::span<const double> scales,
                               double floor = default_floor);

std::vector<AUVRecord> auv_batch(
    std::span<const std::pair<std::string, double>> scales,
    double floor = default_floor);

/// Fills `auv` on each record from its `sample_scale`. Uses `frozen` when
/// given, otherwise the range of the records themselves, and returns the
/// range that was applied.
LogRange normalize_records(std::vector<AUVRecord>& records,
                           double floor = default_floor,
                           std::optional<LogRange> frozen = std::nullopt);

/// Eigenvalues of (1/(N-1)) z z^T with N = cols, descending. Computed with
/// a cyclic Jacobi sweep independent of the SVD path; meant as a test oracle.
std::vector<double> covariance_eigenvalues_oracle(const ClassFeatureMatrix& matrix);
std::vector<double> symmetric_eigenvalues_jacobi(RowMatrix a);

/// CSV of `spectrum,index,sigma,energy_fraction,cumulative_energy`.
void export_spectrum_curves(std::span<const SingularSpectrum> spectra,
                            const std::filesystem::path& path,
                            std::span<const std::string> labels = {});

}  // namespace auv
