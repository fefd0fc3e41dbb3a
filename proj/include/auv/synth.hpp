#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "auv/tensor.hpp"

namespace auv::synth {

/// Low-rank Gaussian factor model: each class channel is a sum of `rank`
/// outer products of unit-variance Gaussian vectors plus isotropic noise.
/// Noisy samples get `noisy_rank`, clean ones `clean_rank`.
struct SynthSpec {
    std::size_t n_samples = 200;
    VolumeShape shape{2, 16, 32, 32};
    std::size_t clean_rank = 16;
    std::size_t noisy_rank = 2;
    double frac_noisy = 0.05;
    double noise_sigma = 0.05;
    std::uint64_t seed = 7;

    void validate() const;
    std::size_t noisy_count() const;
};

FeatureVolume make_feature_volume(const SynthSpec& spec, bool is_noisy, std::uint64_t seed,
                                  std::string sample_id = "synth");

/// Per-sample seed derived from (dataset seed, index), independent of any
/// other sample so generation order never changes the output.
std::uint64_t sample_seed(std::uint64_t seed, std::size_t index);

struct SynthDataset {
    std::filesystem::path dir;
    std::vector<std::string> sample_ids;
    std::map<std::string, bool> is_noisy;
};

std::string sample_name(std::size_t index, std::size_t total);

/// Which samples are noisy, by index, before anything is written.
std::vector<bool> noisy_flags(const SynthSpec& spec);

/// Writes one float32 tensor per sample plus `ground_truth.json`
/// ({sample_id: is_noisy}), `classes.json` and `synth_spec.json` into `dir`.
/// Samples are generated in parallel; `workers <= 0` uses the OpenMP default.
SynthDataset make_dataset(const SynthSpec& spec, const std::filesystem::path& dir,
                          int workers = 0);

std::map<std::string, bool> read_ground_truth(const std::filesystem::path& path);

}  // namespace auv::synth
