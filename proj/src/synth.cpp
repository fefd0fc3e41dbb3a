#include "auv/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>
#include <omp.h>

#include "auv/errors.hpp"

namespace auv::synth {

void SynthSpec::validate() const {
    const auto min_dim = std::min(shape.depth, shape.plane());
    if (n_samples < 1)
        throw ParameterError("synthetic dataset needs at least one sample");
    if (shape.channels < 1 || shape.depth < 1 || shape.plane() < 2)
        throw ParameterError("synthetic shape needs C >= 1, D >= 1, H*W >= 2");
    if (noisy_rank < 1 || clean_rank <= noisy_rank)
        throw ParameterError("need clean_rank > noisy_rank >= 1");
    if (clean_rank > min_dim)
        throw ParameterError("rank " + std::to_string(clean_rank) + " exceeds min(D, H*W) = " +
                             std::to_string(min_dim));
    if (!(frac_noisy >= 0.0 && frac_noisy <= 1.0))
        throw ParameterError("frac_noisy must lie in [0, 1]");
    if (!(noise_sigma >= 0.0))
        throw ParameterError("noise_sigma must be >= 0");
    noisy_count();
}

std::size_t SynthSpec::noisy_count() const {
    const auto k = static_cast<std::size_t>(
        std::floor(frac_noisy * static_cast<double>(n_samples) + 1e-9));
    if (frac_noisy > 0.0 && k < 1)
        throw ParameterError("frac_noisy * n_samples must be >= 1 when frac_noisy > 0");
    return k;
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

FeatureVolume make_feature_volume(const SynthSpec& spec, bool is_noisy, std::uint64_t seed,
                                  std::string sample_id) {
    const auto& s = spec.shape;
    const auto rank = is_noisy ? spec.noisy_rank : spec.clean_rank;
    const auto min_dim = std::min(s.depth, s.plane());
    if (rank < 1 || rank > min_dim)
        throw ParameterError("rank " + std::to_string(rank) + " outside [1, " +
                             std::to_string(min_dim) + "]");
    if (!(spec.noise_sigma >= 0.0))
        throw ParameterError("noise_sigma must be >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> data(s.size(), 0.0);
    std::vector<double> u(s.depth);
    std::vector<double> v(s.plane());

    for (std::size_t c = 0; c < s.channels; ++c) {
        double* slab = data.data() + c * s.channel_size();
        for (std::size_t k = 0; k < rank; ++k) {
            for (auto& x : u)
                x = normal(rng);
            for (auto& x : v)
                x = normal(rng);
            for (std::size_t d = 0; d < s.depth; ++d)
                for (std::size_t p = 0; p < s.plane(); ++p)
                    slab[d * s.plane() + p] += u[d] * v[p];
        }
        if (spec.noise_sigma > 0.0)
            for (std::size_t k = 0; k < s.channel_size(); ++k)
                slab[k] += spec.noise_sigma * normal(rng);
    }

    std::vector<int> classes(s.channels);
    std::iota(classes.begin(), classes.end(), 0);
    return FeatureVolume(std::move(sample_id), std::move(classes), s, std::move(data));
}

std::string sample_name(std::size_t index, std::size_t total) {
    const auto width = std::max<std::size_t>(4, std::to_string(total).size());
    auto digits = std::to_string(index);
    return "sample_" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

std::vector<bool> noisy_flags(const SynthSpec& spec) {
    spec.validate();
    const auto k = spec.noisy_count();
    std::vector<std::size_t> order(spec.n_samples);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(spec.seed);
    // Fisher-Yates written out so the permutation does not depend on the
    // standard library's shuffle.
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<bool> flags(spec.n_samples, false);
    for (std::size_t i = 0; i < k; ++i)
        flags[order[i]] = true;
    return flags;
}

SynthDataset make_dataset(const SynthSpec& spec, const std::filesystem::path& dir,
                          int workers) {
    const auto flags = noisy_flags(spec);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create dataset directory " + dir.string());

    SynthDataset out;
    out.dir = dir;
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        out.sample_ids.push_back(sample_name(i, spec.n_samples));
        out.is_noisy[out.sample_ids.back()] = flags[i];
    }

    const auto n = static_cast<std::ptrdiff_t>(spec.n_samples);
    std::vector<std::exception_ptr> errors(spec.n_samples);
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto& id = out.sample_ids[i];
            const auto volume =
                make_feature_volume(spec, flags[i], sample_seed(spec.seed, i), id);
            save_feature_volume(volume, dir / (id + ".npy"));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    nlohmann::ordered_json truth = nlohmann::ordered_json::object();
    nlohmann::ordered_json classes = nlohmann::ordered_json::object();
    std::vector<int> ids(spec.shape.channels);
    std::iota(ids.begin(), ids.end(), 0);
    for (const auto& id : out.sample_ids) {
        truth[id] = out.is_noisy[id];
        classes[id] = ids;
    }
    nlohmann::ordered_json meta;
    meta["n_samples"] = spec.n_samples;
    meta["shape"] = spec.shape.dims();
    meta["clean_rank"] = spec.clean_rank;
    meta["noisy_rank"] = spec.noisy_rank;
    meta["frac_noisy"] = spec.frac_noisy;
    meta["noise_sigma"] = spec.noise_sigma;
    meta["seed"] = spec.seed;

    auto dump = [&](const char* name, const nlohmann::ordered_json& j) {
        std::ofstream f(dir / name, std::ios::trunc);
        if (!f)
            throw IoError("cannot write " + (dir / name).string());
        f << j.dump(2) << "\n";
    };
    dump("ground_truth.json", truth);
    dump("classes.json", classes);
    dump("synth_spec.json", meta);
    return out;
}

std::map<std::string, bool> read_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in).get<std::map<std::string, bool>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace auv::synth
