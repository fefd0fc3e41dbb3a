#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "auv/filtering.hpp"
#include "auv/gradcheck.hpp"
#include "auv/records.hpp"
#include "auv/scale_kernels.hpp"
#include "auv/synth.hpp"

namespace auv::cli {

struct RunConfig {
    std::filesystem::path input;
    std::filesystem::path output;
    std::optional<std::filesystem::path> classes_file;
    std::vector<int> classes;
    double epsilon = default_epsilon;
    double floor = default_floor;
    bool center = true;
    double quantile = 0.95;
    Strategy strategy = Strategy::global_raw;
    bool union_mode = false;
    double alpha = 1.0;
    double beta = 0.5;
    int workers = 1;
    std::uint64_t seed = 7;
    std::optional<std::filesystem::path> stats_in;
    std::optional<std::filesystem::path> stats_out;
    std::size_t bins = 20;

    void validate() const;
};

struct ComputeResult {
    RecordsFile file;
    std::vector<std::string> failures;  ///< "sample_id: message"
};

/// Scales every sample of `config.input`, skipping the ones that fail, and
/// normalizes them into AUVs (against `stats_in` when set).
ComputeResult compute_auv(const RunConfig& config);

FilterManifest filter_records(const RunConfig& config, const RecordsFile& file);

struct DemoOptions {
    synth::SynthSpec spec;
    int workers = 1;
    std::optional<std::filesystem::path> work_dir;  ///< temp dir when unset
    double min_recall = 0.9;
    double min_precision = 0.8;
};

struct DemoReport {
    std::size_t samples = 0;
    std::size_t injected = 0;
    std::size_t dropped = 0;
    std::size_t true_positives = 0;
    double quantile = 1.0;
    double threshold = 0.0;
    double precision = 1.0;
    double recall = 1.0;
    bool vacuous = false;  ///< no injected noisy samples

    bool pass(double min_recall, double min_precision) const noexcept;
};

DemoReport run_demo(const DemoOptions& options);

struct CheckGradOptions {
    std::uint64_t seed = 7;
    std::size_t batches = 10;
    std::array<std::size_t, 5> dims{2, 2, 4, 4, 4};
    duo::DuoConfig config;
    duo::GradCheckOptions check;
    std::optional<std::filesystem::path> batch_dir;
    std::optional<std::filesystem::path> report_out;
};

struct CheckGradReport {
    std::vector<duo::GradCheckResult> results;
    double max_rel = 0.0;
    bool pass = false;
};

CheckGradReport run_check_grad(const CheckGradOptions& options);

/// Subcommand entry points: write outputs, print a summary to `out`,
/// diagnostics to `err`, and return the process exit code.
int cmd_compute_auv(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_filter(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_curves(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_histogram(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_check_grad(const CheckGradOptions& options, std::ostream& out, std::ostream& err);
int cmd_demo(const DemoOptions& options, std::ostream& out, std::ostream& err);
int cmd_synth(const synth::SynthSpec& spec, const std::filesystem::path& dir, int workers,
              std::ostream& out, std::ostream& err);

/// Runs `argv` through the command-line parser and dispatches.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace auv::cli
