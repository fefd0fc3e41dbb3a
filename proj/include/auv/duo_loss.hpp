#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace auv::duo {

/// (N, C, D, H, W) flattened to N samples x C classes x V voxels.
struct LossShape {
    std::size_t samples = 0;
    std::size_t classes = 0;
    std::size_t voxels = 0;

    std::size_t blocks() const noexcept { return samples * classes; }
    std::size_t size() const noexcept { return blocks() * voxels; }
    static LossShape from_dims(std::span<const std::size_t> dims);
};

/// Segmentation head probabilities, binary annotations and the output of the
/// noise-estimation head, all (N, C, D, H, W) in C order.
struct PredictionBatch {
    std::array<std::size_t, 5> dims{};
    std::vector<double> probs;
    std::vector<double> labels;
    std::vector<double> noise_head;

    LossShape shape() const noexcept;
    /// Throws ShapeError / DataError when the invariants do not hold.
    void validate() const;
};

/// Per-sample noise scalars after the zero-mean, unit-second-moment
/// reparameterization.
struct NoiseEstimate {
    std::vector<double> epsilon_hat;
    double std_dev = 0.0;     ///< population std of the raw values
    bool degenerate = false;  ///< raw values (near) constant; output is all zeros
};

struct DuoConfig {
    double alpha = 1.0;
    double beta = 0.5;
    double smooth = 1.0;
    double clamp = 1e-7;
    double gamma = 0.5;

    void validate() const;
};

/// Per-(sample, class) semantic scales S, either one per class (broadcast over
/// samples) or N x C. Treated as constants by the gradients.
struct ClassScales {
    std::size_t samples = 0;  ///< 0 when broadcast
    std::size_t classes = 0;
    std::vector<double> values;

    static ClassScales per_class(const std::map<int, double>& scales, std::size_t classes);
    static ClassScales per_sample(std::size_t samples, std::size_t classes,
                                  std::vector<double> values);
    static ClassScales uniform(std::size_t classes, double value);
    double at(std::size_t sample, std::size_t cls) const noexcept;
};

struct LossReport {
    double total = 0.0;
    DuoConfig config;
    bool degenerate_noise = false;
    std::vector<double> weights;        ///< N x C, 1 / (1 + alpha S)
    std::vector<double> block_seg_loss; ///< N x C, unweighted L_seg per block
    std::map<int, double> per_class_weight;    ///< mean over samples
    std::map<int, double> per_class_seg_loss;  ///< mean over samples
    std::vector<double> grad_probs;
    std::vector<double> grad_noise_head;
    std::vector<double> grad_epsilon_hat;      ///< w.r.t. the standardized noise
    std::vector<double> grad_epsilon_raw;      ///< w.r.t. the raw noise parameters
};

struct DuoGradients {
    std::vector<double> probs;
    std::vector<double> noise_head;
    std::vector<double> epsilon_raw;
};

double dice_loss(std::span<const double> probs, std::span<const double> targets,
                 const LossShape& shape, double smooth = 1.0);
double bce_loss(std::span<const double> probs, std::span<const double> targets,
                double clamp = 1e-7);
double seg_loss(std::span<const double> probs, std::span<const double> targets,
                const LossShape& shape, double beta = 0.5, double smooth = 1.0,
                double clamp = 1e-7);

NoiseEstimate standardize_noise(std::span<const double> raw);

/// clip(y - clip(eps_i * head, -gamma, gamma), 0, 1).
std::vector<double> denoise_labels(std::span<const double> labels, const NoiseEstimate& noise,
                                   std::span<const double> noise_head, const LossShape& shape,
                                   double gamma = 0.5);

/// (1/N) sum_i sum_c L_seg(i, c) on the given labels, summed in the same order
/// as duo_total_loss so the two agree bit for bit when every weight is 1.
double baseline_loss(std::span<const double> probs, std::span<const double> labels,
                     const LossShape& shape, const DuoConfig& config = {});

/// Forward and backward pass. The OpenMP kernels work per (sample, class)
/// block and combine block results in a fixed order, so the report does not
/// depend on the thread count. `workers <= 0` uses the OpenMP default.
LossReport duo_total_loss(const PredictionBatch& batch, std::span<const double> epsilon_raw,
                          const ClassScales& scales, const DuoConfig& config = {},
                          int workers = 0);
/// Same, starting from an already standardized estimate; grad_epsilon_raw is empty.
LossReport duo_total_loss(const PredictionBatch& batch, const NoiseEstimate& noise,
                          const ClassScales& scales, const DuoConfig& config = {},
                          int workers = 0);

DuoGradients duo_gradients(const PredictionBatch& batch, std::span<const double> epsilon_raw,
                           const ClassScales& scales, const DuoConfig& config = {},
                           int workers = 0);

/// Chains a gradient w.r.t. standardized noise back to the raw parameters.
std::vector<double> standardize_backward(const NoiseEstimate& noise,
                                         std::span<const double> grad_standardized);

std::string report_json(const LossReport& report, bool include_gradients = true);

/// Straight-line single-threaded implementation of the same objective. Used
/// as the reference the kernels are tested and benchmarked against.
namespace reference {

LossReport duo_total_loss(const PredictionBatch& batch, std::span<const double> epsilon_raw,
                          const ClassScales& scales, const DuoConfig& config = {});

}  // namespace reference

/// Batch exchange directory: probs.npy, labels.npy, noise_head.npy (N,C,D,H,W),
/// epsilon_hat_raw.npy (N,), scales.json ({"<class>": S} or N x C nested list).
struct BatchFiles {
    PredictionBatch batch;
    std::vector<double> epsilon_raw;
    ClassScales scales;
};

BatchFiles read_batch_dir(const std::filesystem::path& dir);
void write_batch_dir(const std::filesystem::path& dir, const BatchFiles& files);

}  // namespace auv::duo
