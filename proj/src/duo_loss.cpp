#include "auv/duo_loss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>
#include <omp.h>

#include "auv/errors.hpp"
#include "auv/npy.hpp"
#include "auv/version.hpp"

namespace auv::duo {

LossShape LossShape::from_dims(std::span<const std::size_t> dims) {
    if (dims.size() != 5)
        throw ShapeError("loss tensors must be (N, C, D, H, W)");
    return {dims[0], dims[1], dims[2] * dims[3] * dims[4]};
}

LossShape PredictionBatch::shape() const noexcept {
    return {dims[0], dims[1], dims[2] * dims[3] * dims[4]};
}

void PredictionBatch::validate() const {
    const auto s = shape();
    if (s.samples < 1 || s.classes < 1 || s.voxels < 1)
        throw ShapeError("prediction batch has an empty dimension");
    if (probs.size() != s.size() || labels.size() != s.size() || noise_head.size() != s.size())
        throw ShapeError("probs, labels and noise_head must all be (N, C, D, H, W)");
    for (double p : probs)
        if (!(p >= 0.0 && p <= 1.0))
            throw DataError("probabilities must lie in [0, 1]");
    for (double y : labels)
        if (y != 0.0 && y != 1.0)
            throw DataError("labels must be binary");
    for (double h : noise_head)
        if (!std::isfinite(h))
            throw DataError("noise head output must be finite");
}

void DuoConfig::validate() const {
    if (!(alpha >= 0.0))
        throw ParameterError("alpha must be >= 0");
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ParameterError("beta must lie in [0, 1]");
    if (!(smooth >= 0.0))
        throw ParameterError("smooth must be >= 0");
    if (!(clamp > 0.0 && clamp < 0.5))
        throw ParameterError("clamp must lie in (0, 0.5)");
    if (!(gamma >= 0.0))
        throw ParameterError("gamma must be >= 0");
}

ClassScales ClassScales::per_class(const std::map<int, double>& scales, std::size_t classes) {
    ClassScales out;
    out.classes = classes;
    out.values.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        auto it = scales.find(static_cast<int>(c));
        if (it == scales.end())
            throw ClassError("no semantic scale for class " + std::to_string(c));
        out.values[c] = it->second;
    }
    return out;
}

ClassScales ClassScales::per_sample(std::size_t samples, std::size_t classes,
                                    std::vector<double> values) {
    if (values.size() != samples * classes)
        throw ShapeError("per-sample scales must be N x C");
    return {samples, classes, std::move(values)};
}

ClassScales ClassScales::uniform(std::size_t classes, double value) {
    return {0, classes, std::vector<double>(classes, value)};
}

double ClassScales::at(std::size_t sample, std::size_t cls) const noexcept {
    return samples == 0 ? values[cls] : values[sample * classes + cls];
}

namespace {

int thread_count(int workers) {
    return workers > 0 ? workers : omp_get_max_threads();
}

struct BlockForward {
    double dice = 0.0;
    double bce_sum = 0.0;
    double pred_sum = 0.0;
    double target_sum = 0.0;
    double overlap = 0.0;
};

double clip_prob(double p, double clamp) {
    return std::clamp(p, clamp, 1.0 - clamp);
}

double bce_term(double p, double t, double clamp) {
    const double q = clip_prob(p, clamp);
    return -(t * std::log(q) + (1.0 - t) * std::log(1.0 - q));
}

BlockForward block_forward(const double* p, const double* t, std::size_t voxels,
                           double smooth, double clamp) {
    BlockForward f;
    for (std::size_t v = 0; v < voxels; ++v) {
        f.pred_sum += p[v];
        f.target_sum += t[v];
        f.overlap += p[v] * t[v];
        f.bce_sum += bce_term(p[v], t[v], clamp);
    }
    const double den = f.pred_sum + f.target_sum + smooth;
    f.dice = den > 0.0 ? 1.0 - (2.0 * f.overlap + smooth) / den : 0.0;
    return f;
}

double block_seg(const BlockForward& f, std::size_t voxels, double beta) {
    return beta * f.dice + (1.0 - beta) * (f.bce_sum / static_cast<double>(voxels));
}

void check_pair(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeError("prediction and target shapes differ");
    if (a.empty())
        throw ShapeError("empty loss input");
}

std::vector<BlockForward> forward_blocks(std::span<const double> probs,
                                         std::span<const double> targets,
                                         const LossShape& shape, double smooth, double clamp,
                                         int workers) {
    std::vector<BlockForward> out(shape.blocks());
    const auto nb = static_cast<std::ptrdiff_t>(shape.blocks());
#pragma omp parallel for schedule(static) num_threads(thread_count(workers))
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
        const auto off = static_cast<std::size_t>(b) * shape.voxels;
        out[b] = block_forward(probs.data() + off, targets.data() + off, shape.voxels,
                               smooth, clamp);
    }
    return out;
}

std::vector<double> compute_weights(const ClassScales& scales, const LossShape& shape,
                                    double alpha) {
    if (scales.classes != shape.classes)
        throw ClassError("semantic scales given for " + std::to_string(scales.classes) +
                         " classes, batch has " + std::to_string(shape.classes));
    if (scales.samples != 0 && scales.samples != shape.samples)
        throw ShapeError("per-sample scales do not match the batch size");
    std::vector<double> w(shape.blocks());
    for (std::size_t i = 0; i < shape.samples; ++i)
        for (std::size_t c = 0; c < shape.classes; ++c) {
            const double s = scales.at(i, c);
            if (!std::isfinite(s) || s < 0.0)
                throw DataError("semantic scales must be finite and non-negative");
            w[i * shape.classes + c] = 1.0 / (1.0 + alpha * s);
        }
    return w;
}

LossReport run(const PredictionBatch& batch, const NoiseEstimate& noise,
               const ClassScales& scales, const DuoConfig& config, int workers) {
    batch.validate();
    config.validate();
    const auto shape = batch.shape();
    if (noise.epsilon_hat.size() != shape.samples)
        throw ShapeError("one noise scalar per sample is required");

    LossReport report;
    report.config = config;
    report.degenerate_noise = noise.degenerate;
    report.weights = compute_weights(scales, shape, config.alpha);

    const auto targets =
        denoise_labels(batch.labels, noise, batch.noise_head, shape, config.gamma);
    const auto blocks =
        forward_blocks(batch.probs, targets, shape, config.smooth, config.clamp, workers);

    report.block_seg_loss.resize(shape.blocks());
    double acc = 0.0;
    for (std::size_t b = 0; b < shape.blocks(); ++b) {
        report.block_seg_loss[b] = block_seg(blocks[b], shape.voxels, config.beta);
        acc += report.weights[b] * report.block_seg_loss[b];
    }
    const double inv_n = 1.0 / static_cast<double>(shape.samples);
    report.total = acc / static_cast<double>(shape.samples);

    for (std::size_t c = 0; c < shape.classes; ++c) {
        double w = 0.0;
        double l = 0.0;
        for (std::size_t i = 0; i < shape.samples; ++i) {
            w += report.weights[i * shape.classes + c];
            l += report.block_seg_loss[i * shape.classes + c];
        }
        report.per_class_weight[static_cast<int>(c)] = w * inv_n;
        report.per_class_seg_loss[static_cast<int>(c)] = l * inv_n;
    }

    report.grad_probs.assign(shape.size(), 0.0);
    report.grad_noise_head.assign(shape.size(), 0.0);
    std::vector<double> block_eps(shape.blocks(), 0.0);
    const double inv_v = 1.0 / static_cast<double>(shape.voxels);
    const double beta = config.beta;
    const double clamp = config.clamp;
    const double gamma = config.gamma;
    const auto nb = static_cast<std::ptrdiff_t>(shape.blocks());

#pragma omp parallel for schedule(static) num_threads(thread_count(workers))
    for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        const std::size_t i = b / shape.classes;
        const std::size_t off = b * shape.voxels;
        const auto& f = blocks[b];
        const double g = report.weights[b] * inv_n;
        const double den = f.pred_sum + f.target_sum + config.smooth;
        const double num = 2.0 * f.overlap + config.smooth;
        const bool dice_live = den > 0.0;
        const double inv_den2 = dice_live ? 1.0 / (den * den) : 0.0;
        const double eps = noise.epsilon_hat[i];
        double eps_acc = 0.0;

        for (std::size_t v = 0; v < shape.voxels; ++v) {
            const double p = batch.probs[off + v];
            const double t = targets[off + v];
            const double q = clip_prob(p, clamp);

            double d_p = 0.0;
            double d_t = 0.0;
            if (dice_live) {
                d_p += beta * -(2.0 * t * den - num) * inv_den2;
                d_t += beta * -(2.0 * p * den - num) * inv_den2;
            }
            if (p > clamp && p < 1.0 - clamp)
                d_p += (1.0 - beta) * inv_v * (-t / q + (1.0 - t) / (1.0 - q));
            d_t += (1.0 - beta) * inv_v * (std::log(1.0 - q) - std::log(q));

            report.grad_probs[off + v] = g * d_p;

            // t = clip(y - clip(eps * h, -gamma, gamma), 0, 1)
            const double h = batch.noise_head[off + v];
            const double corr = eps * h;
            const double u = batch.labels[off + v] - std::clamp(corr, -gamma, gamma);
            if (corr > -gamma && corr < gamma && u > 0.0 && u < 1.0) {
                const double d_corr = -g * d_t;
                report.grad_noise_head[off + v] = d_corr * eps;
                eps_acc += d_corr * h;
            }
        }
        block_eps[b] = eps_acc;
    }

    report.grad_epsilon_hat.assign(shape.samples, 0.0);
    for (std::size_t i = 0; i < shape.samples; ++i)
        for (std::size_t c = 0; c < shape.classes; ++c)
            report.grad_epsilon_hat[i] += block_eps[i * shape.classes + c];
    return report;
}

}  // namespace

double dice_loss(std::span<const double> probs, std::span<const double> targets,
                 const LossShape& shape, double smooth) {
    check_pair(probs, targets);
    if (probs.size() != shape.size())
        throw ShapeError("loss inputs do not match the declared shape");
    if (!(smooth >= 0.0))
        throw ParameterError("smooth must be >= 0");
    const auto blocks = forward_blocks(probs, targets, shape, smooth, 0.25, 1);
    double acc = 0.0;
    for (const auto& f : blocks)
        acc += f.dice;
    return acc / static_cast<double>(blocks.size());
}

double bce_loss(std::span<const double> probs, std::span<const double> targets,
                double clamp) {
    check_pair(probs, targets);
    if (!(clamp > 0.0 && clamp < 0.5))
        throw ParameterError("clamp must lie in (0, 0.5)");
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k)
        acc += bce_term(probs[k], targets[k], clamp);
    return acc / static_cast<double>(probs.size());
}

double seg_loss(std::span<const double> probs, std::span<const double> targets,
                const LossShape& shape, double beta, double smooth, double clamp) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ParameterError("beta must lie in [0, 1]");
    const double dice = dice_loss(probs, targets, shape, smooth);
    const double bce = bce_loss(probs, targets, clamp);
    if (beta == 1.0)
        return dice;
    if (beta == 0.0)
        return bce;
    return beta * dice + (1.0 - beta) * bce;
}

NoiseEstimate standardize_noise(std::span<const double> raw) {
    NoiseEstimate out;
    out.epsilon_hat.assign(raw.size(), 0.0);
    if (raw.empty()) {
        out.degenerate = true;
        return out;
    }
    const double n = static_cast<double>(raw.size());
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / n;
    double var = 0.0;
    for (double r : raw)
        var += (r - mean) * (r - mean);
    var /= n;
    if (!(var >= 1e-24)) {
        out.degenerate = true;
        return out;
    }
    out.std_dev = std::sqrt(var);
    for (std::size_t i = 0; i < raw.size(); ++i)
        out.epsilon_hat[i] = (raw[i] - mean) / out.std_dev;
    return out;
}

std::vector<double> standardize_backward(const NoiseEstimate& noise,
                                         std::span<const double> grad) {
    const auto n = noise.epsilon_hat.size();
    if (grad.size() != n)
        throw ShapeError("gradient length does not match the noise vector");
    std::vector<double> out(n, 0.0);
    if (noise.degenerate || n == 0)
        return out;
    double mean_g = 0.0;
    double mean_ge = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mean_g += grad[k];
        mean_ge += grad[k] * noise.epsilon_hat[k];
    }
    mean_g /= static_cast<double>(n);
    mean_ge /= static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k)
        out[k] = (grad[k] - mean_g - noise.epsilon_hat[k] * mean_ge) / noise.std_dev;
    return out;
}

std::vector<double> denoise_labels(std::span<const double> labels, const NoiseEstimate& noise,
                                   std::span<const double> noise_head, const LossShape& shape,
                                   double gamma) {
    if (labels.size() != shape.size() || noise_head.size() != shape.size())
        throw ShapeError("labels and noise head must match the batch shape");
    if (noise.epsilon_hat.size() != shape.samples)
        throw ShapeError("one noise scalar per sample is required");
    if (!(gamma >= 0.0))
        throw ParameterError("gamma must be >= 0");
    std::vector<double> out(shape.size());
    const std::size_t per_sample = shape.classes * shape.voxels;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double corr = std::clamp(noise.epsilon_hat[k / per_sample] * noise_head[k],
                                       -gamma, gamma);
        out[k] = std::clamp(labels[k] - corr, 0.0, 1.0);
    }
    return out;
}

double baseline_loss(std::span<const double> probs, std::span<const double> labels,
                     const LossShape& shape, const DuoConfig& config) {
    check_pair(probs, labels);
    if (probs.size() != shape.size())
        throw ShapeError("loss inputs do not match the declared shape");
    config.validate();
    const auto blocks = forward_blocks(probs, labels, shape, config.smooth, config.clamp, 1);
    double acc = 0.0;
    for (const auto& f : blocks)
        acc += block_seg(f, shape.voxels, config.beta);
    return acc / static_cast<double>(shape.samples);
}

LossReport duo_total_loss(const PredictionBatch& batch, const NoiseEstimate& noise,
                          const ClassScales& scales, const DuoConfig& config, int workers) {
    return run(batch, noise, scales, config, workers);
}

LossReport duo_total_loss(const PredictionBatch& batch, std::span<const double> epsilon_raw,
                          const ClassScales& scales, const DuoConfig& config, int workers) {
    const auto noise = standardize_noise(epsilon_raw);
    auto report = run(batch, noise, scales, config, workers);
    report.grad_epsilon_raw = standardize_backward(noise, report.grad_epsilon_hat);
    return report;
}

DuoGradients duo_gradients(const PredictionBatch& batch, std::span<const double> epsilon_raw,
                           const ClassScales& scales, const DuoConfig& config, int workers) {
    auto report = duo_total_loss(batch, epsilon_raw, scales, config, workers);
    return {std::move(report.grad_probs), std::move(report.grad_noise_head),
            std::move(report.grad_epsilon_raw)};
}

std::string report_json(const LossReport& r, bool include_gradients) {
    using json = nlohmann::ordered_json;
    json j;
    j["schema"] = loss_report_schema;
    j["tool_version"] = tool_version;
    j["total"] = r.total;
    j["alpha"] = r.config.alpha;
    j["beta"] = r.config.beta;
    j["smooth"] = r.config.smooth;
    j["clamp"] = r.config.clamp;
    j["gamma"] = r.config.gamma;
    j["degenerate_noise"] = r.degenerate_noise;
    json w = json::object();
    for (const auto& [c, v] : r.per_class_weight)
        w[std::to_string(c)] = v;
    j["per_class_weight"] = w;
    json l = json::object();
    for (const auto& [c, v] : r.per_class_seg_loss)
        l[std::to_string(c)] = v;
    j["per_class_seg_loss"] = l;
    if (include_gradients) {
        j["grad_probs"] = r.grad_probs;
        j["grad_noise_head"] = r.grad_noise_head;
        j["grad_epsilon_hat"] = r.grad_epsilon_hat;
        j["grad_epsilon_raw"] = r.grad_epsilon_raw;
    }
    return j.dump();
}

BatchFiles read_batch_dir(const std::filesystem::path& dir) {
    BatchFiles files;
    auto probs = npy::read(dir / "probs.npy");
    auto labels = npy::read(dir / "labels.npy");
    auto head = npy::read(dir / "noise_head.npy");
    auto eps = npy::read(dir / "epsilon_hat_raw.npy");
    if (probs.shape.size() != 5)
        throw ShapeError("probs.npy must be (N, C, D, H, W)");
    if (labels.shape != probs.shape || head.shape != probs.shape)
        throw ShapeError("labels.npy and noise_head.npy must match probs.npy");
    if (eps.shape.size() != 1 || eps.shape[0] != probs.shape[0])
        throw ShapeError("epsilon_hat_raw.npy must be (N,)");
    std::copy(probs.shape.begin(), probs.shape.end(), files.batch.dims.begin());
    files.batch.probs = std::move(probs.data);
    files.batch.labels = std::move(labels.data);
    files.batch.noise_head = std::move(head.data);
    files.epsilon_raw = std::move(eps.data);

    const auto n = files.batch.dims[0];
    const auto c = files.batch.dims[1];
    std::ifstream in(dir / "scales.json");
    if (!in)
        throw IoError("cannot open " + (dir / "scales.json").string());
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.is_object()) {
            std::map<int, double> m;
            for (const auto& [k, v] : j.items())
                m[std::stoi(k)] = v.get<double>();
            files.scales = ClassScales::per_class(m, c);
        } else {
            std::vector<double> flat;
            for (const auto& row : j)
                for (const auto& v : row)
                    flat.push_back(v.get<double>());
            files.scales = ClassScales::per_sample(n, c, std::move(flat));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("scales.json: " + std::string(e.what()));
    } catch (const std::invalid_argument&) {
        throw FormatError("scales.json: class keys must be integers");
    }
    return files;
}

void write_batch_dir(const std::filesystem::path& dir, const BatchFiles& files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create " + dir.string());
    const auto& b = files.batch;
    npy::write(dir / "probs.npy", b.dims, b.probs, npy::Dtype::float64);
    npy::write(dir / "labels.npy", b.dims, b.labels, npy::Dtype::float64);
    npy::write(dir / "noise_head.npy", b.dims, b.noise_head, npy::Dtype::float64);
    const std::array<std::size_t, 1> n{files.epsilon_raw.size()};
    npy::write(dir / "epsilon_hat_raw.npy", n, files.epsilon_raw, npy::Dtype::float64);

    nlohmann::ordered_json j;
    if (files.scales.samples == 0) {
        j = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < files.scales.classes; ++c)
            j[std::to_string(c)] = files.scales.values[c];
    } else {
        j = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < files.scales.samples; ++i) {
            auto row = nlohmann::ordered_json::array();
            for (std::size_t c = 0; c < files.scales.classes; ++c)
                row.push_back(files.scales.at(i, c));
            j.push_back(row);
        }
    }
    std::ofstream out(dir / "scales.json", std::ios::trunc);
    if (!out)
        throw IoError("cannot write scales.json");
    out << j.dump(2) << "\n";
}

}  // namespace auv::duo
