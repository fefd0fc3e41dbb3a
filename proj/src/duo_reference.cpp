#include <algorithm>
#include <cmath>

#include "auv/duo_loss.hpp"
#include "auv/errors.hpp"

namespace auv::duo::reference {

LossReport duo_total_loss(const PredictionBatch& batch, std::span<const double> epsilon_raw,
                          const ClassScales& scales, const DuoConfig& cfg) {
    batch.validate();
    cfg.validate();
    const auto s = batch.shape();
    if (epsilon_raw.size() != s.samples)
        throw ShapeError("one noise scalar per sample is required");
    if (scales.classes != s.classes)
        throw ClassError("semantic scales do not cover every class");

    const auto noise = standardize_noise(epsilon_raw);
    const double n = static_cast<double>(s.samples);
    const double vox = static_cast<double>(s.voxels);

    LossReport r;
    r.config = cfg;
    r.degenerate_noise = noise.degenerate;
    r.weights.resize(s.blocks());
    r.block_seg_loss.resize(s.blocks());
    r.grad_probs.assign(s.size(), 0.0);
    r.grad_noise_head.assign(s.size(), 0.0);
    r.grad_epsilon_hat.assign(s.samples, 0.0);

    std::vector<double> t(s.voxels);
    std::vector<bool> live(s.voxels);
    double total = 0.0;
    for (std::size_t i = 0; i < s.samples; ++i) {
        const double eps = noise.epsilon_hat[i];
        for (std::size_t c = 0; c < s.classes; ++c) {
            const std::size_t b = i * s.classes + c;
            const std::size_t off = b * s.voxels;
            const double w = 1.0 / (1.0 + cfg.alpha * scales.at(i, c));

            double sp = 0.0, st = 0.0, spt = 0.0, bce = 0.0;
            for (std::size_t v = 0; v < s.voxels; ++v) {
                const double corr = eps * batch.noise_head[off + v];
                const double capped = std::min(std::max(corr, -cfg.gamma), cfg.gamma);
                const double u = batch.labels[off + v] - capped;
                t[v] = std::min(std::max(u, 0.0), 1.0);
                live[v] = corr > -cfg.gamma && corr < cfg.gamma && u > 0.0 && u < 1.0;

                const double p = batch.probs[off + v];
                const double q = std::min(std::max(p, cfg.clamp), 1.0 - cfg.clamp);
                sp += p;
                st += t[v];
                spt += p * t[v];
                bce -= t[v] * std::log(q) + (1.0 - t[v]) * std::log(1.0 - q);
            }
            const double den = sp + st + cfg.smooth;
            const double dice = den > 0.0 ? 1.0 - (2.0 * spt + cfg.smooth) / den : 0.0;
            const double seg = cfg.beta * dice + (1.0 - cfg.beta) * bce / vox;

            r.weights[b] = w;
            r.block_seg_loss[b] = seg;
            total += w * seg;

            for (std::size_t v = 0; v < s.voxels; ++v) {
                const double p = batch.probs[off + v];
                const double q = std::min(std::max(p, cfg.clamp), 1.0 - cfg.clamp);
                double dp = 0.0, dt = 0.0;
                if (den > 0.0) {
                    dp += cfg.beta * (2.0 * spt + cfg.smooth - 2.0 * t[v] * den) / (den * den);
                    dt += cfg.beta * (2.0 * spt + cfg.smooth - 2.0 * p * den) / (den * den);
                }
                if (p > cfg.clamp && p < 1.0 - cfg.clamp)
                    dp += (1.0 - cfg.beta) * ((1.0 - t[v]) / (1.0 - q) - t[v] / q) / vox;
                dt += (1.0 - cfg.beta) * std::log((1.0 - q) / q) / vox;

                r.grad_probs[off + v] = w / n * dp;
                if (live[v]) {
                    r.grad_noise_head[off + v] = -w / n * dt * eps;
                    r.grad_epsilon_hat[i] += -w / n * dt * batch.noise_head[off + v];
                }
            }
        }
    }
    r.total = total / n;

    for (std::size_t c = 0; c < s.classes; ++c) {
        double w = 0.0, l = 0.0;
        for (std::size_t i = 0; i < s.samples; ++i) {
            w += r.weights[i * s.classes + c];
            l += r.block_seg_loss[i * s.classes + c];
        }
        r.per_class_weight[static_cast<int>(c)] = w / n;
        r.per_class_seg_loss[static_cast<int>(c)] = l / n;
    }
    r.grad_epsilon_raw = standardize_backward(noise, r.grad_epsilon_hat);
    return r;
}

}  // namespace auv::duo::reference
