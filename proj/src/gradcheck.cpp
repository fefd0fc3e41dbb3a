#include "auv/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace auv::duo {

double GradCheckResult::max_rel() const noexcept {
    return std::max({max_rel_probs, max_rel_noise_head, max_rel_epsilon});
}

bool GradCheckResult::pass(double tolerance) const noexcept {
    return max_rel() < tolerance;
}

namespace {

double rel_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace

GradCheckResult check_gradients(const BatchFiles& c, const DuoConfig& config,
                                const GradCheckOptions& opt) {
    const auto report =
        duo_total_loss(c.batch, c.epsilon_raw, c.scales, config, opt.workers);
    auto grad_probs = report.grad_probs;
    if (opt.flip_sign)
        for (auto& g : grad_probs)
            g = -g;

    GradCheckResult result;
    result.degenerate_noise = report.degenerate_noise;
    auto work = c;
    auto loss_at = [&]() {
        return duo_total_loss(work.batch, work.epsilon_raw, work.scales, config, opt.workers)
            .total;
    };
    auto central = [&](double& slot) {
        const double saved = slot;
        slot = saved + opt.step;
        const double up = loss_at();
        slot = saved - opt.step;
        const double down = loss_at();
        slot = saved;
        return (up - down) / (2.0 * opt.step);
    };

    for (std::size_t k = 0; k < work.batch.probs.size(); ++k) {
        const double fd = central(work.batch.probs[k]);
        result.max_rel_probs =
            std::max(result.max_rel_probs, rel_error(grad_probs[k], fd, opt.abs_floor));
        const double fh = central(work.batch.noise_head[k]);
        result.max_rel_noise_head = std::max(
            result.max_rel_noise_head, rel_error(report.grad_noise_head[k], fh, opt.abs_floor));
        result.components += 2;
    }
    for (std::size_t i = 0; i < work.epsilon_raw.size(); ++i) {
        const double fe = central(work.epsilon_raw[i]);
        result.max_rel_epsilon = std::max(
            result.max_rel_epsilon, rel_error(report.grad_epsilon_raw[i], fe, opt.abs_floor));
        result.components += 1;
    }
    return result;
}

BatchFiles random_batch(std::uint64_t seed, std::array<std::size_t, 5> dims, double gamma,
                        double margin) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    BatchFiles out;
    out.batch.dims = dims;
    const auto shape = out.batch.shape();
    out.epsilon_raw.resize(shape.samples);
    for (auto& e : out.epsilon_raw)
        e = normal(rng);
    const auto noise = standardize_noise(out.epsilon_raw);

    out.batch.probs.resize(shape.size());
    out.batch.labels.resize(shape.size());
    out.batch.noise_head.resize(shape.size());
    const std::size_t per_sample = shape.classes * shape.voxels;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        out.batch.probs[k] = prob(rng);
        out.batch.labels[k] = unit(rng) < 0.5 ? 0.0 : 1.0;
        const double eps = noise.epsilon_hat[k / per_sample];
        double h;
        for (;;) {
            h = normal(rng) * 0.5;
            const double corr = eps * h;
            if (std::abs(corr) > margin && std::abs(std::abs(corr) - gamma) > margin)
                break;
            if (eps == 0.0)
                break;
        }
        out.batch.noise_head[k] = h;
    }

    std::vector<double> scales(shape.blocks());
    for (auto& s : scales)
        s = unit(rng);
    out.scales = ClassScales::per_sample(shape.samples, shape.classes, std::move(scales));
    return out;
}

}  // namespace auv::duo
