#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "auv/duo_loss.hpp"

namespace auv::duo {

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Denominator floor for the relative error |a - f| / max(|a|, |f|, floor).
    double abs_floor = 1e-6;
    /// Negative control: flips the sign of the analytic probability gradient.
    bool flip_sign = false;
    int workers = 1;
};

struct GradCheckResult {
    double max_rel_probs = 0.0;
    double max_rel_noise_head = 0.0;
    double max_rel_epsilon = 0.0;
    std::size_t components = 0;
    bool degenerate_noise = false;

    double max_rel() const noexcept;
    bool pass(double tolerance) const noexcept;
};

/// Central differences of duo_total_loss against its analytic gradients for
/// every probability, noise-head entry and raw noise parameter.
GradCheckResult check_gradients(const BatchFiles& case_, const DuoConfig& config,
                                const GradCheckOptions& options = {});

/// Random batch for gradient checks. Probabilities stay inside [0.05, 0.95] and
/// noise-head values keep eps_i * head at least `margin` away from the clip
/// kinks (0 and +-gamma), where the loss is not differentiable.
BatchFiles random_batch(std::uint64_t seed, std::array<std::size_t, 5> dims,
                        double gamma = 0.5, double margin = 1e-3);

}  // namespace auv::duo
