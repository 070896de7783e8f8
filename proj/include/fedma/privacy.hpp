#pragma once

#include "fedma/rng.hpp"
#include "fedma/staleness.hpp"

#include <vector>

namespace fedma {

// Client-level DP configuration. gamma and the total sensitivity S are
// derived so that the effective noise std on the un-scaled one-hot sum
// equals xi: gamma = sigma / sqrt(xi^2 - sigma^2) * S_delta,
// S = sqrt(S_delta^2 + gamma^2), and sigma * S / gamma == xi.
struct DpConfig {
    double clip_bound = 0.1;       // S_delta
    double noise_multiplier = 1.0;  // sigma
    double one_hot_noise = 2.0;     // xi, must be > sigma
    double gamma = 0.0;             // derived
    double sensitivity = 0.0;       // derived S
    bool project_w_rows = false;    // ablation only: clamp noised rows to >= 0

    static DpConfig calibrated(double sigma, double xi, double clip_bound);
};

// clip(delta, S) = delta * min(1, S / ||delta||_2)
Vector clip(const Vector& delta, double clip_bound);

// (gamma, S) for given (sigma, xi, S_delta); throws if xi <= sigma.
std::pair<double, double> calibrate_gamma(double sigma, double xi, double clip_bound);

// Clipped payload with a hard L2 certificate over the concatenation
// [clip(delta), gamma * e_version].
struct PrivatePayload {
    Vector clipped_delta;
    VersionOneHot version;
    double gamma = 0.0;
    double certified_bound = 0.0;

    static PrivatePayload make(const Vector& delta, const VersionOneHot& version,
                               const DpConfig& cfg);
};

struct PrivatizedRound {
    Vector aggregate;  // r_t
    Vector w_row;      // noised row of W, length t, may contain negatives
};

// Gaussian-mechanism aggregation of exactly C payloads:
//   r_t   = (1/C)       [sum clip(Delta_k)   + N(0, sigma^2 S^2 I_d)]
//   W row = (1/(C*gamma))[sum gamma e_k      + N(0, sigma^2 S^2 I_t)]
// Noise is added to the sums before the scaling. The W row beyond
// column t is discarded (future versions cannot occur).
PrivatizedRound privatize_round(const std::vector<PrivatePayload>& payloads, Eigen::Index cohort,
                                Eigen::Index t, const DpConfig& cfg, RngStream& rng);

}  // namespace fedma
