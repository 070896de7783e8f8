#include "fedma/privacy.hpp"

#include <cmath>

namespace fedma {

std::pair<double, double> calibrate_gamma(double sigma, double xi, double clip_bound) {
    require(sigma > 0.0, "calibrate_gamma: sigma must be > 0");
    require(clip_bound > 0.0, "calibrate_gamma: clip bound must be > 0");
    if (xi <= sigma) throw contract_error("calibrate_gamma: xi must exceed sigma");

    const double gamma = sigma / std::sqrt(xi * xi - sigma * sigma) * clip_bound;
    const double s = std::sqrt(clip_bound * clip_bound + gamma * gamma);
    // sanity: sigma * S / gamma == xi
    if (std::abs(sigma * s / gamma - xi) > 1e-12 * xi)
        throw numerical_error("calibrate_gamma: xi identity failed");
    return {gamma, s};
}

DpConfig DpConfig::calibrated(double sigma, double xi, double clip_bound) {
    DpConfig cfg;
    cfg.clip_bound = clip_bound;
    cfg.noise_multiplier = sigma;
    cfg.one_hot_noise = xi;
    auto [gamma, s] = calibrate_gamma(sigma, xi, clip_bound);
    cfg.gamma = gamma;
    cfg.sensitivity = s;
    return cfg;
}

Vector clip(const Vector& delta, double clip_bound) {
    require(clip_bound > 0.0, "clip: bound must be > 0");
    const double norm = delta.norm();
    if (norm <= clip_bound) return delta;
    return delta * (clip_bound / norm);
}

PrivatePayload PrivatePayload::make(const Vector& delta, const VersionOneHot& version,
                                    const DpConfig& cfg) {
    PrivatePayload p;
    p.clipped_delta = clip(delta, cfg.clip_bound);
    p.version = version;
    p.gamma = cfg.gamma;
    p.certified_bound = cfg.sensitivity;
    const double norm_sq = p.clipped_delta.squaredNorm() + cfg.gamma * cfg.gamma;
    if (norm_sq > cfg.sensitivity * cfg.sensitivity * (1.0 + 1e-12))
        throw numerical_error("PrivatePayload: sensitivity certificate violated");
    return p;
}

PrivatizedRound privatize_round(const std::vector<PrivatePayload>& payloads, Eigen::Index cohort,
                                Eigen::Index t, const DpConfig& cfg, RngStream& rng) {
    require(static_cast<Eigen::Index>(payloads.size()) == cohort,
            "privatize_round: need exactly C payloads");
    require(cohort > 0 && t >= 1, "privatize_round: bad cohort or iteration");

    const Eigen::Index dim = payloads.front().clipped_delta.size();
    Vector delta_sum = Vector::Zero(dim);
    Vector onehot_sum = Vector::Zero(t);
    for (const auto& p : payloads) {
        if (p.clipped_delta.squaredNorm() + p.gamma * p.gamma >
            p.certified_bound * p.certified_bound * (1.0 + 1e-12))
            throw numerical_error("privatize_round: payload breaks its sensitivity certificate");
        require(p.version.index <= t, "privatize_round: version from the future");
        delta_sum += p.clipped_delta;
        onehot_sum(p.version.index - 1) += cfg.gamma;
    }

    const double noise_std = cfg.noise_multiplier * cfg.sensitivity;
    for (Eigen::Index i = 0; i < dim; ++i) delta_sum(i) += noise_std * rng.next_normal();
    for (Eigen::Index i = 0; i < t; ++i) onehot_sum(i) += noise_std * rng.next_normal();

    PrivatizedRound out;
    out.aggregate = delta_sum / static_cast<double>(cohort);
    out.w_row = onehot_sum / (static_cast<double>(cohort) * cfg.gamma);
    if (cfg.project_w_rows) out.w_row = out.w_row.cwiseMax(0.0);
    return out;
}

}  // namespace fedma
