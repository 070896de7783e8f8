#pragma once

#include "fedma/linalg.hpp"
#include "fedma/rng.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fedma {

// Iteration indices are 1-based throughout the protocol layer, matching
// the convention that the first server iteration is t = 1. Matrix
// storage stays 0-based.

// One-hot encoding of a model version within horizon T. Stored sparse;
// the dense expansion is only ever needed for DP payloads.
struct VersionOneHot {
    Eigen::Index horizon = 0;
    Eigen::Index index = 0;  // in [1, horizon]

    Vector dense() const {
        Vector e = Vector::Zero(horizon);
        e(index - 1) = 1.0;
        return e;
    }
};

enum class DelayKind { HalfNormal, Uniform, Exponential, DeterministicZero };

struct DelayDistribution {
    DelayKind kind = DelayKind::HalfNormal;
    double scale = 5.0;              // sigma for half-normal, mean for exponential
    Eigen::Index uniform_cutoff = 10;  // inclusive upper bound for uniform

    static DelayDistribution half_normal(double sigma) { return {DelayKind::HalfNormal, sigma, 0}; }
    static DelayDistribution uniform(Eigen::Index cutoff) { return {DelayKind::Uniform, 1.0, cutoff}; }
    static DelayDistribution exponential(double mean) { return {DelayKind::Exponential, mean, 0}; }
    static DelayDistribution zero() { return {DelayKind::DeterministicZero, 1.0, 0}; }
};

// Integer delay in server iterations; continuous draws are floored.
Eigen::Index sample_delay(const DelayDistribution& dist, RngStream& rng);

// Keep/drop rule for the staleness bound: drop iff tau > tau_max.
inline bool staleness_keep(Eigen::Index tau, Eigen::Index tau_max) { return tau <= tau_max; }

// Staleness coefficient matrix W. Row t accumulates the down-scaled
// arrival fractions (t-s+1)^(-p) / C for each accepted update carrying
// version s. Rows fill to exactly `cohort` arrivals.
class StalenessMatrix {
public:
    StalenessMatrix() = default;
    StalenessMatrix(Eigen::Index horizon, double downscale_p)
        : w_(horizon), p_(downscale_p), received_(static_cast<size_t>(horizon), 0) {
        require(downscale_p >= 0.0, "StalenessMatrix: p must be >= 0");
    }

    Eigen::Index horizon() const { return w_.dim(); }
    double downscale_p() const { return p_; }

    // Record one accepted arrival in row t (1-based) carrying the given
    // version one-hot, for a cohort of size C.
    void record_arrival(Eigen::Index t, const VersionOneHot& one_hot, Eigen::Index cohort);

    // DP path: overwrite row t with an externally privatized row.
    void set_row(Eigen::Index t, const Vector& row);

    Eigen::Index received_in_row(Eigen::Index t) const { return received_[static_cast<size_t>(t - 1)]; }

    const LowerTriangular& matrix() const { return w_; }
    Matrix top_left(Eigen::Index t) const { return w_.top_left(t); }
    Vector row_prefix(Eigen::Index t, Eigen::Index len) const { return w_.row_prefix(t - 1, len); }
    double row_sum(Eigen::Index t) const { return w_.row_sum(t - 1); }

    // (row, col, value) triplets of the nonzero entries, 1-based indices.
    void write_csv(std::ostream& out) const;
    static StalenessMatrix read_csv(std::istream& in, Eigen::Index horizon, double downscale_p);

private:
    LowerTriangular w_;
    double p_ = 0.0;
    std::vector<Eigen::Index> received_;
};

inline double downscale_factor(Eigen::Index tau, double p) {
    return std::pow(static_cast<double>(tau + 1), -p);
}

}  // namespace fedma
