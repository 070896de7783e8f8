#include "fedma/staleness.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace fedma {

Eigen::Index sample_delay(const DelayDistribution& dist, RngStream& rng) {
    switch (dist.kind) {
        case DelayKind::DeterministicZero:
            return 0;
        case DelayKind::HalfNormal:
            return static_cast<Eigen::Index>(std::floor(std::abs(rng.next_normal()) * dist.scale));
        case DelayKind::Uniform:
            return static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(dist.uniform_cutoff) + 1));
        case DelayKind::Exponential:
            return static_cast<Eigen::Index>(std::floor(rng.next_exponential() * dist.scale));
    }
    throw contract_error("sample_delay: unknown distribution kind");
}

void StalenessMatrix::record_arrival(Eigen::Index t, const VersionOneHot& one_hot, Eigen::Index cohort) {
    require(t >= 1 && t <= horizon(), "record_arrival: row out of range");
    if (one_hot.index > t)
        throw protocol_error("record_arrival: version " + std::to_string(one_hot.index) +
                             " is from the future of row " + std::to_string(t));
    if (received_[static_cast<size_t>(t - 1)] >= cohort)
        throw protocol_error("record_arrival: row " + std::to_string(t) + " already holds a full cohort");

    const Eigen::Index tau = t - one_hot.index;
    w_.add(t - 1, one_hot.index - 1, downscale_factor(tau, p_) / static_cast<double>(cohort));
    received_[static_cast<size_t>(t - 1)] += 1;
}

void StalenessMatrix::set_row(Eigen::Index t, const Vector& row) {
    require(t >= 1 && t <= horizon(), "set_row: row out of range");
    require(row.size() == t, "set_row: row length must equal t");
    w_.dense_mutable().row(t - 1).setZero();
    w_.dense_mutable().row(t - 1).head(t) = row.transpose();
    received_[static_cast<size_t>(t - 1)] = 0;  // external row, bookkeeping no longer applies
}

void StalenessMatrix::write_csv(std::ostream& out) const {
    out << "row,col,value\n";
    const Matrix& m = w_.dense();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            if (m(i, j) != 0.0) {
                std::ostringstream v;
                v.precision(17);
                v << m(i, j);
                out << (i + 1) << ',' << (j + 1) << ',' << v.str() << '\n';
            }
}

StalenessMatrix StalenessMatrix::read_csv(std::istream& in, Eigen::Index horizon, double downscale_p) {
    StalenessMatrix w(horizon, downscale_p);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        Eigen::Index i = std::stoll(cell);
        std::getline(ls, cell, ',');
        Eigen::Index j = std::stoll(cell);
        std::getline(ls, cell, ',');
        double v = std::stod(cell);
        require(i >= 1 && i <= horizon && j >= 1 && j <= i, "read_csv: entry outside lower triangle");
        w.w_.set(i - 1, j - 1, v);
    }
    return w;
}

}  // namespace fedma
