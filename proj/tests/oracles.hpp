#pragma once

// Test-only brute-force oracles: plain per-atom loops, independent of the
// library's measure kernels and refinement machinery.

#include <Eigen/Dense>

#include "birkhoff/measure.hpp"
#include "birkhoff/spaces.hpp"

#include <map>
#include <vector>

namespace oracle {

// sum_i phi(i) * values.row(i) * weights(i), or without phi when empty
inline Eigen::VectorXd weighted_sum(const Eigen::MatrixXd& values, const Eigen::VectorXd& weights,
                                    const Eigen::VectorXd& phi = Eigen::VectorXd()) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(values.cols());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        double w = weights(i);
        if (phi.size()) w *= phi(i);
        for (Eigen::Index j = 0; j < values.cols(); ++j) acc(j) += w * values(i, j);
    }
    return acc;
}

// increments of a VectorMeasure collected the slow way (one atom at a time)
inline Eigen::MatrixXd increments_of(const birkhoff::VectorMeasure& N) {
    Eigen::MatrixXd rows(N.base().atom_count(), N.target().dim());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        rows.row(i) = N.increment(birkhoff::AtomIndex(i)).coords.transpose();
    return rows;
}

// preimage sums by explicit enumeration: sum over {i : phi(i) in [lo, hi)}
inline Eigen::VectorXd preimage_sum(const birkhoff::VectorMeasure& N, const Eigen::VectorXd& phi,
                                    double lo, double hi, bool closed_right) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(N.target().dim());
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
        const bool in = phi(i) >= lo && (closed_right ? phi(i) <= hi : phi(i) < hi);
        if (in) acc += N.increment(birkhoff::AtomIndex(i)).coords;
    }
    return acc;
}

// cellwise nu-average, written independently of conditional_expectation
inline Eigen::MatrixXd cell_average(const Eigen::MatrixXd& values, const Eigen::VectorXd& weights,
                                    const birkhoff::Partition& F) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(values.rows(), values.cols());
    for (const auto& cell : F.cells()) {
        double mass = 0.0;
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(values.cols());
        for (birkhoff::AtomIndex i : cell) {
            mass += weights(i);
            acc += weights(i) * values.row(i);
        }
        if (mass > 0.0)
            for (birkhoff::AtomIndex i : cell) out.row(i) = acc / mass;
    }
    return out;
}

}  // namespace oracle
