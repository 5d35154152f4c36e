#pragma once

#include <Eigen/Dense>

#include "birkhoff/integrals.hpp"
#include "birkhoff/measure.hpp"
#include "birkhoff/spaces.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace birkhoff {

// A scalar process sampled on a time grid over the atom space. column(k)
// returns the per-atom values at time times[k]; columns are recomputed on
// demand so large ensembles never materialize the full (atom x time) matrix.
struct Process {
    std::vector<double> times;
    std::function<Eigen::VectorXd(int)> column;

    static Process from_matrix(std::vector<double> times, Eigen::MatrixXd columns);
};

// Partition generated by binning a scalar function: cells are the nonempty
// bin preimages.
Partition sigma_of(const Eigen::VectorXd& phi, const Eigen::VectorXd& edges);

// Per time index, a partition of the atom space approximating F_t. Two
// constructions: `nested` validates that partitions refine monotonically in
// time; `markov_binned` uses the sigma(z_t) quantile-bin surrogate, whose
// partitions are deliberately not nested across time (the Markov surrogate
// conditions on the current state only) and are built lazily per level.
class Filtration {
public:
    static Filtration nested(std::vector<double> times, std::vector<int> time_indices,
                             std::vector<Partition> partitions);
    static Filtration markov_binned(const Process& z, std::vector<int> time_indices, int bins);

    int levels() const { return int(time_indices_.size()); }
    int time_index_at(int level) const { return time_indices_[std::size_t(level)]; }
    double time_at(int level) const { return times_[std::size_t(level)]; }
    Partition partition_at(int level) const;

private:
    Filtration() = default;
    std::vector<double> times_;
    std::vector<int> time_indices_;
    std::vector<Partition> explicit_partitions_;          // nested mode
    std::function<Eigen::VectorXd(int)> column_;          // markov mode
    int bins_ = 0;
    std::shared_ptr<std::map<int, Partition>> cache_;     // markov mode, lazily filled
};

// E(Phi | F): constant on each cell, equal to the cell's nu-average; zero on
// nu-null cells. Returned as per-atom rows.
Eigen::MatrixXd conditional_expectation(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                                        const Eigen::MatrixXd& values, const Partition& F);

// max over atoms of || E(Phi|F) - E(E(Phi|G)|F) ||; requires G finer than F.
double check_tower(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                   const Eigen::MatrixXd& values, const Partition& F, const Partition& G);

// max over atoms of || E(phi*Phi|F) - phi*E(Phi|F) ||; phi must be constant
// on every F-cell.
double check_pullout(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                     const Eigen::MatrixXd& values, const Eigen::VectorXd& phi, const Partition& F);

struct MartingaleCellRecord {
    int s_index;        // process time index of the pair's left end
    int t_index;
    int cell;           // canonical cell index within F_s
    Eigen::Index count; // atoms in the cell
    double residual;
    double tolerance;
    bool pass;
};

struct MartingaleReport {
    std::vector<std::pair<int, int>> pairs;
    std::vector<MartingaleCellRecord> per_cell;
    double worst_residual = 0.0;
    double worst_ratio = 0.0;  // max residual / tolerance
    double confidence = 0.0;
    bool pass = true;
};

// Tests, for every adjacent filtration pair s < t and every cell E of F_s
// with nu(E) > 0, that the Bi2 integrals of x_t and x_s over E agree within a
// per-cell z-tolerance (Bonferroni-corrected across all cells and pairs,
// floored at 1e-10 so exact instances are judged exactly).
MartingaleReport martingale_test(const Process& x, const VectorMeasure& N, const Filtration& F,
                                 double confidence);

// Shared kernel: per-cell residual norm(sum_E m*u) and component CLT scales
// tau_j = std(u_j) * sqrt(sum_E m^2), for per-atom vectors u given in one of
// the measure storage shapes. Exposed for the distribution-preservation and
// conditional-identity checks, which test the same kind of identity.
struct CellZeroTest {
    Eigen::VectorXd weighted_sum;  // sum m(omega) u(omega)
    Eigen::VectorXd tau;
    Eigen::Index count = 0;
    double residual(const SpaceDescriptor& space) const { return space_norm(space, weighted_sum); }
};

// u(omega) = a(omega) * direction
CellZeroTest cell_zero_test_rank_one(const Eigen::VectorXd& a, const Eigen::VectorXd& direction,
                                     const Eigen::VectorXd& masses, std::span<const AtomIndex> cell);
// u(omega) = rows.row(omega)
CellZeroTest cell_zero_test_dense(const Eigen::MatrixXd& rows, const Eigen::VectorXd& masses,
                                  std::span<const AtomIndex> cell);
// u(omega) = a(omega) * e_{slot(omega)}
CellZeroTest cell_zero_test_slots(const Eigen::VectorXd& a, const std::vector<std::int32_t>& slot,
                                  Eigen::Index dim, const Eigen::VectorXd& masses,
                                  std::span<const AtomIndex> cell);

}  // namespace birkhoff
