#pragma once

#include <Eigen/Dense>

#include "birkhoff/spaces.hpp"

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace birkhoff {

using AtomIndex = std::int32_t;
using AtomSet = std::vector<AtomIndex>;  // sorted ascending

// Finite atom space with nonnegative weights: the discretized (Omega, A, nu).
class DiscreteMeasureSpace {
public:
    explicit DiscreteMeasureSpace(Eigen::VectorXd weights);

    static DiscreteMeasureSpace uniform(Eigen::Index atoms) {
        return DiscreteMeasureSpace(Eigen::VectorXd::Constant(atoms, 1.0 / double(atoms)));
    }

    Eigen::Index atom_count() const { return weights_.size(); }
    const Eigen::VectorXd& weights() const { return weights_; }
    double total() const { return total_; }
    bool is_probability() const { return std::abs(total_ - 1.0) <= 1e-12; }

    double mass_of(std::span<const AtomIndex> atoms) const {
        double m = 0.0;
        for (AtomIndex i : atoms) m += weights_(i);
        return m;
    }

private:
    Eigen::VectorXd weights_;
    double total_ = 0.0;
};

// Disjoint nonempty cells covering all atoms. Canonical form: each cell
// sorted ascending, cells ordered by their smallest atom.
class Partition {
public:
    Partition(AtomIndex atom_count, std::vector<AtomSet> cells);

    static Partition trivial(AtomIndex atom_count);
    static Partition atoms(AtomIndex atom_count);

    AtomIndex atom_count() const { return atom_count_; }
    const std::vector<AtomSet>& cells() const { return cells_; }
    std::size_t cell_count() const { return cells_.size(); }

    // atom -> index of its cell in cells()
    const std::vector<std::int32_t>& cell_of() const { return cell_of_; }

    friend bool operator==(const Partition& a, const Partition& b) {
        return a.atom_count_ == b.atom_count_ && a.cells_ == b.cells_;
    }

private:
    AtomIndex atom_count_;
    std::vector<AtomSet> cells_;
    std::vector<std::int32_t> cell_of_;
};

// Common refinement: cells are the nonempty intersections of p- and q-cells.
Partition refine(const Partition& p, const Partition& q);

// True iff every p-cell lies inside some q-cell.
bool is_finer(const Partition& p, const Partition& q);

// A partition together with one tag atom chosen inside each cell.
struct TaggedPartition {
    Partition partition;
    std::vector<AtomIndex> tags;  // tags[k] in partition.cells()[k]

    TaggedPartition(Partition p, std::vector<AtomIndex> t);
};

// Finitely additive set function atom-set -> BanachValue. The per-atom values
// come in three storage forms; Dense is the general case, RankOne covers
// measures whose increments share one direction (such as constant-function
// valued measures), SlotIndicator covers empirical conditional measures whose
// increments are scaled coordinate vectors.
class VectorMeasure {
public:
    enum class Kind {
        Tabulated,  // per-atom value IS the increment N({omega})
        Density     // increment = value(omega) * nu({omega})
    };

    struct DenseValues {
        Eigen::MatrixXd rows;  // atom_count x dim
    };
    struct RankOneValues {
        Eigen::VectorXd coeff;      // per atom
        Eigen::VectorXd direction;  // shared, length dim
    };
    struct SlotValues {
        std::vector<std::int32_t> slot;  // per atom, in [0, dim)
        Eigen::VectorXd coeff;           // per atom
    };
    using Values = std::variant<DenseValues, RankOneValues, SlotValues>;

    static VectorMeasure tabulated(DiscreteMeasureSpace base, SpaceDescriptor target,
                                   Eigen::MatrixXd increments);
    static VectorMeasure tabulated_rank_one(DiscreteMeasureSpace base, SpaceDescriptor target,
                                            Eigen::VectorXd coeff, Eigen::VectorXd direction);
    static VectorMeasure density(DiscreteMeasureSpace base, SpaceDescriptor target,
                                 Eigen::MatrixXd values);
    static VectorMeasure density_rank_one(DiscreteMeasureSpace base, SpaceDescriptor target,
                                          Eigen::VectorXd coeff, Eigen::VectorXd direction);
    static VectorMeasure density_slots(DiscreteMeasureSpace base, SpaceDescriptor target,
                                       std::vector<std::int32_t> slot, Eigen::VectorXd coeff);

    Kind kind() const { return kind_; }
    const DiscreteMeasureSpace& base() const { return base_; }
    const SpaceDescriptor& target() const { return target_; }
    const Values& values() const { return values_; }

    // The scalar factor turning the stored value into the increment.
    double atom_factor(AtomIndex i) const {
        return kind_ == Kind::Density ? base_.weights()(i) : 1.0;
    }

    BanachValue increment(AtomIndex i) const;

    // N(A) = sum of increments over A; exact finite additivity.
    BanachValue measure_of(std::span<const AtomIndex> atoms) const;
    BanachValue measure_of_all() const;

    // sum over A of phi(omega) * N({omega}) — the exact Bi2 sum.
    BanachValue weighted_sum(const Eigen::VectorXd& phi, std::span<const AtomIndex> atoms) const;
    BanachValue weighted_sum_all(const Eigen::VectorXd& phi) const;

    // sum over A of ||N({omega})|| — the variation of N on A.
    double variation_of(std::span<const AtomIndex> atoms) const;

    // per-atom pairing of a dual functional with the increments
    Eigen::VectorXd probe_increments(const DualFunctional& probe) const;

    // New measure with increments multiplied by y (atom-wise); kind Tabulated.
    VectorMeasure scaled_by(const Eigen::VectorXd& y) const;

private:
    VectorMeasure(Kind kind, DiscreteMeasureSpace base, SpaceDescriptor target, Values values);

    Kind kind_;
    DiscreteMeasureSpace base_;
    SpaceDescriptor target_;
    Values values_;
};

// All atoms 0..n-1 as a set.
AtomSet all_atoms(AtomIndex n);

}  // namespace birkhoff
