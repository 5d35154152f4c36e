#include "birkhoff/measure.hpp"

#include <algorithm>
#include <stdexcept>

namespace birkhoff {

DiscreteMeasureSpace::DiscreteMeasureSpace(Eigen::VectorXd weights) : weights_(std::move(weights)) {
    if (weights_.size() < 1) throw std::invalid_argument("measure space: need at least one atom");
    if ((weights_.array() < 0.0).any())
        throw std::invalid_argument("measure space: weights must be nonnegative");
    total_ = weights_.sum();
    if (!std::isfinite(total_)) throw std::invalid_argument("measure space: total mass must be finite");
}

Partition::Partition(AtomIndex atom_count, std::vector<AtomSet> cells)
    : atom_count_(atom_count), cells_(std::move(cells)) {
    if (atom_count_ < 1) throw std::invalid_argument("partition: empty atom space");
    cell_of_.assign(std::size_t(atom_count_), -1);
    for (auto& cell : cells_) {
        if (cell.empty()) throw std::invalid_argument("partition: empty cell");
        std::sort(cell.begin(), cell.end());
    }
    // canonical order: by smallest contained atom
    std::sort(cells_.begin(), cells_.end(),
              [](const AtomSet& a, const AtomSet& b) { return a.front() < b.front(); });
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        for (AtomIndex i : cells_[k]) {
            if (i < 0 || i >= atom_count_) throw std::invalid_argument("partition: atom out of range");
            if (cell_of_[std::size_t(i)] != -1) throw std::invalid_argument("partition: cells overlap");
            cell_of_[std::size_t(i)] = std::int32_t(k);
        }
    }
    for (AtomIndex i = 0; i < atom_count_; ++i)
        if (cell_of_[std::size_t(i)] == -1)
            throw std::invalid_argument("partition: cells do not cover the atom space");
}

Partition Partition::trivial(AtomIndex atom_count) {
    return Partition(atom_count, {all_atoms(atom_count)});
}

Partition Partition::atoms(AtomIndex atom_count) {
    std::vector<AtomSet> cells;
    cells.reserve(std::size_t(atom_count));
    for (AtomIndex i = 0; i < atom_count; ++i) cells.push_back({i});
    return Partition(atom_count, std::move(cells));
}

Partition refine(const Partition& p, const Partition& q) {
    if (p.atom_count() != q.atom_count())
        throw std::invalid_argument("refine: partitions on different atom spaces");
    const auto& pc = p.cell_of();
    const auto& qc = q.cell_of();
    // group atoms by (p-cell, q-cell)
    std::vector<std::pair<std::int64_t, AtomIndex>> keyed(std::size_t(p.atom_count()));
    const std::int64_t qn = std::int64_t(q.cell_count());
    for (AtomIndex i = 0; i < p.atom_count(); ++i)
        keyed[std::size_t(i)] = {std::int64_t(pc[std::size_t(i)]) * qn + qc[std::size_t(i)], i};
    std::sort(keyed.begin(), keyed.end());
    std::vector<AtomSet> cells;
    for (std::size_t i = 0; i < keyed.size();) {
        std::size_t j = i;
        AtomSet cell;
        while (j < keyed.size() && keyed[j].first == keyed[i].first) cell.push_back(keyed[j++].second);
        cells.push_back(std::move(cell));
        i = j;
    }
    return Partition(p.atom_count(), std::move(cells));
}

bool is_finer(const Partition& p, const Partition& q) {
    if (p.atom_count() != q.atom_count()) return false;
    const auto& qc = q.cell_of();
    for (const auto& cell : p.cells()) {
        const std::int32_t home = qc[std::size_t(cell.front())];
        for (AtomIndex i : cell)
            if (qc[std::size_t(i)] != home) return false;
    }
    return true;
}

TaggedPartition::TaggedPartition(Partition p, std::vector<AtomIndex> t)
    : partition(std::move(p)), tags(std::move(t)) {
    if (tags.size() != partition.cell_count())
        throw std::invalid_argument("tagged partition: one tag per cell required");
    for (std::size_t k = 0; k < tags.size(); ++k) {
        const auto& cell = partition.cells()[k];
        if (!std::binary_search(cell.begin(), cell.end(), tags[k]))
            throw std::invalid_argument("tagged partition: tag not inside its cell");
    }
}

AtomSet all_atoms(AtomIndex n) {
    AtomSet s(std::size_t(n));
    for (AtomIndex i = 0; i < n; ++i) s[std::size_t(i)] = i;
    return s;
}

VectorMeasure::VectorMeasure(Kind kind, DiscreteMeasureSpace base, SpaceDescriptor target, Values values)
    : kind_(kind), base_(std::move(base)), target_(std::move(target)), values_(std::move(values)) {
    const Eigen::Index n = base_.atom_count();
    const Eigen::Index d = target_.dim();
    if (const auto* dv = std::get_if<DenseValues>(&values_)) {
        if (dv->rows.rows() != n || dv->rows.cols() != d)
            throw std::invalid_argument("vector measure: value matrix shape mismatch");
    } else if (const auto* rv = std::get_if<RankOneValues>(&values_)) {
        if (rv->coeff.size() != n || rv->direction.size() != d)
            throw std::invalid_argument("vector measure: rank-one shape mismatch");
    } else if (const auto* sv = std::get_if<SlotValues>(&values_)) {
        if (Eigen::Index(sv->slot.size()) != n || sv->coeff.size() != n)
            throw std::invalid_argument("vector measure: slot shape mismatch");
        for (std::int32_t s : sv->slot)
            if (s < 0 || s >= d) throw std::invalid_argument("vector measure: slot out of range");
    }
}

VectorMeasure VectorMeasure::tabulated(DiscreteMeasureSpace base, SpaceDescriptor target,
                                       Eigen::MatrixXd increments) {
    return VectorMeasure(Kind::Tabulated, std::move(base), std::move(target),
                         DenseValues{std::move(increments)});
}

VectorMeasure VectorMeasure::tabulated_rank_one(DiscreteMeasureSpace base, SpaceDescriptor target,
                                                Eigen::VectorXd coeff, Eigen::VectorXd direction) {
    return VectorMeasure(Kind::Tabulated, std::move(base), std::move(target),
                         RankOneValues{std::move(coeff), std::move(direction)});
}

VectorMeasure VectorMeasure::density(DiscreteMeasureSpace base, SpaceDescriptor target,
                                     Eigen::MatrixXd values) {
    return VectorMeasure(Kind::Density, std::move(base), std::move(target),
                         DenseValues{std::move(values)});
}

VectorMeasure VectorMeasure::density_rank_one(DiscreteMeasureSpace base, SpaceDescriptor target,
                                              Eigen::VectorXd coeff, Eigen::VectorXd direction) {
    return VectorMeasure(Kind::Density, std::move(base), std::move(target),
                         RankOneValues{std::move(coeff), std::move(direction)});
}

VectorMeasure VectorMeasure::density_slots(DiscreteMeasureSpace base, SpaceDescriptor target,
                                           std::vector<std::int32_t> slot, Eigen::VectorXd coeff) {
    return VectorMeasure(Kind::Density, std::move(base), std::move(target),
                         SlotValues{std::move(slot), std::move(coeff)});
}

BanachValue VectorMeasure::increment(AtomIndex i) const {
    const double f = atom_factor(i);
    if (const auto* dv = std::get_if<DenseValues>(&values_))
        return BanachValue(target_, f * dv->rows.row(i).transpose());
    if (const auto* rv = std::get_if<RankOneValues>(&values_))
        return BanachValue(target_, (f * rv->coeff(i)) * rv->direction);
    const auto& sv = std::get<SlotValues>(values_);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(target_.dim());
    c(sv.slot[std::size_t(i)]) = f * sv.coeff(i);
    return BanachValue(target_, std::move(c));
}

BanachValue VectorMeasure::measure_of(std::span<const AtomIndex> atoms) const {
    return weighted_sum(Eigen::VectorXd(), atoms);
}

BanachValue VectorMeasure::measure_of_all() const {
    const AtomSet a = all_atoms(AtomIndex(base_.atom_count()));
    return measure_of(a);
}

BanachValue VectorMeasure::weighted_sum(const Eigen::VectorXd& phi,
                                        std::span<const AtomIndex> atoms) const {
    const bool weighted = phi.size() != 0;
    if (weighted && phi.size() != base_.atom_count())
        throw std::invalid_argument("weighted_sum: phi length must equal atom count");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(target_.dim());
    if (const auto* dv = std::get_if<DenseValues>(&values_)) {
        for (AtomIndex i : atoms) {
            const double w = atom_factor(i) * (weighted ? phi(i) : 1.0);
            acc.noalias() += w * dv->rows.row(i).transpose();
        }
    } else if (const auto* rv = std::get_if<RankOneValues>(&values_)) {
        double s = 0.0;
        for (AtomIndex i : atoms) s += atom_factor(i) * (weighted ? phi(i) : 1.0) * rv->coeff(i);
        acc = s * rv->direction;
    } else {
        const auto& sv = std::get<SlotValues>(values_);
        for (AtomIndex i : atoms)
            acc(sv.slot[std::size_t(i)]) += atom_factor(i) * (weighted ? phi(i) : 1.0) * sv.coeff(i);
    }
    return BanachValue(target_, std::move(acc));
}

BanachValue VectorMeasure::weighted_sum_all(const Eigen::VectorXd& phi) const {
    const AtomSet a = all_atoms(AtomIndex(base_.atom_count()));
    return weighted_sum(phi, a);
}

double VectorMeasure::variation_of(std::span<const AtomIndex> atoms) const {
    double v = 0.0;
    if (const auto* dv = std::get_if<DenseValues>(&values_)) {
        for (AtomIndex i : atoms)
            v += std::abs(atom_factor(i)) * space_norm(target_, dv->rows.row(i).transpose());
    } else if (const auto* rv = std::get_if<RankOneValues>(&values_)) {
        const double dn = space_norm(target_, rv->direction);
        for (AtomIndex i : atoms) v += std::abs(atom_factor(i) * rv->coeff(i)) * dn;
    } else {
        const auto& sv = std::get<SlotValues>(values_);
        // ||c * e_slot|| depends on the norm; for SampleFunction it is |c|/d,
        // for the others |c| (Real/FiniteDim/GridFunction one-hot).
        const double unit = target_.kind() == SpaceKind::SampleFunction ? 1.0 / double(target_.dim()) : 1.0;
        for (AtomIndex i : atoms) v += std::abs(atom_factor(i) * sv.coeff(i)) * unit;
    }
    return v;
}

Eigen::VectorXd VectorMeasure::probe_increments(const DualFunctional& probe) const {
    if (probe.space() != target_)
        throw std::invalid_argument("probe_increments: probe space does not match target");
    const Eigen::Index n = base_.atom_count();
    Eigen::VectorXd out(n);
    if (const auto* dv = std::get_if<DenseValues>(&values_)) {
        out = dv->rows * probe.weights();
        for (Eigen::Index i = 0; i < n; ++i) out(i) *= atom_factor(AtomIndex(i));
    } else if (const auto* rv = std::get_if<RankOneValues>(&values_)) {
        const double pd = probe.weights().dot(rv->direction);
        for (Eigen::Index i = 0; i < n; ++i) out(i) = pd * rv->coeff(i) * atom_factor(AtomIndex(i));
    } else {
        const auto& sv = std::get<SlotValues>(values_);
        for (Eigen::Index i = 0; i < n; ++i)
            out(i) = probe.weights()(sv.slot[std::size_t(i)]) * sv.coeff(i) * atom_factor(AtomIndex(i));
    }
    return out;
}

VectorMeasure VectorMeasure::scaled_by(const Eigen::VectorXd& y) const {
    if (y.size() != base_.atom_count())
        throw std::invalid_argument("scaled_by: y length must equal atom count");
    const Eigen::Index n = base_.atom_count();
    if (const auto* dv = std::get_if<DenseValues>(&values_)) {
        Eigen::MatrixXd rows = dv->rows;
        for (Eigen::Index i = 0; i < n; ++i) rows.row(i) *= y(i) * atom_factor(AtomIndex(i));
        return tabulated(base_, target_, std::move(rows));
    }
    if (const auto* rv = std::get_if<RankOneValues>(&values_)) {
        Eigen::VectorXd coeff = rv->coeff;
        for (Eigen::Index i = 0; i < n; ++i) coeff(i) *= y(i) * atom_factor(AtomIndex(i));
        return tabulated_rank_one(base_, target_, std::move(coeff), rv->direction);
    }
    const auto& sv = std::get<SlotValues>(values_);
    Eigen::VectorXd coeff = sv.coeff;
    for (Eigen::Index i = 0; i < n; ++i) coeff(i) *= y(i) * atom_factor(AtomIndex(i));
    return VectorMeasure(Kind::Tabulated, base_, target_, SlotValues{sv.slot, std::move(coeff)});
}

}  // namespace birkhoff
