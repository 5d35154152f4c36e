#include "birkhoff/conditioning.hpp"

#include "birkhoff/parallel.hpp"
#include "birkhoff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace birkhoff {

Process Process::from_matrix(std::vector<double> times, Eigen::MatrixXd columns) {
    if (Eigen::Index(times.size()) != columns.cols())
        throw std::invalid_argument("process: one time per column required");
    auto data = std::make_shared<Eigen::MatrixXd>(std::move(columns));
    return Process{std::move(times), [data](int k) -> Eigen::VectorXd { return data->col(k); }};
}

Partition sigma_of(const Eigen::VectorXd& phi, const Eigen::VectorXd& edges) {
    const Eigen::Index nb = edges.size() - 1;
    std::vector<AtomSet> cells(std::size_t(nb));
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        cells[std::size_t(bin_index(edges, phi(i)))].push_back(AtomIndex(i));
    std::erase_if(cells, [](const AtomSet& c) { return c.empty(); });
    return Partition(AtomIndex(phi.size()), std::move(cells));
}

Filtration Filtration::nested(std::vector<double> times, std::vector<int> time_indices,
                              std::vector<Partition> partitions) {
    if (times.size() != partitions.size() || time_indices.size() != partitions.size())
        throw std::invalid_argument("filtration: times, indices and partitions must align");
    if (partitions.empty()) throw std::invalid_argument("filtration: empty");
    for (std::size_t k = 0; k + 1 < partitions.size(); ++k)
        if (!is_finer(partitions[k + 1], partitions[k]))
            throw std::invalid_argument("filtration: partitions must refine monotonically in time");
    Filtration f;
    f.times_ = std::move(times);
    f.time_indices_ = std::move(time_indices);
    f.explicit_partitions_ = std::move(partitions);
    return f;
}

Filtration Filtration::markov_binned(const Process& z, std::vector<int> time_indices, int bins) {
    if (time_indices.empty()) throw std::invalid_argument("filtration: empty");
    if (bins < 1) throw std::invalid_argument("filtration: bins must be >= 1");
    Filtration f;
    for (int idx : time_indices) f.times_.push_back(z.times.at(std::size_t(idx)));
    f.time_indices_ = std::move(time_indices);
    f.column_ = z.column;
    f.bins_ = bins;
    f.cache_ = std::make_shared<std::map<int, Partition>>();
    return f;
}

Partition Filtration::partition_at(int level) const {
    if (level < 0 || level >= levels()) throw std::out_of_range("filtration level out of range");
    if (!explicit_partitions_.empty()) return explicit_partitions_[std::size_t(level)];
    if (auto it = cache_->find(level); it != cache_->end()) return it->second;
    const Eigen::VectorXd col = column_(time_indices_[std::size_t(level)]);
    Partition p = sigma_of(col, quantile_edges(col, bins_));
    return cache_->emplace(level, std::move(p)).first->second;
}

Eigen::MatrixXd conditional_expectation(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                                        const Eigen::MatrixXd& values, const Partition& F) {
    if (values.rows() != base.atom_count() || values.cols() != target.dim())
        throw std::invalid_argument("conditional_expectation: value matrix shape mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(values.rows(), values.cols());
    for (const auto& cell : F.cells()) {
        double mass = 0.0;
        for (AtomIndex i : cell) mass += base.weights()(i);
        if (mass <= 0.0) continue;  // convention: zero on null cells
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(values.cols());
        for (AtomIndex i : cell) mean += base.weights()(i) * values.row(i);
        mean /= mass;
        for (AtomIndex i : cell) out.row(i) = mean;
    }
    return out;
}

double check_tower(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                   const Eigen::MatrixXd& values, const Partition& F, const Partition& G) {
    if (!is_finer(G, F))
        throw std::invalid_argument("check_tower: G must be finer than F");
    const Eigen::MatrixXd direct = conditional_expectation(base, target, values, F);
    const Eigen::MatrixXd inner = conditional_expectation(base, target, values, G);
    const Eigen::MatrixXd two_step = conditional_expectation(base, target, inner, F);
    double gap = 0.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        gap = std::max(gap, space_norm(target, (direct.row(i) - two_step.row(i)).transpose()));
    return gap;
}

double check_pullout(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                     const Eigen::MatrixXd& values, const Eigen::VectorXd& phi, const Partition& F) {
    const double scale = 1.0 + phi.cwiseAbs().maxCoeff();
    for (const auto& cell : F.cells()) {
        double lo = phi(cell.front()), hi = lo;
        for (AtomIndex i : cell) {
            lo = std::min(lo, phi(i));
            hi = std::max(hi, phi(i));
        }
        if (hi - lo > 1e-12 * scale)
            throw std::invalid_argument("check_pullout: phi is not F-measurable");
    }
    Eigen::MatrixXd scaled = values;
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= phi(i);
    const Eigen::MatrixXd lhs = conditional_expectation(base, target, scaled, F);
    const Eigen::MatrixXd cond = conditional_expectation(base, target, values, F);
    double gap = 0.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        gap = std::max(gap, space_norm(target, (lhs.row(i) - phi(i) * cond.row(i)).transpose()));
    return gap;
}

namespace {

Eigen::VectorXd finalize_tau(const Eigen::VectorXd& comp_sum, const Eigen::VectorXd& comp_sumsq,
                             Eigen::Index n, double mass_sq) {
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(comp_sum.size());
    if (n < 2) return tau;
    const double root = std::sqrt(mass_sq);
    for (Eigen::Index j = 0; j < comp_sum.size(); ++j) {
        const double var = (comp_sumsq(j) - comp_sum(j) * comp_sum(j) / double(n)) / double(n - 1);
        tau(j) = var > 0.0 ? std::sqrt(var) * root : 0.0;
    }
    return tau;
}

}  // namespace

CellZeroTest cell_zero_test_rank_one(const Eigen::VectorXd& a, const Eigen::VectorXd& direction,
                                     const Eigen::VectorXd& masses, std::span<const AtomIndex> cell) {
    double s1 = 0.0, s2 = 0.0, sw = 0.0, msq = 0.0;
    for (AtomIndex i : cell) {
        const double v = a(i), m = masses(i);
        s1 += v;
        s2 += v * v;
        sw += m * v;
        msq += m * m;
    }
    const Eigen::Index n = Eigen::Index(cell.size());
    CellZeroTest out;
    out.count = n;
    out.weighted_sum = sw * direction;
    double sd = 0.0;
    if (n >= 2) {
        const double var = (s2 - s1 * s1 / double(n)) / double(n - 1);
        sd = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    out.tau = (sd * std::sqrt(msq)) * direction.cwiseAbs();
    return out;
}

CellZeroTest cell_zero_test_dense(const Eigen::MatrixXd& rows, const Eigen::VectorXd& masses,
                                  std::span<const AtomIndex> cell) {
    const Eigen::Index d = rows.cols();
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d), s2 = Eigen::VectorXd::Zero(d),
                    sw = Eigen::VectorXd::Zero(d);
    double msq = 0.0;
    for (AtomIndex i : cell) {
        const double m = masses(i);
        s1 += rows.row(i).transpose();
        s2 += rows.row(i).cwiseAbs2().transpose();
        sw += m * rows.row(i).transpose();
        msq += m * m;
    }
    CellZeroTest out;
    out.count = Eigen::Index(cell.size());
    out.weighted_sum = std::move(sw);
    out.tau = finalize_tau(s1, s2, out.count, msq);
    return out;
}

CellZeroTest cell_zero_test_slots(const Eigen::VectorXd& a, const std::vector<std::int32_t>& slot,
                                  Eigen::Index dim, const Eigen::VectorXd& masses,
                                  std::span<const AtomIndex> cell) {
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(dim), s2 = Eigen::VectorXd::Zero(dim),
                    sw = Eigen::VectorXd::Zero(dim);
    double msq = 0.0;
    for (AtomIndex i : cell) {
        const std::int32_t j = slot[std::size_t(i)];
        const double v = a(i), m = masses(i);
        s1(j) += v;
        s2(j) += v * v;
        sw(j) += m * v;
        msq += m * m;
    }
    CellZeroTest out;
    out.count = Eigen::Index(cell.size());
    out.weighted_sum = std::move(sw);
    out.tau = finalize_tau(s1, s2, out.count, msq);
    return out;
}

namespace {

// Per-atom scalar u-coefficient for the rank-one and slot storages:
// delta * coeff for densities, delta * coeff / nu for tabulated increments.
Eigen::VectorXd density_scaled(const VectorMeasure& N, const Eigen::VectorXd& delta,
                               const Eigen::VectorXd& coeff) {
    const Eigen::VectorXd& nu = N.base().weights();
    Eigen::VectorXd a(coeff.size());
    if (N.kind() == VectorMeasure::Kind::Density) {
        a = delta.cwiseProduct(coeff);
    } else {
        for (Eigen::Index i = 0; i < coeff.size(); ++i) {
            if (nu(i) > 0.0) {
                a(i) = delta(i) * coeff(i) / nu(i);
            } else {
                if (coeff(i) != 0.0)
                    throw std::invalid_argument("martingale_test: tabulated increment on a null atom");
                a(i) = 0.0;
            }
        }
    }
    return a;
}

CellZeroTest martingale_cell_dense(const VectorMeasure& N, const Eigen::MatrixXd& rows,
                                   const Eigen::VectorXd& delta, std::span<const AtomIndex> cell) {
    const Eigen::VectorXd& nu = N.base().weights();
    const Eigen::Index d = N.target().dim();
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d), s2 = Eigen::VectorXd::Zero(d),
                    sw = Eigen::VectorXd::Zero(d);
    double msq = 0.0;
    const bool density = N.kind() == VectorMeasure::Kind::Density;
    for (AtomIndex i : cell) {
        const double m = nu(i);
        double scale;
        if (density) {
            scale = delta(i);
        } else if (m > 0.0) {
            scale = delta(i) / m;
        } else {
            if (space_norm(N.target(), rows.row(i).transpose()) > 0.0)
                throw std::invalid_argument("martingale_test: tabulated increment on a null atom");
            continue;
        }
        const Eigen::RowVectorXd u = scale * rows.row(i);
        s1 += u.transpose();
        s2 += u.cwiseAbs2().transpose();
        sw += m * u.transpose();
        msq += m * m;
    }
    CellZeroTest out;
    out.count = Eigen::Index(cell.size());
    out.weighted_sum = std::move(sw);
    out.tau = finalize_tau(s1, s2, out.count, msq);
    return out;
}

}  // namespace

MartingaleReport martingale_test(const Process& x, const VectorMeasure& N, const Filtration& F,
                                 double confidence) {
    if (F.levels() < 2) throw std::invalid_argument("martingale_test: filtration needs >= 2 levels");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("martingale_test: confidence must be in (0,1)");

    MartingaleReport report;
    report.confidence = confidence;
    std::vector<Eigen::VectorXd> taus;

    for (int level = 0; level + 1 < F.levels(); ++level) {
        const int s_idx = F.time_index_at(level);
        const int t_idx = F.time_index_at(level + 1);
        report.pairs.emplace_back(s_idx, t_idx);
        const Partition part = F.partition_at(level);
        const Eigen::VectorXd delta = x.column(t_idx) - x.column(s_idx);

        // u-coefficients shared by every cell of this pair
        Eigen::VectorXd a_all;
        if (const auto* rv = std::get_if<VectorMeasure::RankOneValues>(&N.values()))
            a_all = density_scaled(N, delta, rv->coeff);
        else if (const auto* sv = std::get_if<VectorMeasure::SlotValues>(&N.values()))
            a_all = density_scaled(N, delta, sv->coeff);

        const std::size_t ncells = part.cells().size();
        std::vector<CellZeroTest> cell_results(ncells);
        std::vector<char> keep(ncells, 0);
        parallel_for(ncells, [&](std::size_t c) {
            const auto& cell = part.cells()[c];
            if (N.base().mass_of(cell) <= 0.0) return;
            if (const auto* rv = std::get_if<VectorMeasure::RankOneValues>(&N.values()))
                cell_results[c] =
                    cell_zero_test_rank_one(a_all, rv->direction, N.base().weights(), cell);
            else if (const auto* sv = std::get_if<VectorMeasure::SlotValues>(&N.values()))
                cell_results[c] = cell_zero_test_slots(a_all, sv->slot, N.target().dim(),
                                                       N.base().weights(), cell);
            else
                cell_results[c] = martingale_cell_dense(
                    N, std::get<VectorMeasure::DenseValues>(N.values()).rows, delta, cell);
            keep[c] = 1;
        });
        for (std::size_t c = 0; c < ncells; ++c) {
            if (!keep[c]) continue;
            MartingaleCellRecord rec;
            rec.s_index = s_idx;
            rec.t_index = t_idx;
            rec.cell = int(c);
            rec.count = cell_results[c].count;
            rec.residual = cell_results[c].residual(N.target());
            rec.tolerance = 0.0;  // finalized below
            rec.pass = false;
            report.per_cell.push_back(rec);
            taus.push_back(std::move(cell_results[c].tau));
        }
    }

    const double alpha = (1.0 - confidence) / double(std::max<std::size_t>(1, report.per_cell.size()));
    for (std::size_t k = 0; k < report.per_cell.size(); ++k) {
        auto& rec = report.per_cell[k];
        rec.tolerance = std::max(stats::gaussian_norm_bound(N.target(), taus[k], alpha), 1e-10);
        rec.pass = rec.residual <= rec.tolerance;
        report.worst_residual = std::max(report.worst_residual, rec.residual);
        report.worst_ratio = std::max(report.worst_ratio, rec.residual / rec.tolerance);
        report.pass = report.pass && rec.pass;
    }
    return report;
}

}  // namespace birkhoff
