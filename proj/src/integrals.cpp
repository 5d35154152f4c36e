#include "birkhoff/integrals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace birkhoff {

Eigen::Index bin_index(const Eigen::VectorXd& edges, double x) {
    const Eigen::Index nb = edges.size() - 1;
    if (nb < 1) throw std::invalid_argument("bin_index: need at least one bin");
    if (x < edges(0) || x > edges(nb)) throw std::out_of_range("bin_index: value outside bin edges");
    if (x == edges(nb)) return nb - 1;
    // first edge strictly greater than x
    const double* begin = edges.data();
    const double* it = std::upper_bound(begin, begin + edges.size(), x);
    return Eigen::Index(it - begin) - 1;
}

Eigen::VectorXd quantile_edges(const Eigen::VectorXd& values, int bins) {
    if (bins < 1) throw std::invalid_argument("quantile_edges: bins must be >= 1");
    if (values.size() < 1) throw std::invalid_argument("quantile_edges: empty sample");
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    Eigen::VectorXd edges(bins + 1);
    const std::size_t n = sorted.size();
    edges(0) = sorted.front();
    for (int k = 1; k < bins; ++k) edges(k) = sorted[std::size_t(k) * n / std::size_t(bins)];
    edges(bins) = sorted.back();
    return edges;
}

namespace {

// max pairwise norm distance of the rows indexed by `cell`
double cell_diameter(const SpaceDescriptor& target, const Eigen::MatrixXd& values, const AtomSet& cell) {
    double d = 0.0;
    for (std::size_t a = 0; a + 1 < cell.size(); ++a)
        for (std::size_t b = a + 1; b < cell.size(); ++b)
            d = std::max(d, space_norm(target, (values.row(cell[a]) - values.row(cell[b])).transpose()));
    return d;
}

double scalar_spread(const Eigen::VectorXd& phi, const AtomSet& cell) {
    double lo = phi(cell.front()), hi = lo;
    for (AtomIndex i : cell) {
        lo = std::min(lo, phi(i));
        hi = std::max(hi, phi(i));
    }
    return hi - lo;
}

// Greedy refinement driver shared by both integral types. `contribution`
// evaluates diam*mass for a cell; `split_key` orders atoms for the median
// split. Returns the final cells along with the oscillation trace.
struct RefinementOutcome {
    std::vector<AtomSet> cells;
    std::vector<double> trace;
    double bound;
};

RefinementOutcome refine_until(AtomIndex atom_count, double tol,
                               const std::function<double(const AtomSet&)>& contribution,
                               const std::function<double(AtomIndex)>& split_key) {
    std::vector<AtomSet> cells{all_atoms(atom_count)};
    std::vector<double> contrib{contribution(cells[0])};
    double bound = contrib[0];
    std::vector<double> trace{bound};

    while (bound > tol) {
        // largest contribution first
        std::size_t pick = 0;
        for (std::size_t k = 1; k < cells.size(); ++k)
            if (contrib[k] > contrib[pick]) pick = k;
        if (contrib[pick] <= 0.0) break;  // nothing splittable contributes
        AtomSet& cell = cells[pick];
        if (cell.size() < 2) break;       // all remaining contributions are singleton cells

        AtomSet ordered = cell;
        std::stable_sort(ordered.begin(), ordered.end(),
                         [&](AtomIndex a, AtomIndex b) { return split_key(a) < split_key(b); });
        std::size_t cut = ordered.size() / 2;
        // keep equal keys on one side; fall back to an index split when the
        // key is constant over the cell
        while (cut < ordered.size() && split_key(ordered[cut]) == split_key(ordered[cut - 1])) ++cut;
        if (cut == ordered.size()) cut = ordered.size() / 2;

        AtomSet low(ordered.begin(), ordered.begin() + long(cut));
        AtomSet high(ordered.begin() + long(cut), ordered.end());
        const double c_low = contribution(low);
        const double c_high = contribution(high);
        bound += c_low + c_high - contrib[pick];
        cells[pick] = std::move(low);
        contrib[pick] = c_low;
        cells.push_back(std::move(high));
        contrib.push_back(c_high);
        trace.push_back(bound);
    }
    return {std::move(cells), std::move(trace), bound};
}

}  // namespace

double oscillation_bound(const SpaceDescriptor& target, const Eigen::MatrixXd& values,
                         const Eigen::VectorXd& weights, const Partition& p) {
    double bound = 0.0;
    for (const auto& cell : p.cells()) {
        double mass = 0.0;
        for (AtomIndex i : cell) mass += weights(i);
        if (mass > 0.0 && cell.size() > 1) bound += cell_diameter(target, values, cell) * mass;
    }
    return bound;
}

BanachValue bi1_exact(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                      const Eigen::MatrixXd& values) {
    return BanachValue(target, values.transpose() * base.weights());
}

BanachValue bi1_exact(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                      const Eigen::MatrixXd& values, std::span<const AtomIndex> atoms) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(target.dim());
    for (AtomIndex i : atoms) acc.noalias() += base.weights()(i) * values.row(i).transpose();
    return BanachValue(target, std::move(acc));
}

BirkhoffResult bi1_integrate(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                             const Eigen::MatrixXd& values, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("bi1_integrate: tol must be positive");
    if (values.rows() != base.atom_count() || values.cols() != target.dim())
        throw std::invalid_argument("bi1_integrate: value matrix shape mismatch");

    const Eigen::VectorXd& w = base.weights();
    auto contribution = [&](const AtomSet& cell) {
        double mass = 0.0;
        for (AtomIndex i : cell) mass += w(i);
        if (mass <= 0.0 || cell.size() < 2) return 0.0;
        return cell_diameter(target, values, cell) * mass;
    };
    // distance of the atom's value to the running cell mean is refreshed per
    // split via a closure over the candidate cell; we use the global
    // mass-weighted mean once per split decision instead, which is enough to
    // separate clusters
    auto outcome_key_mean = bi1_exact(base, target, values);
    const double total = base.total();
    Eigen::VectorXd mean =
        total > 0.0 ? Eigen::VectorXd(outcome_key_mean.coords / total) : Eigen::VectorXd::Zero(target.dim());
    auto split_key = [&](AtomIndex i) {
        return space_norm(target, (values.row(i).transpose() - mean).eval());
    };

    auto outcome = refine_until(AtomIndex(base.atom_count()), tol, contribution, split_key);
    return BirkhoffResult{bi1_exact(base, target, values), outcome.bound,
                          Partition(AtomIndex(base.atom_count()), std::move(outcome.cells)),
                          std::move(outcome.trace)};
}

BanachValue bi1_tagged_sum(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                           const Eigen::MatrixXd& values, const TaggedPartition& tp) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(target.dim());
    for (std::size_t k = 0; k < tp.tags.size(); ++k) {
        double mass = 0.0;
        for (AtomIndex i : tp.partition.cells()[k]) mass += base.weights()(i);
        acc.noalias() += mass * values.row(tp.tags[k]).transpose();
    }
    return BanachValue(target, std::move(acc));
}

double oscillation_bound(const Eigen::VectorXd& phi, const VectorMeasure& N, const Partition& p) {
    double bound = 0.0;
    for (const auto& cell : p.cells()) {
        if (cell.size() < 2) continue;
        const double var = N.variation_of(cell);
        if (var > 0.0) bound += scalar_spread(phi, cell) * var;
    }
    return bound;
}

BirkhoffResult bi2_integrate(const Eigen::VectorXd& phi, const VectorMeasure& N, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("bi2_integrate: tol must be positive");
    if (phi.size() != N.base().atom_count())
        throw std::invalid_argument("bi2_integrate: phi length must equal atom count");

    // per-atom increment norms, so cell variations are O(|cell|)
    const AtomIndex n = AtomIndex(N.base().atom_count());
    Eigen::VectorXd inc_norm(n);
    for (AtomIndex i = 0; i < n; ++i) inc_norm(i) = norm(N.increment(i));

    auto contribution = [&](const AtomSet& cell) {
        if (cell.size() < 2) return 0.0;
        double var = 0.0;
        for (AtomIndex i : cell) var += inc_norm(i);
        if (var <= 0.0) return 0.0;
        return scalar_spread(phi, cell) * var;
    };
    auto split_key = [&](AtomIndex i) { return phi(i); };

    auto outcome = refine_until(n, tol, contribution, split_key);
    return BirkhoffResult{N.weighted_sum_all(phi), outcome.bound,
                          Partition(n, std::move(outcome.cells)), std::move(outcome.trace)};
}

BanachValue bi2_tagged_sum(const Eigen::VectorXd& phi, const VectorMeasure& N,
                           const TaggedPartition& tp) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(N.target().dim());
    for (std::size_t k = 0; k < tp.tags.size(); ++k)
        acc += phi(tp.tags[k]) * N.measure_of(tp.partition.cells()[k]).coords;
    return BanachValue(N.target(), std::move(acc));
}

InducedMeasure induced_measure(const VectorMeasure& N, const Eigen::VectorXd& phi,
                               const Eigen::VectorXd& edges) {
    const AtomIndex n = AtomIndex(N.base().atom_count());
    if (phi.size() != n) throw std::invalid_argument("induced_measure: phi length mismatch");
    const Eigen::Index nb = edges.size() - 1;

    std::vector<AtomSet> preimages(std::size_t(nb));
    for (AtomIndex i = 0; i < n; ++i) preimages[std::size_t(bin_index(edges, phi(i)))].push_back(i);

    Eigen::VectorXd bin_weights(nb);
    for (Eigen::Index b = 0; b < nb; ++b) {
        double m = 0.0;
        for (AtomIndex i : preimages[std::size_t(b)]) m += N.base().weights()(i);
        bin_weights(b) = m;
    }
    DiscreteMeasureSpace bin_space(bin_weights);

    // keep rank-one structure when the source measure has it
    if (const auto* rv = std::get_if<VectorMeasure::RankOneValues>(&N.values())) {
        Eigen::VectorXd coeff(nb);
        for (Eigen::Index b = 0; b < nb; ++b) {
            double s = 0.0;
            for (AtomIndex i : preimages[std::size_t(b)]) s += N.atom_factor(i) * rv->coeff(i);
            coeff(b) = s;
        }
        return InducedMeasure{
            VectorMeasure::tabulated_rank_one(bin_space, N.target(), std::move(coeff), rv->direction),
            edges, std::move(preimages)};
    }

    Eigen::MatrixXd rows(nb, N.target().dim());
    for (Eigen::Index b = 0; b < nb; ++b)
        rows.row(b) = N.measure_of(preimages[std::size_t(b)]).coords.transpose();
    return InducedMeasure{VectorMeasure::tabulated(bin_space, N.target(), std::move(rows)), edges,
                          std::move(preimages)};
}

DualityReport check_duality(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                            const Eigen::VectorXd& phi, const Eigen::MatrixXd& values, double tol) {
    Eigen::MatrixXd scaled = values;
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= phi(i);
    BirkhoffResult lhs = bi1_integrate(base, target, scaled, tol);
    VectorMeasure N = VectorMeasure::density(base, target, values);
    BirkhoffResult rhs = bi2_integrate(phi, N, tol);
    const double gap = norm(lhs.value - rhs.value);
    return DualityReport{std::move(lhs), std::move(rhs), gap};
}

SubstitutionReport check_substitution(const std::function<double(double)>& psi,
                                      const Eigen::VectorXd& phi, const VectorMeasure& N,
                                      const Eigen::VectorXd& edges, double tol) {
    Eigen::VectorXd psi_phi(phi.size());
    for (Eigen::Index i = 0; i < phi.size(); ++i) psi_phi(i) = psi(phi(i));
    BirkhoffResult lhs = bi2_integrate(psi_phi, N, tol);

    InducedMeasure img = induced_measure(N, phi, edges);
    const Eigen::Index nb = Eigen::Index(img.preimages.size());
    Eigen::VectorXd psi_rep = Eigen::VectorXd::Zero(nb);
    double modulus = 0.0;
    for (Eigen::Index b = 0; b < nb; ++b) {
        const auto& pre = img.preimages[std::size_t(b)];
        if (pre.empty()) continue;
        double lo = phi(pre.front()), hi = lo;
        for (AtomIndex i : pre) {
            lo = std::min(lo, phi(i));
            hi = std::max(hi, phi(i));
        }
        modulus = std::max(modulus, hi - lo);
        psi_rep(b) = psi(0.5 * (lo + hi));
    }
    BirkhoffResult rhs = bi2_integrate(psi_rep, img.measure, tol);
    const double gap = norm(lhs.value - rhs.value);
    return SubstitutionReport{std::move(lhs), std::move(rhs), gap, modulus};
}

}  // namespace birkhoff
