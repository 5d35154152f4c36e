#pragma once

#include <Eigen/Dense>

#include "birkhoff/measure.hpp"
#include "birkhoff/spaces.hpp"

#include <functional>
#include <vector>

namespace birkhoff {

// Result of a Birkhoff integration run. `value` is the exact finite sum; the
// partition and `oscillation` form the certificate that every tagged Riemann
// sum on that partition stays within `oscillation` of the value. `trace`
// records the bound after each refinement step (nonincreasing).
struct BirkhoffResult {
    BanachValue value;
    double oscillation;
    Partition partition_used;
    std::vector<double> trace;
};

// --- binning -----------------------------------------------------------

// Index of the bin [edges(k), edges(k+1)) containing x; the last bin is
// closed on the right. Throws std::out_of_range for x outside the edges.
Eigen::Index bin_index(const Eigen::VectorXd& edges, double x);

// Quantile edges over the given values: edges(0) = min, edges(B) = max,
// interior edges at the k/B sample quantiles. Duplicate edges are allowed
// (the corresponding bins are simply empty).
Eigen::VectorXd quantile_edges(const Eigen::VectorXd& values, int bins);

// --- first type: vector integrand, scalar measure -----------------------

// sum over cells of diam(f(cell)) * nu(cell), where diam is the max pairwise
// norm distance of values inside the cell. Certifies the epsilon of the
// tagged-sum criterion and is nonincreasing under refinement.
double oscillation_bound(const SpaceDescriptor& target, const Eigen::MatrixXd& values,
                         const Eigen::VectorXd& weights, const Partition& p);

// Exact sum over the atom set of value-row * weight.
BanachValue bi1_exact(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                      const Eigen::MatrixXd& values);
BanachValue bi1_exact(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                      const Eigen::MatrixXd& values, std::span<const AtomIndex> atoms);

// Refines greedily (largest diam*mass cell, split at the median of the
// distance-to-cell-mean key) until the oscillation bound is <= tol.
BirkhoffResult bi1_integrate(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                             const Eigen::MatrixXd& values, double tol);

// Tagged Riemann sum sum_k f(tag_k) * nu(cell_k).
BanachValue bi1_tagged_sum(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                           const Eigen::MatrixXd& values, const TaggedPartition& tp);

// --- second type: scalar integrand, vector measure ----------------------

// sum over cells of diam(phi(cell)) * variation(N, cell).
double oscillation_bound(const Eigen::VectorXd& phi, const VectorMeasure& N, const Partition& p);

BirkhoffResult bi2_integrate(const Eigen::VectorXd& phi, const VectorMeasure& N, double tol);

BanachValue bi2_tagged_sum(const Eigen::VectorXd& phi, const VectorMeasure& N,
                           const TaggedPartition& tp);

// --- image measures and the two theorem checks --------------------------

struct InducedMeasure {
    VectorMeasure measure;            // over bin atoms; base weights = nu(preimage)
    Eigen::VectorXd edges;
    std::vector<AtomSet> preimages;   // per bin (possibly empty)
};

// N_phi(B) = N(phi^{-1}(B)) on the given bins; bin sums reproduce N(Omega).
InducedMeasure induced_measure(const VectorMeasure& N, const Eigen::VectorXd& phi,
                               const Eigen::VectorXd& edges);

struct DualityReport {
    BirkhoffResult lhs;  // Bi1 of phi*Phi against nu
    BirkhoffResult rhs;  // Bi2 of phi against N = Phi dnu
    double gap;
};

// Both routes of the first/second-type identity, evaluated independently.
DualityReport check_duality(const DiscreteMeasureSpace& base, const SpaceDescriptor& target,
                            const Eigen::VectorXd& phi, const Eigen::MatrixXd& values, double tol);

struct SubstitutionReport {
    BirkhoffResult lhs;       // Bi2 of psi(phi) against N
    BirkhoffResult rhs;       // Bi2 of psi against N_phi with bin representatives
    double gap;
    double binning_modulus;   // max spread of phi inside a bin (0 = exact binning)
};

SubstitutionReport check_substitution(const std::function<double(double)>& psi,
                                      const Eigen::VectorXd& phi, const VectorMeasure& N,
                                      const Eigen::VectorXd& edges, double tol);

}  // namespace birkhoff
