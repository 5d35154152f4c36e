#pragma once

#include <Eigen/Dense>

#include "birkhoff/conditioning.hpp"
#include "birkhoff/paths.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace birkhoff {

// ---- closed-form density ratios from the worked examples ----------------

// Standard BM shifted by theta(t) = q t:  g_t(x) = exp(-q x + q^2 t / 2).
inline double bm_density_ratio(double q, double t, double x) {
    return std::exp(-q * x + 0.5 * q * q * t);
}

// The C([0,T])-valued application (theta(t) = t):  g_t(x) = exp(-t/2 - x).
inline double ncirc_density_ratio(double t, double x) { return std::exp(-0.5 * t - x); }

// ---- processes over a path ensemble --------------------------------------

// column k applies f(t_k, w(t_k, path)) to every path.
Process path_process(const PathEnsemble& e, std::function<double(double, double)> f);

Process shifted_process(const Process& z, std::function<double(double)> theta);
Process product_process(const Process& a, const Process& b);

// ---- change of measure ----------------------------------------------------

// Q(A) = Bi2 integral of y_T over A against N: tabulated increments
// y_T(omega) * N({omega}). Throws when y_T is nonpositive on an atom
// carrying mass (the equivalence Q ~ N needs positivity).
VectorMeasure change_measure(const VectorMeasure& N, const Eigen::VectorXd& y_T);

// ---- density estimation ---------------------------------------------------

// Histogram estimate of the vector density F_t of z_t under N: per-bin mass
// N(z_t^{-1}(bin)) divided by bin width.
struct VectorDensityEstimate {
    Eigen::VectorXd edges;
    VectorMeasure bin_mass;     // induced measure over the bins
    Eigen::VectorXi counts;

    BanachValue density_value(Eigen::Index b) const {
        const double width = edges(b + 1) - edges(b);
        AtomSet bin{AtomIndex(b)};
        return scale(width > 0.0 ? 1.0 / width : 0.0, bin_mass.measure_of(bin));
    }
};

VectorDensityEstimate estimate_density(const VectorMeasure& N, const Eigen::VectorXd& z_col,
                                       const Eigen::VectorXd& edges);

// Per-bin estimate of the factorization ratio g_t: probe the numerator and
// denominator histogram masses with a norming functional and divide. Bins
// with fewer than min_count samples on either side are flagged invalid.
struct DensityRatioEstimate {
    Eigen::VectorXd edges;
    Eigen::VectorXd center;     // probe-mass-weighted mean of the shifted samples per bin
    Eigen::VectorXd ghat;
    Eigen::VectorXi count_num, count_den;
    std::vector<char> valid;
};

DensityRatioEstimate density_ratio_estimate(const Eigen::VectorXd& z_col, double theta_t,
                                            const Eigen::VectorXd& edges, const VectorMeasure& N,
                                            const DualFunctional& probe, int min_count);

// Probe-mass-weighted average of f over each bin of `samples` (the honest
// per-bin reference for comparing a ratio estimate against a closed form).
Eigen::VectorXd bin_weighted_average(const std::function<double(double)>& f,
                                     const Eigen::VectorXd& samples,
                                     const Eigen::VectorXd& sample_weight,
                                     const Eigen::VectorXd& edges);

// ---- distribution preservation -------------------------------------------

struct DistributionBinRow {
    double left, right;
    Eigen::Index count_n, count_q;
    double residual, tolerance;
    bool pass;
};

struct DistributionReport {
    double distance = 0.0;  // max bin residual
    bool pass = true;
    std::vector<DistributionBinRow> bins;
};

// Tests N_{z_t} = Q_{ztilde_t} bin by bin at the given confidence
// (Bonferroni across bins). N and Q must share their storage shape.
DistributionReport check_distribution_preservation(const VectorMeasure& N, const VectorMeasure& Q,
                                                   const Eigen::VectorXd& z_col,
                                                   const Eigen::VectorXd& zt_col,
                                                   const Eigen::VectorXd& edges, double confidence);

// ---- the Girsanov verification --------------------------------------------

struct GirsanovSetup {
    Process z;
    std::function<double(double)> theta;
    std::function<double(double, double)> g;  // g_t(x), closed form where known
    Process z_shift;                          // z + theta
    Process y;                                // y_t = g_t(z_shift_t)
    VectorMeasure N;
    VectorMeasure Q;                          // change_measure(N, y_T)
    int terminal_index;                       // process column of T
};

// Scalar specialization: z = BM under P, theta(t) = q t, y from the
// exponential-martingale density.
GirsanovSetup make_bm_girsanov_setup(const PathEnsemble& e, double q);

struct GirsanovReport {
    MartingaleReport y_under_n;        // density process is an N-martingale
    MartingaleReport zy_under_n;       // product process is an N-martingale
    MartingaleReport zshift_under_q;   // the conclusion
    bool pass = false;
    std::string failed_assumption;     // empty when pass
};

// Runs the two assumption tests and the conclusion on the given filtration,
// splitting the confidence budget three ways.
GirsanovReport girsanov_verify(const GirsanovSetup& setup, const Filtration& F, double confidence);

// ---- the C([0,T])-valued application --------------------------------------

// Piecewise value of the grid-function process at coordinate tau and time t:
// exp(-w_tau - tau/2) for t <= tau, exp(-w_t - t/2) for t > tau.
double phi_functional(const Eigen::VectorXd& grid, const Eigen::Ref<const Eigen::RowVectorXd>& w_path,
                      Eigen::Index tau_idx, Eigen::Index t_idx);

// All grid coordinates at once for fixed t.
Eigen::VectorXd phi_row(const Eigen::VectorXd& grid, const Eigen::Ref<const Eigen::RowVectorXd>& w_path,
                        Eigen::Index t_idx);

// N°(A) = integral over A of Phi(., T) dP: a grid-function-valued measure
// whose increments share the constant direction (Phi(., T) is flat in tau).
VectorMeasure build_ncirc(const PathEnsemble& e);

struct StageOutcome {
    std::string name;
    bool pass = false;
    double worst_residual = 0.0;
    double worst_ratio = 0.0;
    std::string note;
};

// Statistical check that E(Phi(., t) | F_s) = exp(-w_s - s/2) as a grid
// function, on sigma(w_s) quantile cells, for each (s, t) index pair.
StageOutcome check_phi_conditional(const PathEnsemble& e,
                                   const std::vector<std::pair<int, int>>& index_pairs, int bins,
                                   double confidence);

struct Prop41Report {
    std::vector<std::pair<double, VectorDensityEstimate>> density_n;        // F_t tables
    std::vector<std::pair<double, VectorDensityEstimate>> density_shifted;  // F~_t tables
    std::vector<std::pair<double, DensityRatioEstimate>> g_by_time;
    std::vector<std::pair<double, Eigen::VectorXd>> g_reference;  // bin-averaged closed form
    double g_worst_rel_err = 0.0;
    bool g_pass = false;
    StageOutcome phi_conditional;
    MartingaleReport y_mart, zy_mart, final_mart, negative_control;
    bool pass = false;
};

// Full pipeline: densities of w and w+t under N°, ratio versus the closed
// form on central bins (|x| <= 2 sqrt(t), within g_rel_tol), the two
// assumption martingale tests, the conclusion under Q, and the negative
// control (w under N° must fail).
Prop41Report prop41_verify(const PathEnsemble& e, double confidence, int density_bins,
                           int filtration_bins, const std::vector<double>& g_times,
                           double g_rel_tol);

// ---- the conditional-measure application ----------------------------------

// P(.|w_T) realized on a product ensemble: M_T samples of w_T (the L1 slots)
// times M independent post-T paths. Atom (j, i) = slot j, path i; N(A) is
// the per-slot empirical conditional probability.
struct ConditionalMeasureModel {
    Eigen::VectorXd slot_values;  // M_T draws of w_T
    PathEnsemble post;            // M paths of the post-T increments
    double q = 0.0;
    VectorMeasure N;              // SampleFunction(M_T)-valued
    Process z;                    // w_{t+T} = slot value + post increment
    Process z_shift;              // + q t
    Process y;                    // exp(-q v_t - q^2 t / 2)

    Eigen::Index slots() const { return slot_values.size(); }
    Eigen::Index paths_per_slot() const { return post.paths(); }
};

ConditionalMeasureModel build_conditional_measure(Eigen::Index slots, Eigen::Index paths,
                                                  const Eigen::VectorXd& post_grid, double horizon_T,
                                                  double q, std::uint64_t seed);

GirsanovSetup make_conditional_girsanov_setup(const ConditionalMeasureModel& model);

}  // namespace birkhoff
