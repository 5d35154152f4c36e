#include "birkhoff/ito.hpp"

#include "birkhoff/parallel.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace birkhoff {

StochasticIntegrand StochasticIntegrand::closed_form(SpaceDescriptor space,
                                                     std::function<BanachValue(double)> value,
                                                     std::function<BanachValue(double)> derivative) {
    return StochasticIntegrand{std::move(space), std::move(value), std::move(derivative),
                               Provenance::ClosedForm};
}

StochasticIntegrand StochasticIntegrand::finite_difference(SpaceDescriptor space,
                                                           std::function<BanachValue(double)> value,
                                                           double h, double horizon) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference: h must be positive");
    auto deriv = [value, h, horizon](double t) -> BanachValue {
        const double lo = std::max(0.0, t - h);
        const double hi = std::min(horizon, t + h);
        return scale(1.0 / (hi - lo), value(hi) - value(lo));
    };
    return StochasticIntegrand{std::move(space), std::move(value), std::move(deriv),
                               Provenance::FiniteDifference};
}

double derivative_consistency_gap(const StochasticIntegrand& f, const Eigen::VectorXd& grid,
                                  double h) {
    double gap = 0.0;
    for (Eigen::Index k = 1; k + 1 < grid.size(); ++k) {
        const double t = grid(k);
        const BanachValue central = scale(1.0 / (2.0 * h), f.value(t + h) - f.value(t - h));
        gap = std::max(gap, norm(central - f.derivative(t)));
    }
    return gap;
}

IntegrandOnGrid sample_integrand(const StochasticIntegrand& f, const Eigen::VectorXd& grid) {
    IntegrandOnGrid out;
    out.values.resize(grid.size(), f.space.dim());
    out.derivs.resize(grid.size(), f.space.dim());
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
        out.values.row(k) = f.value(grid(k)).coords.transpose();
        out.derivs.row(k) = f.derivative(grid(k)).coords.transpose();
    }
    return out;
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid, Eigen::Index a_idx,
                                  Eigen::Index b_idx) {
    if (a_idx < 0 || b_idx >= grid.size() || a_idx > b_idx)
        throw std::invalid_argument("trapezoid_weights: bad segment");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(grid.size());
    for (Eigen::Index k = a_idx; k < b_idx; ++k) {
        const double half = 0.5 * (grid(k + 1) - grid(k));
        w(k) += half;
        w(k + 1) += half;
    }
    return w;
}

BanachValue bi1star_integral(const StochasticIntegrand& f, const Eigen::VectorXd& grid,
                             const Eigen::Ref<const Eigen::RowVectorXd>& w, Eigen::Index a_idx,
                             Eigen::Index b_idx) {
    if (a_idx < 0 || b_idx >= grid.size() || a_idx > b_idx)
        throw std::invalid_argument("bi1star_integral: endpoints off the grid");
    const Eigen::VectorXd tw = trapezoid_weights(grid, a_idx, b_idx);
    Eigen::VectorXd time_integral = Eigen::VectorXd::Zero(f.space.dim());
    for (Eigen::Index k = a_idx; k <= b_idx; ++k)
        time_integral += tw(k) * w(k) * f.derivative(grid(k)).coords;
    const Eigen::VectorXd boundary =
        w(b_idx) * f.value(grid(b_idx)).coords - w(a_idx) * f.value(grid(a_idx)).coords;
    return BanachValue(f.space, boundary - time_integral);
}

double ito_sum(const Eigen::VectorXd& r_at_grid, const Eigen::Ref<const Eigen::RowVectorXd>& w,
               Eigen::Index a_idx, Eigen::Index b_idx) {
    double acc = 0.0;
    for (Eigen::Index k = a_idx; k < b_idx; ++k) acc += r_at_grid(k) * (w(k + 1) - w(k));
    return acc;
}

namespace {

using StridedRowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

// Scalar by-parts integral s_k = g_k w_k - cumulative trapezoid of g' w,
// written for all k at once into a row.
void scalar_by_parts_row(const Eigen::VectorXd& g, const Eigen::VectorXd& gp,
                         const Eigen::VectorXd& grid, const Eigen::Ref<const Eigen::RowVectorXd>& w,
                         StridedRowRef out) {
    out(0) = g(0) * w(0);
    double cum = 0.0;
    for (Eigen::Index k = 0; k + 1 < grid.size(); ++k) {
        cum += 0.5 * (grid(k + 1) - grid(k)) * (gp(k) * w(k) + gp(k + 1) * w(k + 1));
        out(k + 1) = g(k + 1) * w(k + 1) - cum;
    }
}

}  // namespace

double check_weak_characterization(const StochasticIntegrand& f, const PathEnsemble& e,
                                   const std::vector<DualFunctional>& probes) {
    const IntegrandOnGrid sampled = sample_integrand(f, e.grid);
    const Eigen::Index K = e.steps();
    const Eigen::Index d = f.space.dim();
    const Eigen::Index M = e.paths();

    std::vector<double> path_gap(std::size_t(M), 0.0);
    parallel_for(std::size_t(M), [&](std::size_t i) {
        const auto w = e.values.row(Eigen::Index(i));
        // vector-valued cumulative by-parts integral
        Eigen::VectorXd cum = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd a(K + 1, d);
        a.row(0).setZero();
        for (Eigen::Index k = 0; k < K; ++k) {
            cum += 0.5 * (e.grid(k + 1) - e.grid(k)) *
                   (w(k) * sampled.derivs.row(k).transpose() +
                    w(k + 1) * sampled.derivs.row(k + 1).transpose());
            a.row(k + 1) = w(k + 1) * sampled.values.row(k + 1) - cum.transpose();
        }
        double gap = 0.0;
        for (const auto& probe : probes) {
            const Eigen::VectorXd g = sampled.values * probe.weights();
            const Eigen::VectorXd gp = sampled.derivs * probe.weights();
            Eigen::RowVectorXd s(K + 1);
            scalar_by_parts_row(g, gp, e.grid, w, StridedRowRef(s));
            const Eigen::VectorXd probed = a * probe.weights();
            gap = std::max(gap, (probed.transpose() - s).cwiseAbs().maxCoeff());
        }
        path_gap[i] = gap;
    });
    double gap = 0.0;
    for (double g : path_gap) gap = std::max(gap, g);
    return gap;
}

namespace {

// Per-probe scalar process of the by-parts stochastic integral over [0, t].
Process by_parts_process(const IntegrandOnGrid& sampled, const DualFunctional& probe,
                         const PathEnsemble& e) {
    const Eigen::Index M = e.paths();
    const Eigen::Index K = e.steps();
    const Eigen::VectorXd g = sampled.values * probe.weights();
    const Eigen::VectorXd gp = sampled.derivs * probe.weights();
    auto data = std::make_shared<Eigen::MatrixXd>(M, K + 1);
    parallel_for(std::size_t(M), [&](std::size_t i) {
        scalar_by_parts_row(g, gp, e.grid, e.values.row(Eigen::Index(i)),
                            StridedRowRef(data->row(Eigen::Index(i))));
    });
    return Process{grid_times(e.grid), [data](int k) -> Eigen::VectorXd { return data->col(k); }};
}

std::string probe_label(const DualFunctional& probe, std::size_t index) {
    (void)probe;
    return "probe" + std::to_string(index);
}

}  // namespace

ProbeMartingaleReport check_integral_martingale(const StochasticIntegrand& f, const PathEnsemble& e,
                                                int filtration_bins, double confidence,
                                                const std::vector<DualFunctional>& probes) {
    if (probes.empty()) throw std::invalid_argument("check_integral_martingale: need probes");
    const IntegrandOnGrid sampled = sample_integrand(f, e.grid);
    const VectorMeasure P = VectorMeasure::density_rank_one(
        DiscreteMeasureSpace::uniform(e.paths()), SpaceDescriptor::real(),
        Eigen::VectorXd::Ones(e.paths()), Eigen::VectorXd::Ones(1));
    const Process w = path_process(e, [](double, double x) { return x; });
    std::vector<int> indices(std::size_t(e.steps()) + 1);
    for (std::size_t k = 0; k < indices.size(); ++k) indices[k] = int(k);
    const Filtration F = Filtration::markov_binned(w, indices, filtration_bins);

    ProbeMartingaleReport report;
    const double sub_conf = 1.0 - (1.0 - confidence) / double(probes.size());
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const Process a = by_parts_process(sampled, probes[p], e);
        MartingaleReport r = martingale_test(a, P, F, sub_conf);
        report.pass = report.pass && r.pass;
        report.per_probe.emplace_back(probe_label(probes[p], p), std::move(r));
    }
    return report;
}

ChangeDriftReport change_drift(const DriftedProcess& p, const PathEnsemble& e, double confidence,
                               int filtration_bins, const std::vector<DualFunctional>& probes) {
    if (!p.factor) throw std::invalid_argument("change_drift: factorization Psi = r Phi not declared");
    if (probes.empty()) throw std::invalid_argument("change_drift: need probes");

    const Eigen::Index K = e.steps();
    const Eigen::Index M = e.paths();
    const Eigen::Index d = p.diffusion.space.dim();
    const IntegrandOnGrid sampled = sample_integrand(p.diffusion, e.grid);

    Eigen::VectorXd r(K + 1);
    for (Eigen::Index k = 0; k <= K; ++k) r(k) = p.factor(e.grid(k));

    ChangeDriftReport report;

    // stage 1: the factorization is exact on the grid
    for (Eigen::Index k = 0; k <= K; ++k) {
        const BanachValue psi = p.drift(e.grid(k));
        const Eigen::VectorXd expected = r(k) * sampled.values.row(k).transpose();
        report.factorization_residual = std::max(
            report.factorization_residual, space_norm(p.diffusion.space, psi.coords - expected));
    }
    if (report.factorization_residual > p.factorization_tol)
        throw std::invalid_argument("change_drift: declared factorization violated");

    // deterministic pieces: R = cumulative trapezoid of r, half_r2 of r^2
    Eigen::VectorXd R(K + 1), half_r2(K + 1);
    R(0) = 0.0;
    half_r2(0) = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
        const double dt = e.grid(k + 1) - e.grid(k);
        R(k + 1) = R(k) + 0.5 * dt * (r(k) + r(k + 1));
        half_r2(k + 1) = half_r2(k) + 0.25 * dt * (r(k) * r(k) + r(k + 1) * r(k + 1));
    }

    // stage 2: y from Ito sums, tested as a P-martingale
    auto y_data = std::make_shared<Eigen::MatrixXd>(M, K + 1);
    parallel_for(std::size_t(M), [&](std::size_t i) {
        const auto w = e.values.row(Eigen::Index(i));
        double ito = 0.0;
        (*y_data)(Eigen::Index(i), 0) = 1.0;
        for (Eigen::Index k = 0; k < K; ++k) {
            ito += r(k) * (w(k + 1) - w(k));
            (*y_data)(Eigen::Index(i), k + 1) = std::exp(-half_r2(k + 1) - ito);
        }
    });
    const Process y{grid_times(e.grid), [y_data](int k) -> Eigen::VectorXd { return y_data->col(k); }};

    const VectorMeasure P = VectorMeasure::density_rank_one(
        DiscreteMeasureSpace::uniform(M), SpaceDescriptor::real(), Eigen::VectorXd::Ones(M),
        Eigen::VectorXd::Ones(1));
    const Process w_proc = path_process(e, [](double, double x) { return x; });
    std::vector<int> indices(std::size_t(K) + 1);
    for (std::size_t k = 0; k < indices.size(); ++k) indices[k] = int(k);
    const Filtration F = Filtration::markov_binned(w_proc, indices, filtration_bins);

    const double sub_conf = 1.0 - (1.0 - confidence) / double(1 + probes.size());
    report.y_under_p = martingale_test(y, P, F, sub_conf);

    // stage 3: Q° from the terminal density
    const VectorMeasure Q = change_measure(P, y.column(int(K)));

    // stage 4: per-path identity between the integral against the shifted
    // path and the integral against the original path plus the drift part
    Eigen::VectorXd drift_part = Eigen::VectorXd::Zero(d);  // cumulative trapezoid of r*Phi
    Eigen::MatrixXd drift_cum(K + 1, d);
    drift_cum.row(0).setZero();
    for (Eigen::Index k = 0; k < K; ++k) {
        const double dt = e.grid(k + 1) - e.grid(k);
        drift_part += 0.5 * dt *
                      (r(k) * sampled.values.row(k).transpose() +
                       r(k + 1) * sampled.values.row(k + 1).transpose());
        drift_cum.row(k + 1) = drift_part.transpose();
    }
    std::vector<double> path_gap(std::size_t(M), 0.0);
    parallel_for(std::size_t(M), [&](std::size_t i) {
        const auto w = e.values.row(Eigen::Index(i));
        const Eigen::RowVectorXd w_shift = w + R.transpose();
        Eigen::VectorXd cum = Eigen::VectorXd::Zero(d), cum_shift = Eigen::VectorXd::Zero(d);
        double gap = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) {
            const double half = 0.5 * (e.grid(k + 1) - e.grid(k));
            cum += half * (w(k) * sampled.derivs.row(k).transpose() +
                           w(k + 1) * sampled.derivs.row(k + 1).transpose());
            cum_shift += half * (w_shift(k) * sampled.derivs.row(k).transpose() +
                                 w_shift(k + 1) * sampled.derivs.row(k + 1).transpose());
            const Eigen::VectorXd lhs =
                w_shift(k + 1) * sampled.values.row(k + 1).transpose() - cum_shift;
            const Eigen::VectorXd rhs = w(k + 1) * sampled.values.row(k + 1).transpose() - cum +
                                        drift_cum.row(k + 1).transpose();
            gap = std::max(gap, space_norm(p.diffusion.space, lhs - rhs));
        }
        path_gap[i] = gap;
    });
    for (double g : path_gap) report.pettis_gap = std::max(report.pettis_gap, g);

    // stage 5: C_t = drift integral + stochastic integral, under Q° per probe
    // (and under P as the negative control)
    for (std::size_t pi = 0; pi < probes.size(); ++pi) {
        const auto& probe = probes[pi];
        const Process a = by_parts_process(sampled, probe, e);
        const Eigen::VectorXd drift_probe = drift_cum * probe.weights();
        Process c{a.times, [a, drift_probe](int k) -> Eigen::VectorXd {
                      return a.column(k).array() + drift_probe(k);
                  }};
        MartingaleReport under_q = martingale_test(c, Q, F, sub_conf);
        MartingaleReport under_p = martingale_test(c, P, F, confidence);
        report.c_under_q.pass = report.c_under_q.pass && under_q.pass;
        report.c_under_p.pass = report.c_under_p.pass && under_p.pass;
        report.c_under_q.per_probe.emplace_back(probe_label(probe, pi), std::move(under_q));
        report.c_under_p.per_probe.emplace_back(probe_label(probe, pi), std::move(under_p));
    }

    report.pass = report.y_under_p.pass && report.pettis_gap <= 1e-8 && report.c_under_q.pass;
    return report;
}

}  // namespace birkhoff
