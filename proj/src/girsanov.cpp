#include "birkhoff/girsanov.hpp"

#include "birkhoff/parallel.hpp"
#include "birkhoff/rng.hpp"
#include "birkhoff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace birkhoff {

Process path_process(const PathEnsemble& e, std::function<double(double, double)> f) {
    const Eigen::MatrixXd* values = &e.values;
    const Eigen::VectorXd* grid = &e.grid;
    return Process{grid_times(e.grid), [values, grid, f = std::move(f)](int k) -> Eigen::VectorXd {
                       const double t = (*grid)(k);
                       Eigen::VectorXd out(values->rows());
                       for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = f(t, (*values)(i, k));
                       return out;
                   }};
}

Process shifted_process(const Process& z, std::function<double(double)> theta) {
    return Process{z.times, [z, theta = std::move(theta)](int k) -> Eigen::VectorXd {
                       return z.column(k).array() + theta(z.times.at(std::size_t(k)));
                   }};
}

Process product_process(const Process& a, const Process& b) {
    return Process{a.times, [a, b](int k) -> Eigen::VectorXd {
                       return a.column(k).cwiseProduct(b.column(k));
                   }};
}

VectorMeasure change_measure(const VectorMeasure& N, const Eigen::VectorXd& y_T) {
    if (y_T.size() != N.base().atom_count())
        throw std::invalid_argument("change_measure: density length must equal atom count");
    for (Eigen::Index i = 0; i < y_T.size(); ++i) {
        if (y_T(i) > 0.0) continue;
        AtomSet one{AtomIndex(i)};
        if (N.variation_of(one) > 0.0)
            throw std::domain_error("change_measure: density must be positive on atoms carrying mass");
    }
    return N.scaled_by(y_T);
}

VectorDensityEstimate estimate_density(const VectorMeasure& N, const Eigen::VectorXd& z_col,
                                       const Eigen::VectorXd& edges) {
    InducedMeasure img = induced_measure(N, z_col, edges);
    Eigen::VectorXi counts(Eigen::Index(img.preimages.size()));
    for (Eigen::Index b = 0; b < counts.size(); ++b)
        counts(b) = int(img.preimages[std::size_t(b)].size());
    return VectorDensityEstimate{edges, std::move(img.measure), std::move(counts)};
}

DensityRatioEstimate density_ratio_estimate(const Eigen::VectorXd& z_col, double theta_t,
                                            const Eigen::VectorXd& edges, const VectorMeasure& N,
                                            const DualFunctional& probe, int min_count) {
    const Eigen::Index nb = edges.size() - 1;
    const Eigen::Index n = z_col.size();
    if (n != N.base().atom_count())
        throw std::invalid_argument("density_ratio_estimate: sample length mismatch");

    const Eigen::VectorXd mass = N.probe_increments(probe);
    Eigen::VectorXd num = Eigen::VectorXd::Zero(nb), den = Eigen::VectorXd::Zero(nb),
                    den_x = Eigen::VectorXd::Zero(nb);
    Eigen::VectorXi cnum = Eigen::VectorXi::Zero(nb), cden = Eigen::VectorXi::Zero(nb);

    // samples outside the window are ignored: this is a histogram estimate on
    // the given edges
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = z_col(i);
        if (x >= edges(0) && x <= edges(nb)) {
            const Eigen::Index b = bin_index(edges, x);
            num(b) += mass(i);
            cnum(b) += 1;
        }
        const double xs = x + theta_t;
        if (xs >= edges(0) && xs <= edges(nb)) {
            const Eigen::Index b = bin_index(edges, xs);
            den(b) += mass(i);
            den_x(b) += xs * mass(i);
            cden(b) += 1;
        }
    }

    DensityRatioEstimate out;
    out.edges = edges;
    out.ghat = Eigen::VectorXd::Constant(nb, std::numeric_limits<double>::quiet_NaN());
    out.center = Eigen::VectorXd::Constant(nb, std::numeric_limits<double>::quiet_NaN());
    out.count_num = cnum;
    out.count_den = cden;
    out.valid.assign(std::size_t(nb), 0);
    bool any = false;
    for (Eigen::Index b = 0; b < nb; ++b) {
        if (cnum(b) < min_count || cden(b) < min_count || den(b) == 0.0) continue;
        out.ghat(b) = num(b) / den(b);
        out.center(b) = den_x(b) / den(b);
        out.valid[std::size_t(b)] = 1;
        any = true;
    }
    if (!any) throw std::runtime_error("density_ratio_estimate: all bins excluded by the count filter");
    return out;
}

Eigen::VectorXd bin_weighted_average(const std::function<double(double)>& f,
                                     const Eigen::VectorXd& samples,
                                     const Eigen::VectorXd& sample_weight,
                                     const Eigen::VectorXd& edges) {
    const Eigen::Index nb = edges.size() - 1;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(nb), wsum = Eigen::VectorXd::Zero(nb);
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        const double x = samples(i);
        if (x < edges(0) || x > edges(nb)) continue;
        const Eigen::Index b = bin_index(edges, x);
        acc(b) += f(x) * sample_weight(i);
        wsum(b) += sample_weight(i);
    }
    Eigen::VectorXd out = Eigen::VectorXd::Constant(nb, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index b = 0; b < nb; ++b)
        if (wsum(b) != 0.0) out(b) = acc(b) / wsum(b);
    return out;
}

namespace {

// Density-direction coefficient (increment / base weight) for the scalar
// storages; throws for null-weight atoms that still carry mass.
Eigen::VectorXd direction_coeff(const VectorMeasure& N, const Eigen::VectorXd& coeff) {
    const Eigen::VectorXd& nu = N.base().weights();
    if (N.kind() == VectorMeasure::Kind::Density) return coeff;
    Eigen::VectorXd out(coeff.size());
    for (Eigen::Index i = 0; i < coeff.size(); ++i) {
        if (nu(i) > 0.0) {
            out(i) = coeff(i) / nu(i);
        } else if (coeff(i) != 0.0) {
            throw std::invalid_argument("distribution check: increment on a null atom");
        } else {
            out(i) = 0.0;
        }
    }
    return out;
}

}  // namespace

DistributionReport check_distribution_preservation(const VectorMeasure& N, const VectorMeasure& Q,
                                                   const Eigen::VectorXd& z_col,
                                                   const Eigen::VectorXd& zt_col,
                                                   const Eigen::VectorXd& edges, double confidence) {
    if (N.values().index() != Q.values().index())
        throw std::invalid_argument("distribution check: N and Q must share storage shape");
    if (N.target() != Q.target())
        throw std::invalid_argument("distribution check: N and Q must share the target space");
    const Eigen::Index n = N.base().atom_count();
    const Eigen::Index nb = edges.size() - 1;
    const Eigen::Index d = N.target().dim();
    const Eigen::VectorXd& nu = N.base().weights();

    std::vector<Eigen::Index> bz(std::size_t(n)), bq(std::size_t(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        bz[std::size_t(i)] = bin_index(edges, z_col(i));
        bq[std::size_t(i)] = bin_index(edges, zt_col(i));
    }

    double msq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) msq += nu(i) * nu(i);

    // single pass: an atom touches at most two bins
    Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(nb, d), s2 = Eigen::MatrixXd::Zero(nb, d),
                    sw = Eigen::MatrixXd::Zero(nb, d);
    Eigen::VectorXi count_n = Eigen::VectorXi::Zero(nb), count_q = Eigen::VectorXi::Zero(nb);

    auto scatter = [&](Eigen::Index atom, Eigen::Index bin, const Eigen::RowVectorXd& u) {
        s1.row(bin) += u;
        s2.row(bin) += u.cwiseAbs2();
        sw.row(bin) += nu(atom) * u;
    };

    if (const auto* rvn = std::get_if<VectorMeasure::RankOneValues>(&N.values())) {
        const auto& rvq = std::get<VectorMeasure::RankOneValues>(Q.values());
        const Eigen::VectorXd cn = direction_coeff(N, rvn->coeff);
        const Eigen::VectorXd cq = direction_coeff(Q, rvq.coeff);
        const Eigen::RowVectorXd dir = rvn->direction.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            count_n(bz[std::size_t(i)]) += 1;
            count_q(bq[std::size_t(i)]) += 1;
            if (bz[std::size_t(i)] == bq[std::size_t(i)]) {
                scatter(i, bz[std::size_t(i)], (cn(i) - cq(i)) * dir);
            } else {
                scatter(i, bz[std::size_t(i)], cn(i) * dir);
                scatter(i, bq[std::size_t(i)], -cq(i) * dir);
            }
        }
    } else if (const auto* svn = std::get_if<VectorMeasure::SlotValues>(&N.values())) {
        const auto& svq = std::get<VectorMeasure::SlotValues>(Q.values());
        const Eigen::VectorXd cn = direction_coeff(N, svn->coeff);
        const Eigen::VectorXd cq = direction_coeff(Q, svq.coeff);
        for (Eigen::Index i = 0; i < n; ++i) {
            count_n(bz[std::size_t(i)]) += 1;
            count_q(bq[std::size_t(i)]) += 1;
            const Eigen::Index j = svn->slot[std::size_t(i)];
            Eigen::RowVectorXd u = Eigen::RowVectorXd::Zero(d);
            if (bz[std::size_t(i)] == bq[std::size_t(i)]) {
                u(j) = cn(i) - cq(i);
                scatter(i, bz[std::size_t(i)], u);
            } else {
                u(j) = cn(i);
                scatter(i, bz[std::size_t(i)], u);
                u(j) = -cq(i);
                scatter(i, bq[std::size_t(i)], u);
            }
        }
    } else {
        const auto& dvn = std::get<VectorMeasure::DenseValues>(N.values());
        const auto& dvq = std::get<VectorMeasure::DenseValues>(Q.values());
        for (Eigen::Index i = 0; i < n; ++i) {
            count_n(bz[std::size_t(i)]) += 1;
            count_q(bq[std::size_t(i)]) += 1;
            const double fn = N.kind() == VectorMeasure::Kind::Density ? 1.0 : (nu(i) > 0.0 ? 1.0 / nu(i) : 0.0);
            const double fq = Q.kind() == VectorMeasure::Kind::Density ? 1.0 : (nu(i) > 0.0 ? 1.0 / nu(i) : 0.0);
            const Eigen::RowVectorXd un = fn * dvn.rows.row(i);
            const Eigen::RowVectorXd uq = fq * dvq.rows.row(i);
            if (bz[std::size_t(i)] == bq[std::size_t(i)]) {
                scatter(i, bz[std::size_t(i)], un - uq);
            } else {
                scatter(i, bz[std::size_t(i)], un);
                scatter(i, bq[std::size_t(i)], -uq);
            }
        }
    }

    DistributionReport report;
    const double alpha = (1.0 - confidence) / double(nb);
    for (Eigen::Index b = 0; b < nb; ++b) {
        Eigen::VectorXd tau(d);
        for (Eigen::Index j = 0; j < d; ++j) {
            const double var = (s2(b, j) - s1(b, j) * s1(b, j) / double(n)) / double(n - 1);
            tau(j) = var > 0.0 ? std::sqrt(var) * std::sqrt(msq) : 0.0;
        }
        DistributionBinRow row;
        row.left = edges(b);
        row.right = edges(b + 1);
        row.count_n = count_n(b);
        row.count_q = count_q(b);
        row.residual = space_norm(N.target(), sw.row(b).transpose());
        row.tolerance = std::max(stats::gaussian_norm_bound(N.target(), tau, alpha), 1e-10);
        row.pass = row.residual <= row.tolerance;
        report.distance = std::max(report.distance, row.residual);
        report.pass = report.pass && row.pass;
        report.bins.push_back(row);
    }
    return report;
}

GirsanovSetup make_bm_girsanov_setup(const PathEnsemble& e, double q) {
    GirsanovSetup s{
        path_process(e, [](double, double w) { return w; }),
        [q](double t) { return q * t; },
        [q](double t, double x) { return bm_density_ratio(q, t, x); },
        path_process(e, [q](double t, double w) { return w + q * t; }),
        path_process(e, [q](double t, double w) { return std::exp(-q * w - 0.5 * q * q * t); }),
        VectorMeasure::density_rank_one(DiscreteMeasureSpace::uniform(e.paths()),
                                        SpaceDescriptor::real(), Eigen::VectorXd::Ones(e.paths()),
                                        Eigen::VectorXd::Ones(1)),
        VectorMeasure::density_rank_one(DiscreteMeasureSpace::uniform(e.paths()),
                                        SpaceDescriptor::real(), Eigen::VectorXd::Ones(e.paths()),
                                        Eigen::VectorXd::Ones(1)),
        int(e.steps())};
    s.Q = change_measure(s.N, s.y.column(s.terminal_index));
    return s;
}

GirsanovReport girsanov_verify(const GirsanovSetup& setup, const Filtration& F, double confidence) {
    const double sub_conf = 1.0 - (1.0 - confidence) / 3.0;
    GirsanovReport report;
    report.y_under_n = martingale_test(setup.y, setup.N, F, sub_conf);
    report.zy_under_n =
        martingale_test(product_process(setup.z_shift, setup.y), setup.N, F, sub_conf);
    report.zshift_under_q = martingale_test(setup.z_shift, setup.Q, F, sub_conf);
    report.pass = report.y_under_n.pass && report.zy_under_n.pass && report.zshift_under_q.pass;
    if (!report.y_under_n.pass)
        report.failed_assumption = "density-martingale";
    else if (!report.zy_under_n.pass)
        report.failed_assumption = "product-martingale";
    else if (!report.zshift_under_q.pass)
        report.failed_assumption = "shifted-process-under-Q";
    return report;
}

double phi_functional(const Eigen::VectorXd& grid, const Eigen::Ref<const Eigen::RowVectorXd>& w_path,
                      Eigen::Index tau_idx, Eigen::Index t_idx) {
    if (tau_idx < 0 || tau_idx >= grid.size() || t_idx < 0 || t_idx >= grid.size())
        throw std::invalid_argument("phi_functional: index off the grid");
    const double tau = grid(tau_idx), t = grid(t_idx);
    if (t <= tau) return std::exp(-w_path(tau_idx) - 0.5 * tau);
    return std::exp(-w_path(t_idx) - 0.5 * t);
}

Eigen::VectorXd phi_row(const Eigen::VectorXd& grid, const Eigen::Ref<const Eigen::RowVectorXd>& w_path,
                        Eigen::Index t_idx) {
    Eigen::VectorXd out(grid.size());
    const double past = std::exp(-w_path(t_idx) - 0.5 * grid(t_idx));
    for (Eigen::Index tau = 0; tau < grid.size(); ++tau)
        out(tau) = grid(t_idx) <= grid(tau) ? std::exp(-w_path(tau) - 0.5 * grid(tau)) : past;
    return out;
}

VectorMeasure build_ncirc(const PathEnsemble& e) {
    const Eigen::Index K = e.steps();
    const double T = e.horizon();
    Eigen::VectorXd coeff(e.paths());
    for (Eigen::Index i = 0; i < e.paths(); ++i) coeff(i) = std::exp(-e.values(i, K) - 0.5 * T);
    return VectorMeasure::density_rank_one(DiscreteMeasureSpace::uniform(e.paths()),
                                           SpaceDescriptor::grid_function(e.grid), std::move(coeff),
                                           Eigen::VectorXd::Ones(K + 1));
}

StageOutcome check_phi_conditional(const PathEnsemble& e,
                                   const std::vector<std::pair<int, int>>& index_pairs, int bins,
                                   double confidence) {
    const Eigen::Index M = e.paths();
    const Eigen::Index d = e.grid.size();
    const SpaceDescriptor space = SpaceDescriptor::grid_function(e.grid);
    const double m = 1.0 / double(M);
    const double msq_root = std::sqrt(double(M)) * m;

    struct Rec {
        double residual;
        Eigen::VectorXd tau;
    };
    std::vector<Rec> records;

    for (const auto& [s_idx, t_idx] : index_pairs) {
        if (s_idx > t_idx) throw std::invalid_argument("phi conditional check: need s <= t");
        const Eigen::VectorXd ws = e.values.col(s_idx);
        const Partition part = sigma_of(ws, quantile_edges(ws, bins));
        const double s_time = e.grid(s_idx);

        std::vector<Rec> cell_recs(part.cell_count());
        parallel_for(part.cell_count(), [&](std::size_t c) {
            const auto& cell = part.cells()[c];
            Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d), s2 = Eigen::VectorXd::Zero(d),
                            swsum = Eigen::VectorXd::Zero(d);
            for (AtomIndex i : cell) {
                const Eigen::VectorXd u =
                    phi_row(e.grid, e.values.row(i), t_idx).array() -
                    std::exp(-e.values(i, s_idx) - 0.5 * s_time);
                s1 += u;
                s2 += u.cwiseAbs2();
                swsum += m * u;
            }
            const Eigen::Index cnt = Eigen::Index(cell.size());
            Eigen::VectorXd tau = Eigen::VectorXd::Zero(d);
            if (cnt >= 2) {
                for (Eigen::Index j = 0; j < d; ++j) {
                    const double var = (s2(j) - s1(j) * s1(j) / double(cnt)) / double(cnt - 1);
                    tau(j) = var > 0.0 ? std::sqrt(var) * std::sqrt(double(cnt)) * m : 0.0;
                }
            }
            cell_recs[c] = Rec{space_norm(space, swsum), std::move(tau)};
        });
        for (auto& r : cell_recs) records.push_back(std::move(r));
    }

    StageOutcome out;
    out.name = "phi-conditional";
    out.pass = true;
    const double alpha = (1.0 - confidence) / double(std::max<std::size_t>(1, records.size()));
    for (const auto& r : records) {
        const double tol = std::max(stats::gaussian_norm_bound(space, r.tau, alpha), 1e-10);
        out.worst_residual = std::max(out.worst_residual, r.residual);
        out.worst_ratio = std::max(out.worst_ratio, r.residual / tol);
        out.pass = out.pass && r.residual <= tol;
    }
    return out;
}

Prop41Report prop41_verify(const PathEnsemble& e, double confidence, int density_bins,
                           int filtration_bins, const std::vector<double>& g_times,
                           double g_rel_tol) {
    Prop41Report report;
    const VectorMeasure ncirc = build_ncirc(e);
    const SpaceDescriptor space = SpaceDescriptor::grid_function(e.grid);
    const DualFunctional probe = DualFunctional::grid_point(space, 0);
    const double T = e.horizon();
    const Eigen::Index K = e.steps();

    // stage 1 + 2: densities of w_t and w_t + t under N°, ratio vs closed form
    report.g_pass = true;
    for (double t : g_times) {
        const Eigen::Index t_idx = grid_index_of(e.grid, t);
        const Eigen::VectorXd z = e.values.col(t_idx);
        const Eigen::VectorXd zt = z.array() + t;
        Eigen::VectorXd both(2 * z.size());
        both << z, zt;
        const Eigen::VectorXd edges = quantile_edges(both, density_bins);

        report.density_n.emplace_back(t, estimate_density(ncirc, z, edges));
        report.density_shifted.emplace_back(t, estimate_density(ncirc, zt, edges));

        DensityRatioEstimate ratio = density_ratio_estimate(z, t, edges, ncirc, probe, 50);
        const Eigen::VectorXd reference = bin_weighted_average(
            [t](double x) { return ncirc_density_ratio(t, x); }, zt, ncirc.probe_increments(probe),
            edges);

        bool any_central = false;
        for (Eigen::Index b = 0; b < ratio.ghat.size(); ++b) {
            if (!ratio.valid[std::size_t(b)]) continue;
            if (std::abs(ratio.center(b)) > 2.0 * std::sqrt(t)) continue;
            if (!std::isfinite(reference(b))) continue;
            any_central = true;
            const double rel = std::abs(ratio.ghat(b) - reference(b)) / std::abs(reference(b));
            report.g_worst_rel_err = std::max(report.g_worst_rel_err, rel);
            if (rel > g_rel_tol) report.g_pass = false;
        }
        if (!any_central) report.g_pass = false;
        report.g_by_time.emplace_back(t, std::move(ratio));
        report.g_reference.emplace_back(t, reference);
    }

    // four statistical pass-stages share the confidence budget
    const double sub_conf = 1.0 - (1.0 - confidence) / 4.0;

    // stage 2b: E(Phi(., t) | F_s) = exp(-w_s - s/2)
    report.phi_conditional = check_phi_conditional(
        e, {{int(K / 4), int(K / 2)}, {int(K / 2), int(K)}}, filtration_bins, sub_conf);

    const Process w = path_process(e, [](double, double x) { return x; });
    const Process w_shift = path_process(e, [](double t, double x) { return x + t; });
    const Process y = path_process(e, [](double t, double x) { return std::exp(-1.5 * t - x); });

    std::vector<int> all_indices(std::size_t(K) + 1);
    for (std::size_t k = 0; k < all_indices.size(); ++k) all_indices[k] = int(k);
    const Filtration F = Filtration::markov_binned(w, all_indices, filtration_bins);

    // stages 3-5
    report.y_mart = martingale_test(y, ncirc, F, sub_conf);
    report.zy_mart = martingale_test(product_process(w_shift, y), ncirc, F, sub_conf);
    const VectorMeasure Q = change_measure(ncirc, y.column(int(K)));
    report.final_mart = martingale_test(w_shift, Q, F, sub_conf);

    // negative control: w is NOT an N°-martingale
    report.negative_control = martingale_test(w, ncirc, F, confidence);

    report.pass = report.g_pass && report.phi_conditional.pass && report.y_mart.pass &&
                  report.zy_mart.pass && report.final_mart.pass && !report.negative_control.pass;
    (void)T;
    return report;
}

ConditionalMeasureModel build_conditional_measure(Eigen::Index slots, Eigen::Index paths,
                                                  const Eigen::VectorXd& post_grid, double horizon_T,
                                                  double q, std::uint64_t seed) {
    if (slots < 1 || paths < 1) throw std::invalid_argument("conditional measure: bad sizes");
    if (!(horizon_T > 0.0)) throw std::invalid_argument("conditional measure: horizon must be positive");

    // M_T draws of w_T, the L1 coordinate slots
    auto slot_values = std::make_shared<Eigen::VectorXd>(slots);
    {
        auto eng = rng::engine(rng::substream(seed, "conditional-slots"), 0);
        rng::fill_standard_normals(eng, *slot_values);
        *slot_values *= std::sqrt(horizon_T);
    }
    // M independent post-T increment paths, shared across slots
    PathEnsemble post = simulate_bm(paths, post_grid, rng::substream(seed, "conditional-post"));
    auto post_values = std::make_shared<Eigen::MatrixXd>(post.values);
    auto times = grid_times(post.grid);

    const Eigen::Index n = slots * paths;
    DiscreteMeasureSpace base(Eigen::VectorXd::Constant(n, 1.0 / double(n)));
    std::vector<std::int32_t> slot_of(std::size_t(n));
    for (Eigen::Index j = 0; j < slots; ++j)
        for (Eigen::Index i = 0; i < paths; ++i) slot_of[std::size_t(j * paths + i)] = std::int32_t(j);
    VectorMeasure N = VectorMeasure::density_slots(std::move(base),
                                                   SpaceDescriptor::sample_function(slots),
                                                   std::move(slot_of),
                                                   Eigen::VectorXd::Constant(n, double(slots)));

    const Eigen::Index m = paths;
    Process z{times, [slot_values, post_values, m](int k) -> Eigen::VectorXd {
                  const Eigen::Index ns = slot_values->size() * m;
                  Eigen::VectorXd out(ns);
                  for (Eigen::Index a = 0; a < ns; ++a)
                      out(a) = (*slot_values)(a / m) + (*post_values)(a % m, k);
                  return out;
              }};
    Process z_shift{times, [slot_values, post_values, m, q, times](int k) -> Eigen::VectorXd {
                        const double t = times[std::size_t(k)];
                        const Eigen::Index ns = slot_values->size() * m;
                        Eigen::VectorXd out(ns);
                        for (Eigen::Index a = 0; a < ns; ++a)
                            out(a) = (*slot_values)(a / m) + (*post_values)(a % m, k) + q * t;
                        return out;
                    }};
    Process y{times, [slot_values, post_values, m, q, times](int k) -> Eigen::VectorXd {
                  const double t = times[std::size_t(k)];
                  const Eigen::Index ns = slot_values->size() * m;
                  Eigen::VectorXd out(ns);
                  for (Eigen::Index a = 0; a < ns; ++a)
                      out(a) = std::exp(-q * (*post_values)(a % m, k) - 0.5 * q * q * t);
                  return out;
              }};

    return ConditionalMeasureModel{*slot_values, std::move(post), q,       std::move(N),
                                   std::move(z), std::move(z_shift), std::move(y)};
}

GirsanovSetup make_conditional_girsanov_setup(const ConditionalMeasureModel& model) {
    const double q = model.q;
    const int terminal = int(model.post.steps());
    GirsanovSetup s{model.z,
                    [q](double t) { return q * t; },
                    // ratio in the slot-relative coordinate u = x - w_T
                    [q](double t, double u) { return std::exp(0.5 * q * q * t - q * u); },
                    model.z_shift,
                    model.y,
                    model.N,
                    model.N,
                    terminal};
    s.Q = change_measure(s.N, s.y.column(terminal));
    return s;
}

}  // namespace birkhoff
