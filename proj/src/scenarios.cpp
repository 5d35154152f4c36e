#include "birkhoff/scenarios.hpp"

#include "birkhoff/instances.hpp"
#include "birkhoff/parallel.hpp"
#include "birkhoff/rng.hpp"
#include "birkhoff/stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace birkhoff::scenarios {

const std::vector<std::string> kScenarioNames = {
    "unit-oracles", "scalar-girsanov", "conditional-measure",
    "prop41",       "drift-change",    "bi1star-convergence"};

namespace {

std::uint64_t stream_of(const Config& cfg, std::string_view label) {
    return rng::substream(std::uint64_t(cfg.seed), label);
}

}  // namespace

Config merge(const Config& preferred, const Config& fallback) {
    Config out = fallback;
    if (!preferred.scenario.empty()) out.scenario = preferred.scenario;
    if (preferred.paths >= 0) out.paths = preferred.paths;
    if (preferred.grid >= 0) out.grid = preferred.grid;
    if (preferred.horizon >= 0.0) out.horizon = preferred.horizon;
    if (!std::isnan(preferred.q)) out.q = preferred.q;
    if (!preferred.r_spec.empty()) out.r_spec = preferred.r_spec;
    if (preferred.bins >= 0) out.bins = preferred.bins;
    if (preferred.filtration_bins >= 0) out.filtration_bins = preferred.filtration_bins;
    if (preferred.slots >= 0) out.slots = preferred.slots;
    if (preferred.confidence >= 0.0) out.confidence = preferred.confidence;
    if (preferred.seed >= 0) out.seed = preferred.seed;
    if (preferred.threads >= 0) out.threads = preferred.threads;
    if (!preferred.out_dir.empty()) out.out_dir = preferred.out_dir;
    return out;
}

Config config_from_json(const nlohmann::json& j) {
    Config c;
    if (j.contains("scenario")) c.scenario = j.at("scenario").get<std::string>();
    if (j.contains("paths")) c.paths = j.at("paths").get<Eigen::Index>();
    if (j.contains("grid")) c.grid = j.at("grid").get<int>();
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<double>();
    if (j.contains("q")) c.q = j.at("q").get<double>();
    if (j.contains("r_spec")) c.r_spec = j.at("r_spec").get<std::string>();
    if (j.contains("bins")) c.bins = j.at("bins").get<int>();
    if (j.contains("filtration_bins")) c.filtration_bins = j.at("filtration_bins").get<int>();
    if (j.contains("slots")) c.slots = j.at("slots").get<int>();
    if (j.contains("confidence")) c.confidence = j.at("confidence").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<long long>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    return c;
}

Config resolve(Config cfg) {
    bool known = false;
    for (const auto& name : kScenarioNames) known = known || name == cfg.scenario;
    if (!known) throw ConfigError("unknown scenario: '" + cfg.scenario + "'");

    Config d;  // defaults
    d.scenario = cfg.scenario;
    d.confidence = 0.99;
    d.seed = 7;
    d.threads = int(std::thread::hardware_concurrency());
    d.q = 1.0;
    d.bins = 16;
    d.filtration_bins = 32;
    d.slots = 64;
    if (cfg.scenario == "unit-oracles") {
        d.paths = 1;
        d.grid = 2;
        d.horizon = 1.0;
    } else if (cfg.scenario == "scalar-girsanov") {
        d.paths = 200000;
        d.grid = 64;
        d.horizon = 1.0;
    } else if (cfg.scenario == "conditional-measure") {
        d.paths = 50000;
        d.grid = 16;
        d.horizon = 1.0;
    } else if (cfg.scenario == "prop41") {
        d.paths = 200000;
        d.grid = 64;
        d.horizon = 1.0;
    } else if (cfg.scenario == "drift-change") {
        d.paths = 100000;
        d.grid = 32;
        d.horizon = 1.0;
        d.r_spec = "one";
        d.filtration_bins = 16;
    } else {  // bi1star-convergence
        d.paths = 10000;
        d.grid = 256;
        d.horizon = 1.0;
    }

    Config out = merge(cfg, d);
    if (out.paths < 1) throw ConfigError("paths must be >= 1");
    if (out.grid < 2) throw ConfigError("grid must be >= 2");
    if (!(out.horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (!(out.confidence > 0.0 && out.confidence < 1.0))
        throw ConfigError("confidence must be in (0,1)");
    if (out.bins < 1 || out.filtration_bins < 1) throw ConfigError("bins must be >= 1");
    if (out.slots < 1) throw ConfigError("slots must be >= 1");
    if (out.seed < 0) throw ConfigError("seed must be nonnegative");
    if (out.scenario == "drift-change" && out.r_spec != "one" && out.r_spec != "t")
        throw ConfigError("drift-change needs a declared factorization: --r-spec one|t");
    if (out.threads < 1) out.threads = 1;
    return out;
}

// ---- artifact writers -------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_martingale_csv(const std::string& path, const MartingaleReport& report) {
    std::ofstream out(path);
    out << "s,t,cell,residual,tolerance,pass\n";
    for (const auto& rec : report.per_cell)
        out << rec.s_index << ',' << rec.t_index << ',' << rec.cell << ','
            << format_double(rec.residual) << ',' << format_double(rec.tolerance) << ','
            << (rec.pass ? 1 : 0) << '\n';
}

void write_distribution_csv(const std::string& path, const DistributionReport& report) {
    std::ofstream out(path);
    out << "bin_left,bin_right,count_n,count_q,residual,tolerance,pass\n";
    for (const auto& row : report.bins)
        out << format_double(row.left) << ',' << format_double(row.right) << ',' << row.count_n
            << ',' << row.count_q << ',' << format_double(row.residual) << ','
            << format_double(row.tolerance) << ',' << (row.pass ? 1 : 0) << '\n';
}

void write_density_csv(const std::string& path, const VectorDensityEstimate& d) {
    std::ofstream out(path);
    const Eigen::Index dim = d.bin_mass.target().dim();
    out << "bin_left,bin_right";
    for (Eigen::Index j = 0; j < dim; ++j) out << ",component_" << j;
    out << '\n';
    for (Eigen::Index b = 0; b + 1 < d.edges.size(); ++b) {
        out << format_double(d.edges(b)) << ',' << format_double(d.edges(b + 1));
        const BanachValue v = d.density_value(b);
        for (Eigen::Index j = 0; j < dim; ++j) out << ',' << format_double(v.coords(j));
        out << '\n';
    }
}

void write_g_ratio_csv(const std::string& path, const DensityRatioEstimate& g,
                       const Eigen::VectorXd& reference) {
    std::ofstream out(path);
    out << "bin_left,bin_right,center,count_num,count_den,ghat,reference,valid\n";
    for (Eigen::Index b = 0; b + 1 < g.edges.size(); ++b)
        out << format_double(g.edges(b)) << ',' << format_double(g.edges(b + 1)) << ','
            << format_double(g.center(b)) << ',' << g.count_num(b) << ',' << g.count_den(b) << ','
            << format_double(g.ghat(b)) << ',' << format_double(reference(b)) << ','
            << int(g.valid[std::size_t(b)]) << '\n';
}

void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& rows) {
    std::ofstream out(path);
    out << "K,rms_gap,weak_gap\n";
    for (const auto& row : rows)
        out << row.grid_steps << ',' << format_double(row.rms_gap) << ','
            << format_double(row.weak_gap) << '\n';
}

namespace {

StageSummary summarize(const std::string& name, const MartingaleReport& r, bool expected_pass) {
    StageSummary s;
    s.name = name;
    s.pass = r.pass;
    s.expected_pass = expected_pass;
    s.worst_residual = r.worst_residual;
    double tol = 0.0, worst = 0.0;
    for (const auto& rec : r.per_cell) {
        const double ratio = rec.residual / rec.tolerance;
        if (ratio >= worst) {
            worst = ratio;
            tol = rec.tolerance;
        }
    }
    s.tolerance = tol;
    return s;
}

std::string time_label(double t) {
    std::string s = format_double(t);
    for (auto& ch : s)
        if (ch == '.') ch = 'p';
    return s;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&tt));
    return buf;
}

nlohmann::ordered_json header_json(const Config& cfg) {
    nlohmann::ordered_json h;
    h["scenario"] = cfg.scenario;
    h["timestamp"] = iso_timestamp();
    h["seed"] = cfg.seed;
    h["paths"] = cfg.paths;
    h["grid"] = cfg.grid;
    h["horizon"] = cfg.horizon;
    h["q"] = cfg.q;
    h["r_spec"] = cfg.r_spec;
    h["bins"] = cfg.bins;
    h["filtration_bins"] = cfg.filtration_bins;
    h["slots"] = cfg.slots;
    h["confidence"] = cfg.confidence;
    return h;
}

nlohmann::ordered_json stages_json(const std::vector<StageSummary>& stages) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : stages) {
        nlohmann::ordered_json j;
        j["name"] = s.name;
        j["pass"] = s.pass;
        j["expected_pass"] = s.expected_pass;
        j["worst_residual"] = s.worst_residual;
        j["tolerance"] = s.tolerance;
        arr.push_back(std::move(j));
    }
    return arr;
}

struct ArtifactSink {
    std::string dir;
    std::vector<std::string> written;

    bool enabled() const { return !dir.empty(); }
    std::string path(const std::string& name) {
        written.push_back(name);
        return dir + "/" + name;
    }
};

ScenarioOutcome finish(const Config& cfg, std::vector<StageSummary> stages, ArtifactSink& sink) {
    ScenarioOutcome out;
    out.pass = true;
    for (const auto& s : stages) out.pass = out.pass && s.ok();
    out.stages = std::move(stages);
    out.summary["header"] = header_json(cfg);
    out.summary["stages"] = stages_json(out.stages);
    out.summary["pass"] = out.pass;
    if (sink.enabled()) {
        std::ofstream js(sink.path("summary.json"));
        js << out.summary.dump(2) << '\n';
    }
    out.files_written = sink.written;
    return out;
}

// plain per-atom reference sum, independent of the measure kernels
Eigen::VectorXd plain_weighted_sum(const Eigen::MatrixXd& values, const Eigen::VectorXd& weights,
                                   const Eigen::VectorXd& phi) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(values.cols());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        const double w = weights(i) * (phi.size() ? phi(i) : 1.0);
        for (Eigen::Index j = 0; j < values.cols(); ++j) acc(j) += w * values(i, j);
    }
    return acc;
}

}  // namespace

// ---- unit-oracles -----------------------------------------------------------

namespace {

struct TagCheck {
    double excess = 0.0;          // normalized deviation beyond the oscillation
    double trace_increase = 0.0;  // max increase along the refinement trace
    long draws = 0;
};

// 100 random tag draws per result plus the trace monotonicity check.
void check_certificate(const BirkhoffResult& res, std::mt19937_64& eng,
                       const std::function<BanachValue(const TaggedPartition&)>& tagged_sum,
                       TagCheck& agg) {
    const double scale = 1.0 + norm(res.value);
    for (int draw = 0; draw < 100; ++draw) {
        std::vector<AtomIndex> tags;
        tags.reserve(res.partition_used.cell_count());
        for (const auto& cell : res.partition_used.cells())
            tags.push_back(cell[std::size_t(eng() % cell.size())]);
        const BanachValue s = tagged_sum(TaggedPartition(res.partition_used, std::move(tags)));
        const double dev = norm(s - res.value);
        agg.excess = std::max(agg.excess, (dev - res.oscillation) / scale);
        agg.draws += 1;
    }
    for (std::size_t k = 0; k + 1 < res.trace.size(); ++k)
        agg.trace_increase = std::max(agg.trace_increase, res.trace[k + 1] - res.trace[k]);
}

}  // namespace

UnitOraclesResult run_unit_oracles(const Config& cfg) {
    UnitOraclesResult result;
    TagCheck tags;

    // criterion 1: bi1/bi2 against the exact atom sums, 200 instances
    {
        const std::uint64_t stream = stream_of(cfg, "oracle-bi");
        for (int idx = 0; idx < 200; ++idx) {
            const RandomInstance inst = random_instance(stream, idx, 256);
            auto eng = rng::engine(stream, std::uint64_t(idx) + 1000000);
            const double tol = std::pow(10.0, -1.0 - 5.0 * rng::uniform01(eng));

            const BirkhoffResult r1 =
                bi1_integrate(inst.base, inst.target, inst.values, tol);
            const Eigen::VectorXd oracle1 =
                plain_weighted_sum(inst.values, inst.base.weights(), Eigen::VectorXd());
            const double gap1 = space_norm(inst.target, r1.value.coords - oracle1) /
                                (1.0 + space_norm(inst.target, oracle1));
            result.bi_max_rel_gap = std::max(result.bi_max_rel_gap, gap1);
            result.gap_rows.push_back({double(idx), gap1});
            result.gap_row_family.push_back("bi1");
            check_certificate(
                r1, eng,
                [&](const TaggedPartition& tp) {
                    return bi1_tagged_sum(inst.base, inst.target, inst.values, tp);
                },
                tags);

            // alternate the two measure realizations
            const VectorMeasure N =
                idx % 2 == 0 ? VectorMeasure::density(inst.base, inst.target, inst.values)
                             : VectorMeasure::tabulated(inst.base, inst.target, inst.values);
            const BirkhoffResult r2 = bi2_integrate(inst.phi, N, tol);
            const Eigen::VectorXd oracle2 =
                idx % 2 == 0
                    ? plain_weighted_sum(inst.values, inst.base.weights(), inst.phi)
                    : plain_weighted_sum(inst.values, Eigen::VectorXd::Ones(inst.phi.size()),
                                         inst.phi);
            const double gap2 = space_norm(inst.target, r2.value.coords - oracle2) /
                                (1.0 + space_norm(inst.target, oracle2));
            result.bi_max_rel_gap = std::max(result.bi_max_rel_gap, gap2);
            result.gap_rows.push_back({double(idx), gap2});
            result.gap_row_family.push_back("bi2");
            check_certificate(
                r2, eng, [&](const TaggedPartition& tp) { return bi2_tagged_sum(inst.phi, N, tp); },
                tags);
            result.bi_instances += 2;
        }
    }

    // criterion 2: the duality identity, 100 instances
    {
        const std::uint64_t stream = stream_of(cfg, "oracle-duality");
        for (int idx = 0; idx < 100; ++idx) {
            const RandomInstance inst = random_instance(stream, idx, 256);
            auto eng = rng::engine(stream, std::uint64_t(idx) + 1000000);
            const DualityReport rep =
                check_duality(inst.base, inst.target, inst.phi, inst.values, 1e-3);
            const double rel = rep.gap / (1.0 + norm(rep.lhs.value));
            result.duality_max_rel_gap = std::max(result.duality_max_rel_gap, rel);
            result.gap_rows.push_back({double(idx), rel});
            result.gap_row_family.push_back("duality");
            const VectorMeasure N = VectorMeasure::density(inst.base, inst.target, inst.values);
            check_certificate(
                rep.rhs, eng,
                [&](const TaggedPartition& tp) { return bi2_tagged_sum(inst.phi, N, tp); }, tags);
        }
    }

    // criterion 3: substitution with exact binning, 100 instances
    {
        const std::uint64_t stream = stream_of(cfg, "oracle-substitution");
        for (int idx = 0; idx < 100; ++idx) {
            RandomInstance inst = random_instance(stream, idx, 256);
            auto eng = rng::engine(stream, std::uint64_t(idx) + 1000000);
            const int n_distinct = 1 + int(eng() % 16);
            inst.phi = random_discrete_phi(eng, inst.base.atom_count(), n_distinct);
            const Eigen::VectorXd edges = exact_edges_for(inst.phi);
            const VectorMeasure N =
                idx % 2 == 0 ? VectorMeasure::density(inst.base, inst.target, inst.values)
                             : VectorMeasure::tabulated(inst.base, inst.target, inst.values);
            std::function<double(double)> psi;
            switch (idx % 3) {
                case 0: psi = [](double x) { return x * x; }; break;
                case 1: psi = [](double x) { return std::abs(x); }; break;
                default: psi = [](double x) { return x; }; break;
            }
            const SubstitutionReport rep = check_substitution(psi, inst.phi, N, edges, 1e-3);
            result.substitution_max_gap = std::max(result.substitution_max_gap, rep.gap);
            result.binning_modulus_max = std::max(result.binning_modulus_max, rep.binning_modulus);
            result.gap_rows.push_back({double(idx), rep.gap});
            result.gap_row_family.push_back("substitution");
            Eigen::VectorXd psi_phi(inst.phi.size());
            for (Eigen::Index i = 0; i < inst.phi.size(); ++i) psi_phi(i) = psi(inst.phi(i));
            check_certificate(
                rep.lhs, eng,
                [&](const TaggedPartition& tp) { return bi2_tagged_sum(psi_phi, N, tp); }, tags);
        }
    }

    // criterion 4: conditioning suite on nested partitions, 100 instances
    {
        const std::uint64_t stream = stream_of(cfg, "oracle-conditioning");
        for (int idx = 0; idx < 100; ++idx) {
            const RandomInstance inst = random_instance(stream, idx, 64);
            auto eng = rng::engine(stream, std::uint64_t(idx) + 1000000);
            auto [F, G] = random_nested_partitions(eng, AtomIndex(inst.base.atom_count()));

            const Eigen::MatrixXd cond =
                conditional_expectation(inst.base, inst.target, inst.values, F);
            double defining = 0.0;
            for (const auto& cell : F.cells()) {
                Eigen::VectorXd a = Eigen::VectorXd::Zero(inst.target.dim());
                Eigen::VectorXd b = Eigen::VectorXd::Zero(inst.target.dim());
                for (AtomIndex i : cell) {
                    a += inst.base.weights()(i) * cond.row(i).transpose();
                    b += inst.base.weights()(i) * inst.values.row(i).transpose();
                }
                defining = std::max(defining, space_norm(inst.target, a - b));
            }
            result.defining_identity_max = std::max(result.defining_identity_max, defining);
            result.gap_rows.push_back({double(idx), defining});
            result.gap_row_family.push_back("defining-identity");

            const double tower = check_tower(inst.base, inst.target, inst.values, F, G);
            result.tower_max = std::max(result.tower_max, tower);
            result.gap_rows.push_back({double(idx), tower});
            result.gap_row_family.push_back("tower");

            Eigen::VectorXd phi_f(inst.base.atom_count());
            for (const auto& cell : F.cells()) {
                const double level = -2.0 + 4.0 * rng::uniform01(eng);
                for (AtomIndex i : cell) phi_f(i) = level;
            }
            const double pull = check_pullout(inst.base, inst.target, inst.values, phi_f, F);
            result.pullout_max = std::max(result.pullout_max, pull);
            result.gap_rows.push_back({double(idx), pull});
            result.gap_row_family.push_back("pullout");
        }
    }

    result.tag_excess_max = tags.excess;
    result.trace_increase_max = tags.trace_increase;
    result.tag_draws = tags.draws;
    result.pass = result.bi_max_rel_gap <= 1e-12 && result.duality_max_rel_gap <= 1e-12 &&
                  result.substitution_max_gap <= 1e-12 && result.binning_modulus_max == 0.0 &&
                  result.defining_identity_max <= 1e-12 && result.tower_max <= 1e-12 &&
                  result.pullout_max <= 1e-12 && result.tag_excess_max <= 1e-12 &&
                  result.trace_increase_max <= 1e-12;
    return result;
}

// ---- scalar-girsanov --------------------------------------------------------

namespace {

std::vector<int> all_time_indices(int steps) {
    std::vector<int> idx(std::size_t(steps) + 1);
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = int(k);
    return idx;
}

// z-test that the Bi2 integral of z_t over Omega vanishes (da1a3.a's "null
// integral", testable for the scalar BM).
StageSummary null_integral_stage(const GirsanovSetup& setup, const std::vector<int>& t_indices,
                                 double confidence) {
    StageSummary s;
    s.name = "null-integral";
    s.pass = true;
    const auto* rv = std::get_if<VectorMeasure::RankOneValues>(&setup.N.values());
    if (rv == nullptr) throw std::logic_error("null_integral_stage expects a rank-one measure");
    const AtomSet everything = all_atoms(AtomIndex(setup.N.base().atom_count()));
    const double alpha = (1.0 - confidence) / double(t_indices.size());
    double worst_ratio = 0.0;
    for (int t_idx : t_indices) {
        const Eigen::VectorXd a = setup.z.column(t_idx).cwiseProduct(rv->coeff);
        const CellZeroTest cell =
            cell_zero_test_rank_one(a, rv->direction, setup.N.base().weights(), everything);
        const double residual = cell.residual(setup.N.target());
        const double tol =
            std::max(stats::gaussian_norm_bound(setup.N.target(), cell.tau, alpha), 1e-10);
        s.worst_residual = std::max(s.worst_residual, residual);
        if (residual / tol > worst_ratio) {
            worst_ratio = residual / tol;
            s.tolerance = tol;
        }
        if (residual > tol) s.pass = false;
    }
    return s;
}

}  // namespace

ScalarGirsanovResult run_scalar_girsanov(const Config& cfg) {
    ScalarGirsanovResult result;
    const Eigen::VectorXd grid = uniform_grid(cfg.grid, cfg.horizon);
    const PathEnsemble e = simulate_bm(cfg.paths, grid, stream_of(cfg, "scalar-girsanov"));
    const GirsanovSetup setup = make_bm_girsanov_setup(e, cfg.q);
    const Filtration F =
        Filtration::markov_binned(setup.z_shift, all_time_indices(cfg.grid), cfg.filtration_bins);

    const int k4 = cfg.grid / 4, k2 = cfg.grid / 2, kT = cfg.grid;
    result.null_integral = null_integral_stage(setup, {k2, kT}, cfg.confidence);
    result.girsanov = girsanov_verify(setup, F, cfg.confidence);
    result.negative_control = martingale_test(setup.z_shift, setup.N, F, cfg.confidence);

    // distribution preservation at three times, confidence split across them
    const std::vector<int> dist_indices = {k4, k2, kT};
    const double dist_conf = 1.0 - (1.0 - cfg.confidence) / double(dist_indices.size());
    bool dist_pass = true;
    for (int t_idx : dist_indices) {
        const double t = grid(t_idx);
        const Eigen::VectorXd z = setup.z.column(t_idx);
        const Eigen::VectorXd zt = setup.z_shift.column(t_idx);
        Eigen::VectorXd both(2 * z.size());
        both << z, zt;
        const Eigen::VectorXd edges = quantile_edges(both, 2 * cfg.bins);
        DistributionReport rep =
            check_distribution_preservation(setup.N, setup.Q, z, zt, edges, dist_conf);
        dist_pass = dist_pass && rep.pass;
        result.distribution.emplace_back(t, std::move(rep));
    }

    // g-ratio versus the closed form on central bins
    result.g_pass = true;
    const DualFunctional probe = DualFunctional::default_probe(setup.N.target());
    for (int t_idx : dist_indices) {
        const double t = grid(t_idx);
        const Eigen::VectorXd z = setup.z.column(t_idx);
        const Eigen::VectorXd zt = setup.z_shift.column(t_idx);
        Eigen::VectorXd both(2 * z.size());
        both << z, zt;
        const Eigen::VectorXd edges = quantile_edges(both, cfg.bins);

        result.density_n.emplace_back(t, estimate_density(setup.N, z, edges));
        result.density_shifted.emplace_back(t, estimate_density(setup.N, zt, edges));

        DensityRatioEstimate ratio =
            density_ratio_estimate(z, cfg.q * t, edges, setup.N, probe, 50);
        const Eigen::VectorXd reference = bin_weighted_average(
            [&](double x) { return setup.g(t, x); }, zt, setup.N.probe_increments(probe), edges);
        bool any_central = false;
        for (Eigen::Index b = 0; b < ratio.ghat.size(); ++b) {
            if (!ratio.valid[std::size_t(b)] || !std::isfinite(reference(b))) continue;
            if (std::abs(ratio.center(b)) > 2.0 * std::sqrt(t)) continue;
            any_central = true;
            const double rel = std::abs(ratio.ghat(b) - reference(b)) / std::abs(reference(b));
            result.g_worst_rel_err = std::max(result.g_worst_rel_err, rel);
            if (rel > 0.05) result.g_pass = false;
        }
        if (!any_central) result.g_pass = false;
        result.g_by_time.emplace_back(t, std::move(ratio));
        result.g_reference.emplace_back(t, reference);
    }

    result.pass = result.null_integral.pass && result.girsanov.pass && dist_pass &&
                  result.g_pass && !result.negative_control.pass;
    return result;
}

// ---- conditional-measure ----------------------------------------------------

ConditionalMeasureResult run_conditional_measure(const Config& cfg) {
    ConditionalMeasureResult result;
    const Eigen::VectorXd post_grid = uniform_grid(cfg.grid, cfg.horizon);
    const ConditionalMeasureModel model = build_conditional_measure(
        cfg.slots, cfg.paths, post_grid, cfg.horizon, cfg.q, stream_of(cfg, "conditional-measure"));
    const GirsanovSetup setup = make_conditional_girsanov_setup(model);
    const Filtration F =
        Filtration::markov_binned(setup.z_shift, all_time_indices(cfg.grid), cfg.filtration_bins);
    result.girsanov = girsanov_verify(setup, F, cfg.confidence);
    result.negative_control = martingale_test(setup.z_shift, setup.N, F, cfg.confidence);
    result.pass = result.girsanov.pass && !result.negative_control.pass;
    return result;
}

// ---- prop41 ------------------------------------------------------------------

Prop41Report run_prop41(const Config& cfg) {
    const Eigen::VectorXd grid = uniform_grid(cfg.grid, cfg.horizon);
    const PathEnsemble e = simulate_bm(cfg.paths, grid, stream_of(cfg, "prop41"));
    const std::vector<double> g_times = {cfg.horizon / 4.0, cfg.horizon / 2.0, cfg.horizon};
    return prop41_verify(e, cfg.confidence, cfg.bins, cfg.filtration_bins, g_times, 0.05);
}

// ---- bi1star convergence ------------------------------------------------------

ConvergenceResult run_bi1star_convergence(const Config& cfg) {
    ConvergenceResult result;
    const StochasticIntegrand f = StochasticIntegrand::closed_form(
        SpaceDescriptor::real(),
        [](double t) { return BanachValue(SpaceDescriptor::real(), Eigen::VectorXd::Constant(1, t)); },
        [](double) { return BanachValue(SpaceDescriptor::real(), Eigen::VectorXd::Ones(1)); });
    const std::vector<DualFunctional> probes = {DualFunctional::identity()};

    for (int K : {256, 1024, 4096}) {
        const Eigen::VectorXd grid = uniform_grid(K, cfg.horizon);
        const PathEnsemble e =
            simulate_bm(cfg.paths, grid, stream_of(cfg, "bi1star-K" + std::to_string(K)));
        Eigen::VectorXd r(K + 1);
        for (int k = 0; k <= K; ++k) r(k) = grid(k);

        std::vector<double> sq(std::size_t(cfg.paths), 0.0);
        parallel_for(std::size_t(cfg.paths), [&](std::size_t i) {
            const BanachValue lhs = bi1star_integral(f, grid, e.values.row(Eigen::Index(i)), 0, K);
            const double rhs = ito_sum(r, e.values.row(Eigen::Index(i)), 0, K);
            const double gap = lhs.coords(0) - rhs;
            sq[i] = gap * gap;
        });
        double mean_sq = 0.0;
        for (double v : sq) mean_sq += v;
        mean_sq /= double(cfg.paths);

        ConvergenceRow row;
        row.grid_steps = K;
        row.rms_gap = std::sqrt(mean_sq);
        row.weak_gap = check_weak_characterization(f, e, probes);
        result.rows.push_back(row);
    }

    result.pass = true;
    for (std::size_t k = 0; k < result.rows.size(); ++k) {
        const auto& row = result.rows[k];
        if (!std::isfinite(row.rms_gap) || row.weak_gap > 1e-10) result.pass = false;
        if (k > 0 && row.rms_gap >= result.rows[k - 1].rms_gap) result.pass = false;
    }
    if (result.rows.back().rms_gap > 1e-2) result.pass = false;
    return result;
}

// ---- drift-change --------------------------------------------------------------

DriftChangeResult run_drift_change(const Config& cfg) {
    const Eigen::VectorXd grid = uniform_grid(cfg.grid, cfg.horizon);
    const PathEnsemble e = simulate_bm(cfg.paths, grid, stream_of(cfg, "drift-change"));

    const SpaceDescriptor space = SpaceDescriptor::finite_dim(2);
    Eigen::VectorXd x0(2);
    x0 << 1.0, -0.5;
    const StochasticIntegrand diffusion = StochasticIntegrand::closed_form(
        space, [space, x0](double t) { return BanachValue(space, (1.0 + t) * x0); },
        [space, x0](double) { return BanachValue(space, x0); });

    std::function<double(double)> r;
    if (cfg.r_spec == "one")
        r = [](double) { return 1.0; };
    else
        r = [](double t) { return t; };

    DriftedProcess p{diffusion,
                     [space, x0, r](double t) { return BanachValue(space, r(t) * (1.0 + t) * x0); },
                     r, 1e-10};
    const std::vector<DualFunctional> probes = {DualFunctional::coordinate(space, 0),
                                                DualFunctional::coordinate(space, 1)};

    DriftChangeResult result;
    result.report = change_drift(p, e, cfg.confidence, cfg.filtration_bins, probes);
    result.negative_control_failed = !result.report.c_under_p.pass;
    result.pass = result.report.pass && result.negative_control_failed;
    return result;
}

// ---- dispatcher ------------------------------------------------------------------

ScenarioOutcome run_scenario(const Config& raw) {
    const Config cfg = resolve(raw);
    worker_threads() = cfg.threads;

    ArtifactSink sink;
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        sink.dir = cfg.out_dir;
    }
    std::vector<StageSummary> stages;

    if (cfg.scenario == "unit-oracles") {
        const UnitOraclesResult r = run_unit_oracles(cfg);
        auto gap_stage = [](const std::string& name, double gap, double tol) {
            StageSummary s;
            s.name = name;
            s.pass = gap <= tol;
            s.worst_residual = gap;
            s.tolerance = tol;
            return s;
        };
        stages.push_back(gap_stage("bi-oracle", r.bi_max_rel_gap, 1e-12));
        stages.push_back(gap_stage("duality", r.duality_max_rel_gap, 1e-12));
        stages.push_back(gap_stage("substitution", r.substitution_max_gap, 1e-12));
        stages.push_back(gap_stage("defining-identity", r.defining_identity_max, 1e-12));
        stages.push_back(gap_stage("tower", r.tower_max, 1e-12));
        stages.push_back(gap_stage("pullout", r.pullout_max, 1e-12));
        stages.push_back(gap_stage("tag-certificate", r.tag_excess_max, 1e-12));
        stages.push_back(gap_stage("trace-monotone", r.trace_increase_max, 1e-12));
        if (sink.enabled()) {
            std::ofstream out(sink.path("gaps.csv"));
            out << "family,index,gap\n";
            for (std::size_t k = 0; k < r.gap_rows.size(); ++k)
                out << r.gap_row_family[k] << ',' << int(r.gap_rows[k][0]) << ','
                    << format_double(r.gap_rows[k][1]) << '\n';
        }
        return finish(cfg, std::move(stages), sink);
    }

    if (cfg.scenario == "scalar-girsanov") {
        const ScalarGirsanovResult r = run_scalar_girsanov(cfg);
        stages.push_back(r.null_integral);
        stages.push_back(summarize("y-martingale", r.girsanov.y_under_n, true));
        stages.push_back(summarize("product-martingale", r.girsanov.zy_under_n, true));
        stages.push_back(summarize("shifted-under-q", r.girsanov.zshift_under_q, true));
        for (const auto& [t, rep] : r.distribution) {
            StageSummary s;
            s.name = "distribution-t" + time_label(t);
            s.pass = rep.pass;
            s.worst_residual = rep.distance;
            double tol = 0.0;
            for (const auto& row : rep.bins) tol = std::max(tol, row.tolerance);
            s.tolerance = tol;
            stages.push_back(s);
        }
        {
            StageSummary s;
            s.name = "g-ratio";
            s.pass = r.g_pass;
            s.worst_residual = r.g_worst_rel_err;
            s.tolerance = 0.05;
            stages.push_back(s);
        }
        stages.push_back(summarize("negative-control", r.negative_control, false));
        if (sink.enabled()) {
            write_martingale_csv(sink.path("martingale_y-martingale.csv"), r.girsanov.y_under_n);
            write_martingale_csv(sink.path("martingale_product-martingale.csv"),
                                 r.girsanov.zy_under_n);
            write_martingale_csv(sink.path("martingale_shifted-under-q.csv"),
                                 r.girsanov.zshift_under_q);
            write_martingale_csv(sink.path("martingale_negative-control.csv"), r.negative_control);
            for (const auto& [t, rep] : r.distribution)
                write_distribution_csv(sink.path("distribution_" + time_label(t) + ".csv"), rep);
            for (std::size_t k = 0; k < r.density_n.size(); ++k) {
                write_density_csv(sink.path("density_" + time_label(r.density_n[k].first) + ".csv"),
                                  r.density_n[k].second);
                write_density_csv(
                    sink.path("density_shifted_" + time_label(r.density_shifted[k].first) + ".csv"),
                    r.density_shifted[k].second);
                write_g_ratio_csv(sink.path("g_ratio_" + time_label(r.g_by_time[k].first) + ".csv"),
                                  r.g_by_time[k].second, r.g_reference[k].second);
            }
        }
        return finish(cfg, std::move(stages), sink);
    }

    if (cfg.scenario == "conditional-measure") {
        const ConditionalMeasureResult r = run_conditional_measure(cfg);
        stages.push_back(summarize("y-martingale", r.girsanov.y_under_n, true));
        stages.push_back(summarize("product-martingale", r.girsanov.zy_under_n, true));
        stages.push_back(summarize("shifted-under-q", r.girsanov.zshift_under_q, true));
        stages.push_back(summarize("negative-control", r.negative_control, false));
        if (sink.enabled()) {
            write_martingale_csv(sink.path("martingale_y-martingale.csv"), r.girsanov.y_under_n);
            write_martingale_csv(sink.path("martingale_product-martingale.csv"),
                                 r.girsanov.zy_under_n);
            write_martingale_csv(sink.path("martingale_shifted-under-q.csv"),
                                 r.girsanov.zshift_under_q);
            write_martingale_csv(sink.path("martingale_negative-control.csv"), r.negative_control);
        }
        return finish(cfg, std::move(stages), sink);
    }

    if (cfg.scenario == "prop41") {
        const Prop41Report r = run_prop41(cfg);
        {
            StageSummary s;
            s.name = "g-ratio";
            s.pass = r.g_pass;
            s.worst_residual = r.g_worst_rel_err;
            s.tolerance = 0.05;
            stages.push_back(s);
        }
        {
            StageSummary s;
            s.name = r.phi_conditional.name;
            s.pass = r.phi_conditional.pass;
            s.worst_residual = r.phi_conditional.worst_residual;
            s.tolerance = r.phi_conditional.worst_ratio > 0.0
                              ? r.phi_conditional.worst_residual / r.phi_conditional.worst_ratio
                              : 0.0;
            stages.push_back(s);
        }
        stages.push_back(summarize("y-martingale", r.y_mart, true));
        stages.push_back(summarize("product-martingale", r.zy_mart, true));
        stages.push_back(summarize("shifted-under-q", r.final_mart, true));
        stages.push_back(summarize("negative-control", r.negative_control, false));
        if (sink.enabled()) {
            write_martingale_csv(sink.path("martingale_y-martingale.csv"), r.y_mart);
            write_martingale_csv(sink.path("martingale_product-martingale.csv"), r.zy_mart);
            write_martingale_csv(sink.path("martingale_shifted-under-q.csv"), r.final_mart);
            write_martingale_csv(sink.path("martingale_negative-control.csv"), r.negative_control);
            for (std::size_t k = 0; k < r.density_n.size(); ++k) {
                write_density_csv(sink.path("density_" + time_label(r.density_n[k].first) + ".csv"),
                                  r.density_n[k].second);
                write_density_csv(
                    sink.path("density_shifted_" + time_label(r.density_shifted[k].first) + ".csv"),
                    r.density_shifted[k].second);
                write_g_ratio_csv(sink.path("g_ratio_" + time_label(r.g_by_time[k].first) + ".csv"),
                                  r.g_by_time[k].second, r.g_reference[k].second);
            }
        }
        return finish(cfg, std::move(stages), sink);
    }

    if (cfg.scenario == "drift-change") {
        const DriftChangeResult r = run_drift_change(cfg);
        auto gap_stage = [](const std::string& name, double gap, double tol) {
            StageSummary s;
            s.name = name;
            s.pass = gap <= tol;
            s.worst_residual = gap;
            s.tolerance = tol;
            return s;
        };
        stages.push_back(gap_stage("factorization", r.report.factorization_residual, 1e-10));
        stages.push_back(summarize("y-martingale", r.report.y_under_p, true));
        stages.push_back(gap_stage("shifted-integral-identity", r.report.pettis_gap, 1e-8));
        for (const auto& [name, rep] : r.report.c_under_q.per_probe)
            stages.push_back(summarize("c-under-q-" + name, rep, true));
        for (const auto& [name, rep] : r.report.c_under_p.per_probe)
            stages.push_back(summarize("c-under-p-" + name, rep, false));
        if (sink.enabled()) {
            write_martingale_csv(sink.path("martingale_y-martingale.csv"), r.report.y_under_p);
            for (const auto& [name, rep] : r.report.c_under_q.per_probe)
                write_martingale_csv(sink.path("martingale_c-under-q-" + name + ".csv"), rep);
            for (const auto& [name, rep] : r.report.c_under_p.per_probe)
                write_martingale_csv(sink.path("martingale_c-under-p-" + name + ".csv"), rep);
        }
        return finish(cfg, std::move(stages), sink);
    }

    // bi1star-convergence
    const ConvergenceResult r = run_bi1star_convergence(cfg);
    {
        StageSummary s;
        s.name = "ito-oracle-convergence";
        s.pass = r.pass;
        s.worst_residual = r.rows.empty() ? 0.0 : r.rows.back().rms_gap;
        s.tolerance = 1e-2;
        stages.push_back(s);
        StageSummary w;
        w.name = "weak-characterization";
        double worst = 0.0;
        for (const auto& row : r.rows) worst = std::max(worst, row.weak_gap);
        w.pass = worst <= 1e-10;
        w.worst_residual = worst;
        w.tolerance = 1e-10;
        stages.push_back(w);
    }
    if (sink.enabled()) write_convergence_csv(sink.path("convergence.csv"), r.rows);
    return finish(cfg, std::move(stages), sink);
}

}  // namespace birkhoff::scenarios
