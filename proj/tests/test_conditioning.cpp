#include <doctest.h>

#include "birkhoff/conditioning.hpp"
#include "birkhoff/instances.hpp"
#include "birkhoff/rng.hpp"
#include "oracles.hpp"

using namespace birkhoff;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(Eigen::Index(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("sigma_of preimages") {
    // phi constant -> trivial partition
    CHECK(sigma_of(Eigen::VectorXd::Constant(4, 0.3), vec({0, 1})) == Partition::trivial(4));
    // phi injective with singleton bins -> atoms
    CHECK(sigma_of(vec({0.1, 1.1, 2.1, 3.1}), vec({0, 1, 2, 3, 4})) == Partition::atoms(4));
    // phi(omega_i) = i mod 2 -> parity classes
    CHECK(sigma_of(vec({0, 1, 0, 1}), vec({-0.5, 0.5, 1.5})) == Partition(4, {{0, 2}, {1, 3}}));
    CHECK_THROWS_AS(sigma_of(vec({0, 9}), vec({0, 1})), std::out_of_range);
}

TEST_CASE("conditional expectation examples") {
    const auto real = SpaceDescriptor::real();
    DiscreteMeasureSpace base(vec({0.25, 0.25, 0.25, 0.25}));
    Eigen::MatrixXd values(4, 1);
    values << 1, 3, 5, 7;

    // F = {Omega}: the mean everywhere
    const Eigen::MatrixXd mean = conditional_expectation(base, real, values, Partition::trivial(4));
    CHECK(mean.col(0).isApprox(Eigen::VectorXd::Constant(4, 4.0), 1e-14));

    // F = atoms: the function itself
    const Eigen::MatrixXd self = conditional_expectation(base, real, values, Partition::atoms(4));
    CHECK(self.isApprox(values, 1e-14));

    // pairwise cells
    const Eigen::MatrixXd halves =
        conditional_expectation(base, real, values, Partition(4, {{0, 1}, {2, 3}}));
    CHECK(halves.col(0).isApprox(vec({2, 2, 6, 6}), 1e-14));

    // null cells get zero
    DiscreteMeasureSpace with_null(vec({0.5, 0.5, 0.0, 0.0}));
    const Eigen::MatrixXd z =
        conditional_expectation(with_null, real, values, Partition(4, {{0, 1}, {2, 3}}));
    CHECK(z(2, 0) == 0.0);
    CHECK(z(3, 0) == 0.0);
}

TEST_CASE("conditioning properties on random instances") {
    const std::uint64_t stream = rng::substream(13, "conditioning");
    for (int idx = 0; idx < 60; ++idx) {
        const RandomInstance inst = random_instance(stream, idx, 64);
        auto eng = rng::engine(stream, std::uint64_t(idx));
        auto [F, G] = random_nested_partitions(eng, AtomIndex(inst.base.atom_count()));

        const Eigen::MatrixXd cond = conditional_expectation(inst.base, inst.target, inst.values, F);
        // matches the independent cell-average oracle
        CHECK(cond.isApprox(oracle::cell_average(inst.values, inst.base.weights(), F), 1e-12));

        // defining identity per cell
        for (const auto& cell : F.cells()) {
            const BanachValue a = bi1_exact(inst.base, inst.target, cond, cell);
            const BanachValue b = bi1_exact(inst.base, inst.target, inst.values, cell);
            CHECK(norm(a - b) <= 1e-12 * (1.0 + norm(b)));
        }

        // tower property: G finer than F
        CHECK(check_tower(inst.base, inst.target, inst.values, F, G) <= 1e-12);

        // pull-out with an F-measurable factor
        Eigen::VectorXd phi_f(inst.base.atom_count());
        for (const auto& cell : F.cells()) {
            const double level = eng() % 2 == 0 ? 2.0 : -1.0;
            for (AtomIndex i : cell) phi_f(i) = level;
        }
        CHECK(check_pullout(inst.base, inst.target, inst.values, phi_f, F) <= 1e-12);

        // linearity in Phi
        Eigen::MatrixXd other(inst.values.rows(), inst.values.cols());
        for (Eigen::Index i = 0; i < other.size(); ++i)
            other.data()[i] = rng::standard_normal(eng);
        const Eigen::MatrixXd lin =
            conditional_expectation(inst.base, inst.target, inst.values + 2.0 * other, F);
        const Eigen::MatrixXd parts =
            cond + 2.0 * conditional_expectation(inst.base, inst.target, other, F);
        CHECK(lin.isApprox(parts, 1e-12));

        // contraction: cell averages stay inside the cell's norm range
        for (const auto& cell : F.cells()) {
            double max_norm = 0.0;
            for (AtomIndex i : cell)
                max_norm =
                    std::max(max_norm, space_norm(inst.target, inst.values.row(i).transpose()));
            for (AtomIndex i : cell)
                CHECK(space_norm(inst.target, cond.row(i).transpose()) <= max_norm + 1e-12);
        }
    }
}

TEST_CASE("tower and pullout preconditions") {
    DiscreteMeasureSpace base(vec({0.25, 0.25, 0.25, 0.25}));
    const auto real = SpaceDescriptor::real();
    Eigen::MatrixXd values(4, 1);
    values << 1, 2, 3, 4;
    const Partition F(4, {{0, 1}, {2, 3}});
    const Partition H(4, {{0, 2}, {1, 3}});  // not nested with F
    CHECK_THROWS_AS(check_tower(base, real, values, F, H), std::invalid_argument);
    // tower with F == G reduces to a no-op
    CHECK(check_tower(base, real, values, F, F) <= 1e-12);
    CHECK_THROWS_AS(check_pullout(base, real, values, vec({1, 2, 1, 1}), F),
                    std::invalid_argument);
    // phi == 0 and phi == 1 are exact
    CHECK(check_pullout(base, real, values, Eigen::VectorXd::Zero(4), F) == 0.0);
    CHECK(check_pullout(base, real, values, Eigen::VectorXd::Ones(4), F) <= 1e-12);
}

TEST_CASE("filtration construction") {
    std::vector<Partition> nested{Partition::trivial(4), Partition(4, {{0, 1}, {2, 3}}),
                                  Partition::atoms(4)};
    const Filtration f = Filtration::nested({0.0, 0.5, 1.0}, {0, 1, 2}, nested);
    CHECK(f.levels() == 3);
    CHECK(f.partition_at(1) == Partition(4, {{0, 1}, {2, 3}}));

    std::vector<Partition> broken{Partition::atoms(4), Partition::trivial(4)};
    CHECK_THROWS_AS(Filtration::nested({0.0, 1.0}, {0, 1}, broken), std::invalid_argument);

    // markov-binned partitions come from sigma(z_t)
    Eigen::MatrixXd cols(6, 2);
    cols << 0, 0, 0, 1, 0, 2, 0, 3, 0, 4, 0, 5;
    const Process z = Process::from_matrix({0.0, 1.0}, cols);
    const Filtration mb = Filtration::markov_binned(z, {0, 1}, 2);
    CHECK(mb.partition_at(0) == Partition::trivial(6));  // z_0 constant
    CHECK(mb.partition_at(1).cell_count() == 2);
}

TEST_CASE("martingale test: exact instances") {
    const Eigen::Index n = 16;
    DiscreteMeasureSpace base(Eigen::VectorXd::Constant(n, 1.0 / double(n)));
    const VectorMeasure P = VectorMeasure::density_rank_one(
        base, SpaceDescriptor::real(), Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(1));

    Eigen::VectorXd state(n);
    for (Eigen::Index i = 0; i < n; ++i) state(i) = double(i % 4);

    // constant process passes
    Eigen::MatrixXd cols(n, 3);
    cols.col(0) = state;
    cols.col(1) = state;
    cols.col(2) = state;
    const Process constant = Process::from_matrix({0.0, 0.5, 1.0}, cols);
    const Filtration F = Filtration::markov_binned(constant, {0, 1, 2}, 4);
    const MartingaleReport ok = martingale_test(constant, P, F, 0.99);
    CHECK(ok.pass);
    CHECK(ok.worst_residual <= 1e-12);

    // deterministic drift x_t = t fails: residual is |t - s| * nu(E)
    Eigen::MatrixXd drift(n, 3);
    drift.col(0).setZero();
    drift.col(1).setConstant(0.5);
    drift.col(2).setConstant(1.0);
    const Process drifting = Process::from_matrix({0.0, 0.5, 1.0}, drift);
    const MartingaleReport bad = martingale_test(drifting, P, F, 0.99);
    CHECK(!bad.pass);
    for (const auto& rec : bad.per_cell) {
        const double expected = 0.5 * base.mass_of(F.partition_at(0).cells()[std::size_t(rec.cell)]);
        // every pair has |t-s| = 0.5; cells are the same on both levels here
        CHECK(rec.residual == doctest::Approx(expected).epsilon(1e-10));
    }

    CHECK_THROWS_AS(
        martingale_test(constant, P, Filtration::markov_binned(constant, {0}, 4), 0.99),
        std::invalid_argument);
}

TEST_CASE("martingale test tolerances scale like the CLT") {
    // fair coin-flip increments: passes at 99%
    const Eigen::Index n = 20000;
    auto eng = rng::engine(rng::substream(13, "clt"), 0);
    DiscreteMeasureSpace base(Eigen::VectorXd::Constant(n, 1.0 / double(n)));
    const VectorMeasure P = VectorMeasure::density_rank_one(
        base, SpaceDescriptor::real(), Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(1));
    Eigen::MatrixXd cols(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        cols(i, 0) = rng::standard_normal(eng);
        cols(i, 1) = cols(i, 0) + rng::standard_normal(eng);
    }
    const Process x = Process::from_matrix({0.0, 1.0}, cols);
    const Filtration F = Filtration::markov_binned(x, {0, 1}, 8);
    const MartingaleReport rep = martingale_test(x, P, F, 0.99);
    CHECK(rep.pass);
    CHECK(rep.worst_ratio > 0.0);  // statistical, not vacuous
}
