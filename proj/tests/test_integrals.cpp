#include <doctest.h>

#include "birkhoff/instances.hpp"
#include "birkhoff/integrals.hpp"
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

TEST_CASE("oscillation bound basics") {
    const auto real = SpaceDescriptor::real();
    // constant integrand: zero for any partition
    Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(4, 1, 2.5);
    const Eigen::VectorXd w = vec({0.1, 0.2, 0.3, 0.4});
    CHECK(oscillation_bound(real, constant, w, Partition::trivial(4)) == 0.0);
    CHECK(oscillation_bound(real, constant, w, Partition(4, {{0, 2}, {1, 3}})) == 0.0);
    // singleton cells: zero
    Eigen::MatrixXd any(4, 1);
    any << 1, -2, 3, 0;
    CHECK(oscillation_bound(real, any, w, Partition::atoms(4)) == 0.0);
    // two atoms, one cell, diameter 1, mass 1
    Eigen::MatrixXd f(2, 1);
    f << 0, 1;
    CHECK(oscillation_bound(real, f, vec({0.5, 0.5}), Partition::trivial(2)) ==
          doctest::Approx(1.0));
}

TEST_CASE("bi1 integration: constants and unit vectors") {
    const auto real = SpaceDescriptor::real();
    DiscreteMeasureSpace p(vec({0.25, 0.25, 0.25, 0.25}));
    const BirkhoffResult constant =
        bi1_integrate(p, real, Eigen::MatrixXd::Constant(4, 1, 3.0), 1e-9);
    CHECK(constant.value.coords(0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(constant.oscillation == 0.0);

    const BirkhoffResult zero_case = bi1_integrate(p, real, Eigen::MatrixXd::Zero(4, 1), 1e-9);
    CHECK(norm(zero_case.value) == 0.0);

    DiscreteMeasureSpace base(vec({0.1, 0.2, 0.3, 0.4}));
    const BirkhoffResult unit = bi1_integrate(base, SpaceDescriptor::finite_dim(4),
                                              Eigen::MatrixXd::Identity(4, 4), 1e-9);
    CHECK(unit.value.coords.isApprox(vec({0.1, 0.2, 0.3, 0.4}), 1e-14));
    CHECK_THROWS_AS(bi1_integrate(base, real, Eigen::MatrixXd::Zero(4, 1), 0.0),
                    std::invalid_argument);
}

TEST_CASE("bi2 integration basics") {
    DiscreteMeasureSpace base(vec({1.0 / 3, 1.0 / 3, 1.0 / 3}));
    const auto target = SpaceDescriptor::finite_dim(3);
    const VectorMeasure N = VectorMeasure::density(base, target, Eigen::MatrixXd::Identity(3, 3));

    // phi == 1 integrates to N(Omega)
    const BirkhoffResult ones = bi2_integrate(Eigen::VectorXd::Ones(3), N, 1e-9);
    CHECK(ones.value.coords.isApprox(N.measure_of_all().coords, 1e-14));

    // phi = indicator of {0, 2} integrates to N({0, 2})
    const BirkhoffResult ind = bi2_integrate(vec({1, 0, 1}), N, 1e-9);
    CHECK(ind.value.coords.isApprox(N.measure_of(AtomSet{0, 2}).coords, 1e-14));

    // phi(omega_i) = i + 1 against the unit-vector density
    const BirkhoffResult lin = bi2_integrate(vec({1, 2, 3}), N, 1e-9);
    CHECK(lin.value.coords.isApprox(vec({1.0 / 3, 2.0 / 3, 1.0}), 1e-14));
}

TEST_CASE("certificates: tagged sums stay within the oscillation, traces shrink") {
    const std::uint64_t stream = rng::substream(11, "cert");
    for (int idx = 0; idx < 30; ++idx) {
        const RandomInstance inst = random_instance(stream, idx, 128);
        auto eng = rng::engine(stream, std::uint64_t(idx));
        const double tol = std::pow(10.0, -1.0 - 4.0 * rng::uniform01(eng));
        const BirkhoffResult r = bi1_integrate(inst.base, inst.target, inst.values, tol);
        CHECK(r.oscillation <= tol);
        CHECK(r.value.coords.isApprox(
            oracle::weighted_sum(inst.values, inst.base.weights()), 1e-12));

        const double scale = 1.0 + norm(r.value);
        for (int draw = 0; draw < 50; ++draw) {
            std::vector<AtomIndex> tags;
            for (const auto& cell : r.partition_used.cells())
                tags.push_back(cell[std::size_t(eng() % cell.size())]);
            const BanachValue s =
                bi1_tagged_sum(inst.base, inst.target, inst.values, TaggedPartition(r.partition_used, tags));
            CHECK(norm(s - r.value) <= r.oscillation + 1e-12 * scale);
        }
        for (std::size_t k = 0; k + 1 < r.trace.size(); ++k)
            CHECK(r.trace[k + 1] <= r.trace[k] + 1e-12);
    }
}

TEST_CASE("oscillation bound is monotone under refinement") {
    const std::uint64_t stream = rng::substream(11, "monotone");
    for (int idx = 0; idx < 30; ++idx) {
        const RandomInstance inst = random_instance(stream, idx, 64);
        auto eng = rng::engine(stream, std::uint64_t(idx));
        auto [p, q] = random_nested_partitions(eng, AtomIndex(inst.base.atom_count()));
        // q finer than p by construction
        const double coarse = oscillation_bound(inst.target, inst.values, inst.base.weights(), p);
        const double fine = oscillation_bound(inst.target, inst.values, inst.base.weights(), q);
        CHECK(fine <= coarse + 1e-12);
        // and against the common refinement of two arbitrary partitions
        auto [p2, q2] = random_nested_partitions(eng, AtomIndex(inst.base.atom_count()));
        const Partition common = refine(p, p2);
        CHECK(oscillation_bound(inst.target, inst.values, inst.base.weights(), common) <=
              coarse + 1e-12);
        (void)q2;
    }
}

TEST_CASE("induced measure: preimages and totals") {
    DiscreteMeasureSpace base(vec({0.1, 0.2, 0.3, 0.4}));
    const auto target = SpaceDescriptor::finite_dim(4);
    const VectorMeasure N = VectorMeasure::density(base, target, Eigen::MatrixXd::Identity(4, 4));

    // phi(omega_i) = i, bins [0,2) and [2,4]
    const Eigen::VectorXd phi = vec({0, 1, 2, 3});
    const InducedMeasure img = induced_measure(N, phi, vec({0, 2, 4}));
    CHECK(img.measure.increment(0).coords.isApprox(
        oracle::preimage_sum(N, phi, 0, 2, false), 1e-14));
    CHECK(img.measure.increment(1).coords.isApprox(N.measure_of(AtomSet{2, 3}).coords, 1e-14));
    CHECK(img.measure.measure_of_all().coords.isApprox(N.measure_of_all().coords, 1e-14));

    // constant phi puts everything in one bin
    const InducedMeasure flat = induced_measure(N, Eigen::VectorXd::Constant(4, 0.5), vec({0, 1}));
    CHECK(flat.measure.increment(0).coords.isApprox(N.measure_of_all().coords, 1e-14));

    // out-of-range phi values
    CHECK_THROWS_AS(induced_measure(N, vec({0, 1, 2, 9}), vec({0, 2, 4})), std::out_of_range);

    // signed increments that cancel still sum to N(Omega) (= zero)
    Eigen::MatrixXd signed_rows(2, 1);
    signed_rows << 1.0, -1.0;
    const VectorMeasure S =
        VectorMeasure::tabulated(DiscreteMeasureSpace(vec({0.5, 0.5})), SpaceDescriptor::real(),
                                 signed_rows);
    const InducedMeasure simg = induced_measure(S, vec({0.2, 0.8}), vec({0, 0.5, 1}));
    CHECK(norm(simg.measure.measure_of_all()) <= 1e-15);
}

TEST_CASE("duality: both routes agree") {
    DiscreteMeasureSpace base(vec({0.5, 0.5}));
    const auto real = SpaceDescriptor::real();
    Eigen::MatrixXd values(2, 1);
    values << 1.0, 4.0;

    // phi == 1 and phi = indicator
    for (const Eigen::VectorXd& phi : {vec({1, 1}), vec({1, 0})}) {
        const DualityReport rep = check_duality(base, real, phi, values, 1e-6);
        CHECK(rep.gap <= 1e-12);
    }

    const std::uint64_t stream = rng::substream(11, "duality-64");
    for (int idx = 0; idx < 20; ++idx) {
        RandomInstance inst = random_instance(stream, idx, 64);
        const DualityReport rep = check_duality(inst.base, inst.target, inst.phi, inst.values, 1e-3);
        CHECK(rep.gap <= 1e-12 * (1.0 + norm(rep.lhs.value)));
    }
}

TEST_CASE("substitution with exact binning") {
    const std::uint64_t stream = rng::substream(11, "subst");
    for (int idx = 0; idx < 20; ++idx) {
        RandomInstance inst = random_instance(stream, idx, 32);
        auto eng = rng::engine(stream, std::uint64_t(idx));
        inst.phi = random_discrete_phi(eng, inst.base.atom_count(), 5);
        const VectorMeasure N = VectorMeasure::density(inst.base, inst.target, inst.values);
        const Eigen::VectorXd edges = exact_edges_for(inst.phi);

        const SubstitutionReport sq =
            check_substitution([](double x) { return x * x; }, inst.phi, N, edges, 1e-3);
        CHECK(sq.binning_modulus == 0.0);
        CHECK(sq.gap <= 1e-12 * (1.0 + norm(sq.lhs.value)));

        const SubstitutionReport id =
            check_substitution([](double x) { return x; }, inst.phi, N, edges, 1e-3);
        CHECK(id.gap <= 1e-12 * (1.0 + norm(id.lhs.value)));

        const SubstitutionReport one =
            check_substitution([](double) { return 1.0; }, inst.phi, N, edges, 1e-3);
        CHECK(norm(one.lhs.value - N.measure_of_all()) <= 1e-12 * (1.0 + norm(one.lhs.value)));
    }
    // non-covering bins
    DiscreteMeasureSpace base(vec({0.5, 0.5}));
    const VectorMeasure N =
        VectorMeasure::density(base, SpaceDescriptor::real(), Eigen::MatrixXd::Ones(2, 1));
    CHECK_THROWS_AS(
        check_substitution([](double x) { return x; }, vec({0.0, 5.0}), N, vec({0, 1}), 1e-3),
        std::out_of_range);
}

TEST_CASE("induced bi2 measure is additive over bins") {
    // A -> (Bi2) integral over A of phi dN, evaluated via induced bins, is
    // additive: the two-bin split plus the complement reproduces the total.
    const std::uint64_t stream = rng::substream(11, "bi2-additive");
    for (int idx = 0; idx < 10; ++idx) {
        RandomInstance inst = random_instance(stream, idx, 48);
        const VectorMeasure N = VectorMeasure::tabulated(inst.base, inst.target, inst.values);
        const BirkhoffResult whole = bi2_integrate(inst.phi, N, 1e-3);
        AtomSet a, b;
        for (AtomIndex i = 0; i < inst.base.atom_count(); ++i)
            (i % 2 == 0 ? a : b).push_back(i);
        const BanachValue part_a = N.weighted_sum(inst.phi, a);
        const BanachValue part_b = N.weighted_sum(inst.phi, b);
        CHECK(norm(whole.value - part_a - part_b) <= 1e-12 * (1.0 + norm(whole.value)));
    }
}

TEST_CASE("bin index conventions") {
    const Eigen::VectorXd edges = vec({0, 1, 2});
    CHECK(bin_index(edges, 0.0) == 0);
    CHECK(bin_index(edges, 1.0) == 1);
    CHECK(bin_index(edges, 2.0) == 1);  // last bin closed
    CHECK_THROWS_AS(bin_index(edges, -0.1), std::out_of_range);
    CHECK_THROWS_AS(bin_index(edges, 2.1), std::out_of_range);

    const Eigen::VectorXd q = quantile_edges(vec({5, 1, 3, 2, 4}), 2);
    CHECK(q(0) == 1.0);
    CHECK(q(2) == 5.0);
}
