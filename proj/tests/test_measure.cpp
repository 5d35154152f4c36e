#include <doctest.h>

#include "birkhoff/instances.hpp"
#include "birkhoff/measure.hpp"
#include "birkhoff/rng.hpp"

using namespace birkhoff;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(Eigen::Index(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("measure space flags") {
    DiscreteMeasureSpace p(vec({0.25, 0.25, 0.5}));
    CHECK(p.is_probability());
    DiscreteMeasureSpace m(vec({0.25, 0.25}));
    CHECK(!m.is_probability());
    CHECK(m.total() == 0.5);
    CHECK_THROWS_AS(DiscreteMeasureSpace(vec({0.5, -0.1})), std::invalid_argument);
}

TEST_CASE("refine and is_finer") {
    const Partition p(4, {{0, 1}, {2, 3}});
    const Partition q(4, {{0, 2}, {1, 3}});
    CHECK(refine(p, q) == Partition::atoms(4));
    CHECK(refine(p, p) == p);
    CHECK(refine(Partition::trivial(4), q) == q);

    CHECK(is_finer(Partition::atoms(4), p));
    CHECK(is_finer(p, p));
    CHECK(!is_finer(Partition(3, {{0, 1}, {2}}), Partition::atoms(3)));
}

TEST_CASE("partition validation and canonical order") {
    CHECK_THROWS_AS(Partition(3, {{0, 1}}), std::invalid_argument);          // no cover
    CHECK_THROWS_AS(Partition(3, {{0, 1}, {1, 2}}), std::invalid_argument);  // overlap
    CHECK_THROWS_AS(Partition(3, {{0, 1, 2}, {}}), std::invalid_argument);   // empty cell
    const Partition p(4, {{3, 2}, {1, 0}});
    CHECK(p.cells()[0] == AtomSet{0, 1});
    CHECK(p.cells()[1] == AtomSet{2, 3});
}

TEST_CASE("tagged partition membership") {
    const Partition p(4, {{0, 1}, {2, 3}});
    CHECK_NOTHROW(TaggedPartition(p, {1, 2}));
    CHECK_THROWS_AS(TaggedPartition(p, {2, 2}), std::invalid_argument);
    CHECK_THROWS_AS(TaggedPartition(p, {1}), std::invalid_argument);
}

TEST_CASE("measure evaluation: density against weights") {
    // Phi(omega_i) = e_i in R^4, weights (0.1, 0.2, 0.3, 0.4)
    DiscreteMeasureSpace base(vec({0.1, 0.2, 0.3, 0.4}));
    const auto target = SpaceDescriptor::finite_dim(4);
    const VectorMeasure N = VectorMeasure::density(base, target, Eigen::MatrixXd::Identity(4, 4));
    CHECK(N.measure_of_all().coords.isApprox(vec({0.1, 0.2, 0.3, 0.4}), 1e-15));
    CHECK(norm(N.measure_of(AtomSet{})) == 0.0);
}

TEST_CASE("additivity and refinement stability across realizations") {
    const std::uint64_t stream = rng::substream(7, "measure-props");
    for (int idx = 0; idx < 50; ++idx) {
        const RandomInstance inst = random_instance(stream, idx, 64);
        auto eng = rng::engine(stream, std::uint64_t(idx) + 500);
        const VectorMeasure N =
            idx % 2 == 0 ? VectorMeasure::density(inst.base, inst.target, inst.values)
                         : VectorMeasure::tabulated(inst.base, inst.target, inst.values);

        // random disjoint pair
        AtomSet a, b;
        for (AtomIndex i = 0; i < inst.base.atom_count(); ++i) {
            const auto r = eng() % 3;
            if (r == 0) a.push_back(i);
            if (r == 1) b.push_back(i);
        }
        AtomSet both = a;
        both.insert(both.end(), b.begin(), b.end());
        std::sort(both.begin(), both.end());
        const double gap =
            norm(N.measure_of(both) - N.measure_of(a) - N.measure_of(b));
        CHECK(gap <= 1e-12);

        // partition sums reproduce N(Omega)
        auto [F, G] = random_nested_partitions(eng, AtomIndex(inst.base.atom_count()));
        BanachValue total = zero(inst.target);
        for (const auto& cell : G.cells()) total = total + N.measure_of(cell);
        CHECK(norm(total - N.measure_of_all()) <= 1e-12 * (1.0 + norm(total)));
        (void)F;
    }
}

TEST_CASE("rank-one and slot storages agree with dense") {
    auto eng = rng::engine(rng::substream(7, "storage-agree"), 0);
    const Eigen::Index n = 40;
    Eigen::VectorXd w(n), coeff(n), phi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        w(i) = rng::uniform01(eng);
        coeff(i) = rng::standard_normal(eng);
        phi(i) = rng::standard_normal(eng);
    }
    DiscreteMeasureSpace base(w);

    // rank-one versus dense
    const auto grid = SpaceDescriptor::grid_function(vec({0.0, 0.5, 1.0}));
    Eigen::VectorXd dir = vec({1.0, -2.0, 0.5});
    Eigen::MatrixXd rows(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) rows.row(i) = coeff(i) * dir.transpose();
    const VectorMeasure dense = VectorMeasure::density(base, grid, rows);
    const VectorMeasure rank1 = VectorMeasure::density_rank_one(base, grid, coeff, dir);
    CHECK(dense.weighted_sum_all(phi).coords.isApprox(rank1.weighted_sum_all(phi).coords, 1e-13));
    CHECK(dense.variation_of(all_atoms(AtomIndex(n))) ==
          doctest::Approx(rank1.variation_of(all_atoms(AtomIndex(n)))).epsilon(1e-13));

    // slots versus dense
    const auto sample = SpaceDescriptor::sample_function(5);
    std::vector<std::int32_t> slot(std::size_t(n));
    Eigen::MatrixXd srows = Eigen::MatrixXd::Zero(n, 5);
    for (Eigen::Index i = 0; i < n; ++i) {
        slot[std::size_t(i)] = std::int32_t(eng() % 5);
        srows(i, slot[std::size_t(i)]) = coeff(i);
    }
    const VectorMeasure sdense = VectorMeasure::density(base, sample, srows);
    const VectorMeasure sslots = VectorMeasure::density_slots(base, sample, slot, coeff);
    CHECK(sdense.weighted_sum_all(phi).coords.isApprox(sslots.weighted_sum_all(phi).coords, 1e-13));
    CHECK(sdense.variation_of(all_atoms(AtomIndex(n))) ==
          doctest::Approx(sslots.variation_of(all_atoms(AtomIndex(n)))).epsilon(1e-13));

    // scaling keeps increments aligned
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = 0.5 + rng::uniform01(eng);
    const VectorMeasure qd = sdense.scaled_by(y);
    const VectorMeasure qs = sslots.scaled_by(y);
    CHECK(qd.measure_of_all().coords.isApprox(qs.measure_of_all().coords, 1e-13));
    for (AtomIndex i : {AtomIndex(0), AtomIndex(7), AtomIndex(n - 1)})
        CHECK(qd.increment(i).coords.isApprox(qs.increment(i).coords, 1e-13));
}
