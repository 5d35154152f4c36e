#include <doctest.h>

#include "birkhoff/rng.hpp"
#include "birkhoff/spaces.hpp"

#include <Eigen/Dense>

using namespace birkhoff;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(Eigen::Index(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("addition and scaling") {
    const auto real = SpaceDescriptor::real();
    CHECK(add(BanachValue(real, vec({1.0})), BanachValue(real, vec({2.0}))).coords(0) == 3.0);

    const auto grid = SpaceDescriptor::grid_function(vec({0.0, 0.5, 1.0}));
    const BanachValue g1(grid, vec({0, 1, 2}));
    const BanachValue g2(grid, vec({2, 1, 0}));
    CHECK(add(g1, g2).coords == vec({2, 2, 2}));
    CHECK(add(g1, zero(grid)).coords == g1.coords);

    CHECK(scale(2.0, BanachValue(SpaceDescriptor::finite_dim(2), vec({1, 2}))).coords == vec({2, 4}));
    CHECK(norm(scale(0.0, g1)) == 0.0);
    CHECK(norm(scale(-1.0, g1)) == norm(g1));

    CHECK_THROWS_AS(add(BanachValue(real, vec({1.0})), g1), std::invalid_argument);
}

TEST_CASE("norms per space") {
    CHECK(norm(BanachValue(SpaceDescriptor::real(), vec({-3.0}))) == 3.0);
    CHECK(norm(BanachValue(SpaceDescriptor::grid_function(vec({0, 0.5, 1.0})), vec({1, -4, 2}))) ==
          4.0);
    CHECK(norm(BanachValue(SpaceDescriptor::sample_function(4), vec({1, 1, 1, 1}))) == 1.0);
    CHECK(norm(BanachValue(SpaceDescriptor::finite_dim(2), vec({3, 4}))) == doctest::Approx(5.0));
}

TEST_CASE("dual pairings") {
    const auto fd = SpaceDescriptor::finite_dim(2);
    CHECK(pair(DualFunctional::coordinate(fd, 1), BanachValue(fd, vec({5, 7}))) == 7.0);

    const auto grid = SpaceDescriptor::grid_function(vec({0, 0.25, 0.5, 1.0}));
    CHECK(pair(DualFunctional::grid_point(grid, 2), BanachValue(grid, vec({0, 1, 4, 9}))) == 4.0);
    CHECK(pair(DualFunctional::grid_point(grid, 2), zero(grid)) == 0.0);

    CHECK_THROWS_AS(DualFunctional::grid_point(grid, 7), std::invalid_argument);
    CHECK_THROWS_AS(pair(DualFunctional::identity(), BanachValue(fd, vec({1, 2}))),
                    std::invalid_argument);
}

TEST_CASE("space invariants on random values") {
    auto eng = rng::engine(rng::substream(7, "space-props"), 0);
    const SpaceDescriptor spaces[] = {
        SpaceDescriptor::real(), SpaceDescriptor::finite_dim(5),
        SpaceDescriptor::grid_function(vec({0, 0.2, 0.4, 0.6, 0.8, 1.0})),
        SpaceDescriptor::sample_function(6)};
    for (const auto& space : spaces) {
        for (int rep = 0; rep < 200; ++rep) {
            Eigen::VectorXd a(space.dim()), b(space.dim());
            rng::fill_standard_normals(eng, a);
            rng::fill_standard_normals(eng, b);
            const BanachValue u(space, a), v(space, b);
            const double alpha = 4.0 * rng::uniform01(eng) - 2.0;

            CHECK(norm(add(u, v)) <= norm(u) + norm(v) + 1e-12);
            CHECK(norm(scale(alpha, v)) ==
                  doctest::Approx(std::abs(alpha) * norm(v)).epsilon(1e-12));

            const auto f = DualFunctional::default_probe(space);
            // linearity of the pairing
            CHECK(pair(f, add(scale(alpha, u), v)) ==
                  doctest::Approx(alpha * pair(f, u) + pair(f, v)).epsilon(1e-12));
            // point-evaluation style probes are dominated by the norm
            CHECK(std::abs(pair(f, v)) <= norm(v) * double(space.dim()) + 1e-12);
        }
    }
}

TEST_CASE("point probes are norm-dominated with constant 1") {
    auto eng = rng::engine(rng::substream(7, "probe-bound"), 1);
    const auto grid = SpaceDescriptor::grid_function(vec({0, 0.5, 1.0}));
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd a(3);
        rng::fill_standard_normals(eng, a);
        const BanachValue v(grid, a);
        for (Eigen::Index i = 0; i < 3; ++i)
            CHECK(std::abs(pair(DualFunctional::grid_point(grid, i), v)) <= norm(v) + 1e-12);
    }
}

TEST_CASE("descriptor validation") {
    CHECK_THROWS_AS(SpaceDescriptor::finite_dim(0), std::invalid_argument);
    CHECK_THROWS_AS(SpaceDescriptor::grid_function(vec({0.5, 1.0})), std::invalid_argument);
    CHECK_THROWS_AS(SpaceDescriptor::grid_function(vec({0.0, 0.0, 1.0})), std::invalid_argument);
    CHECK_THROWS_AS(SpaceDescriptor::sample_function(0), std::invalid_argument);
    CHECK_THROWS_AS(BanachValue(SpaceDescriptor::finite_dim(3), vec({1, 2})), std::invalid_argument);
}
