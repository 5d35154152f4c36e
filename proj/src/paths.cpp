#include "birkhoff/paths.hpp"

#include "birkhoff/parallel.hpp"
#include "birkhoff/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace birkhoff {

Eigen::VectorXd uniform_grid(int steps, double horizon) {
    if (steps < 1 || !(horizon > 0.0)) throw std::invalid_argument("uniform_grid: bad parameters");
    Eigen::VectorXd g(steps + 1);
    for (int k = 0; k <= steps; ++k) g(k) = horizon * double(k) / double(steps);
    return g;
}

Eigen::Index grid_index_of(const Eigen::VectorXd& grid, double t) {
    for (Eigen::Index k = 0; k < grid.size(); ++k)
        if (std::abs(grid(k) - t) <= 1e-12) return k;
    throw std::invalid_argument("time is not on the grid");
}

PathEnsemble simulate_bm(Eigen::Index paths, const Eigen::VectorXd& grid, std::uint64_t seed) {
    if (paths < 1) throw std::invalid_argument("simulate_bm: need at least one path");
    if (grid.size() < 2 || grid(0) != 0.0)
        throw std::invalid_argument("simulate_bm: grid must start at 0 with at least one step");
    const Eigen::Index steps = grid.size() - 1;
    Eigen::VectorXd sqrt_dt(steps);
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double dt = grid(k + 1) - grid(k);
        if (!(dt > 0.0)) throw std::invalid_argument("simulate_bm: grid must be strictly increasing");
        sqrt_dt(k) = std::sqrt(dt);
    }

    PathEnsemble e;
    e.grid = grid;
    e.seed = seed;
    e.values.resize(paths, steps + 1);
    const std::uint64_t stream = rng::substream(seed, "bm-paths");
    parallel_for(std::size_t(paths), [&](std::size_t i) {
        auto eng = rng::engine(stream, std::uint64_t(i));
        Eigen::VectorXd z(steps);
        rng::fill_standard_normals(eng, z);
        double w = 0.0;
        e.values(Eigen::Index(i), 0) = 0.0;
        for (Eigen::Index k = 0; k < steps; ++k) {
            w += sqrt_dt(k) * z(k);
            e.values(Eigen::Index(i), k + 1) = w;
        }
    });
    return e;
}

std::vector<double> grid_times(const Eigen::VectorXd& grid) {
    return std::vector<double>(grid.data(), grid.data() + grid.size());
}

}  // namespace birkhoff
