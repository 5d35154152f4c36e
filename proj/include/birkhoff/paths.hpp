#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace birkhoff {

// M Brownian paths sampled on a shared time grid; values(i, k) = w(t_k) on
// path i, with w(t_0) = 0 and independent N(0, dt) increments. Paths are
// generated from per-path substreams of the seed, so the matrix is identical
// under any parallel schedule.
struct PathEnsemble {
    Eigen::VectorXd grid;    // K+1 times, 0 = t_0 < ... < t_K = T
    Eigen::MatrixXd values;  // M x (K+1)
    std::uint64_t seed = 0;

    Eigen::Index paths() const { return values.rows(); }
    Eigen::Index steps() const { return grid.size() - 1; }
    double horizon() const { return grid(grid.size() - 1); }
};

Eigen::VectorXd uniform_grid(int steps, double horizon);

// Exact index of t on the grid (within 1e-12); throws for off-grid times.
Eigen::Index grid_index_of(const Eigen::VectorXd& grid, double t);

PathEnsemble simulate_bm(Eigen::Index paths, const Eigen::VectorXd& grid, std::uint64_t seed);

std::vector<double> grid_times(const Eigen::VectorXd& grid);

}  // namespace birkhoff
