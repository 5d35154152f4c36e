#pragma once

#include <Eigen/Dense>

#include "birkhoff/measure.hpp"
#include "birkhoff/rng.hpp"
#include "birkhoff/spaces.hpp"

#include <algorithm>
#include <vector>

namespace birkhoff {

// Randomized finite instance over one of the four target spaces: weights may
// include zero atoms, values are bounded normals, phi is bounded uniform.
struct RandomInstance {
    DiscreteMeasureSpace base;
    SpaceDescriptor target;
    Eigen::MatrixXd values;
    Eigen::VectorXd phi;
};

inline SpaceDescriptor random_space(std::mt19937_64& eng) {
    switch (eng() % 4) {
        case 0: return SpaceDescriptor::real();
        case 1: return SpaceDescriptor::finite_dim(1 + Eigen::Index(eng() % 8));
        case 2: {
            const int k = 2 + int(eng() % 7);
            Eigen::VectorXd grid(k + 1);
            for (int j = 0; j <= k; ++j) grid(j) = double(j) / double(k);
            return SpaceDescriptor::grid_function(grid);
        }
        default: return SpaceDescriptor::sample_function(1 + Eigen::Index(eng() % 8));
    }
}

inline RandomInstance random_instance(std::uint64_t stream, int index, int max_atoms) {
    auto eng = rng::engine(stream, std::uint64_t(index));
    const Eigen::Index atoms = 2 + Eigen::Index(eng() % std::uint64_t(max_atoms - 1));
    const SpaceDescriptor target = random_space(eng);

    Eigen::VectorXd weights(atoms);
    for (Eigen::Index i = 0; i < atoms; ++i) {
        const bool null_atom = rng::uniform01(eng) < 0.1;
        weights(i) = null_atom ? 0.0 : rng::uniform01(eng);
    }
    if (weights.sum() == 0.0) weights(0) = 0.5;  // keep the space non-degenerate

    Eigen::MatrixXd values(atoms, target.dim());
    for (Eigen::Index i = 0; i < atoms; ++i)
        for (Eigen::Index j = 0; j < target.dim(); ++j)
            values(i, j) = 2.0 * rng::standard_normal(eng);

    Eigen::VectorXd phi(atoms);
    for (Eigen::Index i = 0; i < atoms; ++i) phi(i) = -2.0 + 4.0 * rng::uniform01(eng);

    return RandomInstance{DiscreteMeasureSpace(weights), target, std::move(values), std::move(phi)};
}

// phi taking at most n_distinct values (substitution instances).
inline Eigen::VectorXd random_discrete_phi(std::mt19937_64& eng, Eigen::Index atoms, int n_distinct) {
    Eigen::VectorXd levels(n_distinct);
    for (int v = 0; v < n_distinct; ++v) levels(v) = -2.0 + 4.0 * rng::uniform01(eng);
    Eigen::VectorXd phi(atoms);
    for (Eigen::Index i = 0; i < atoms; ++i) phi(i) = levels(Eigen::Index(eng() % std::uint64_t(n_distinct)));
    return phi;
}

// Edges separating every distinct value of phi into its own bin.
inline Eigen::VectorXd exact_edges_for(const Eigen::VectorXd& phi) {
    std::vector<double> vals(phi.data(), phi.data() + phi.size());
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    Eigen::VectorXd edges(Eigen::Index(vals.size()) + 1);
    edges(0) = vals.front() - 1.0;
    for (std::size_t v = 0; v + 1 < vals.size(); ++v)
        edges(Eigen::Index(v) + 1) = 0.5 * (vals[v] + vals[v + 1]);
    edges(Eigen::Index(vals.size())) = vals.back() + 1.0;
    return edges;
}

// F coarser than G: G assigns atoms to groups, F merges G's groups.
inline std::pair<Partition, Partition> random_nested_partitions(std::mt19937_64& eng,
                                                                AtomIndex atoms) {
    const int g = 2 + int(eng() % std::uint64_t(std::min<AtomIndex>(atoms, 12)));
    std::vector<int> group(std::size_t(atoms));
    for (AtomIndex i = 0; i < atoms; ++i) group[std::size_t(i)] = int(eng() % std::uint64_t(g));
    const int f = 1 + int(eng() % std::uint64_t(g));
    std::vector<int> merge(std::size_t(g));
    for (int c = 0; c < g; ++c) merge[std::size_t(c)] = int(eng() % std::uint64_t(f));

    std::vector<AtomSet> g_cells(std::size_t(g)), f_cells(std::size_t(f));
    for (AtomIndex i = 0; i < atoms; ++i) {
        g_cells[std::size_t(group[std::size_t(i)])].push_back(i);
        f_cells[std::size_t(merge[std::size_t(group[std::size_t(i)])])].push_back(i);
    }
    std::erase_if(g_cells, [](const AtomSet& c) { return c.empty(); });
    std::erase_if(f_cells, [](const AtomSet& c) { return c.empty(); });
    return {Partition(atoms, std::move(f_cells)), Partition(atoms, std::move(g_cells))};
}

}  // namespace birkhoff
