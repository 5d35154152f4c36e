#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>

namespace birkhoff {

// The four concrete target spaces values can live in. GridFunction holds a
// continuous function by its samples on a fixed time grid (sup norm over the
// grid); SampleFunction holds an L1 random variable by its values on M sample
// slots under the empirical measure (mean-absolute norm).
enum class SpaceKind { Real, FiniteDim, GridFunction, SampleFunction };

class SpaceDescriptor {
public:
    static SpaceDescriptor real() { return SpaceDescriptor(SpaceKind::Real, 1, {}); }

    static SpaceDescriptor finite_dim(Eigen::Index n) {
        if (n < 1) throw std::invalid_argument("finite_dim: n must be >= 1");
        return SpaceDescriptor(SpaceKind::FiniteDim, n, {});
    }

    // grid must be strictly increasing, start at 0 and end at the horizon T.
    static SpaceDescriptor grid_function(Eigen::VectorXd grid) {
        if (grid.size() < 2) throw std::invalid_argument("grid_function: need at least 2 grid points");
        if (grid(0) != 0.0) throw std::invalid_argument("grid_function: grid must start at 0");
        for (Eigen::Index i = 0; i + 1 < grid.size(); ++i)
            if (grid(i + 1) <= grid(i))
                throw std::invalid_argument("grid_function: grid must be strictly increasing");
        const Eigen::Index n = grid.size();
        return SpaceDescriptor(SpaceKind::GridFunction, n, std::move(grid));
    }

    static SpaceDescriptor sample_function(Eigen::Index slots) {
        if (slots < 1) throw std::invalid_argument("sample_function: slots must be >= 1");
        return SpaceDescriptor(SpaceKind::SampleFunction, slots, {});
    }

    SpaceKind kind() const { return kind_; }
    Eigen::Index dim() const { return dim_; }

    const Eigen::VectorXd& grid() const {
        if (kind_ != SpaceKind::GridFunction)
            throw std::logic_error("grid() is only defined for GridFunction spaces");
        return grid_;
    }

    double horizon() const { return grid()(grid_.size() - 1); }

    friend bool operator==(const SpaceDescriptor& a, const SpaceDescriptor& b) {
        if (a.kind_ != b.kind_ || a.dim_ != b.dim_) return false;
        if (a.kind_ == SpaceKind::GridFunction) return a.grid_ == b.grid_;
        return true;
    }
    friend bool operator!=(const SpaceDescriptor& a, const SpaceDescriptor& b) { return !(a == b); }

private:
    SpaceDescriptor(SpaceKind kind, Eigen::Index dim, Eigen::VectorXd grid)
        : kind_(kind), dim_(dim), grid_(std::move(grid)) {}

    SpaceKind kind_;
    Eigen::Index dim_;
    Eigen::VectorXd grid_;  // GridFunction only
};

// Norm of a coordinate vector interpreted in the given space. Exposed on raw
// coordinates so matrix-row kernels can avoid materializing BanachValues.
inline double space_norm(const SpaceDescriptor& space, const Eigen::Ref<const Eigen::VectorXd>& coords) {
    switch (space.kind()) {
        case SpaceKind::Real: return std::abs(coords(0));
        case SpaceKind::FiniteDim: return coords.norm();
        case SpaceKind::GridFunction: return coords.lpNorm<Eigen::Infinity>();
        case SpaceKind::SampleFunction: return coords.cwiseAbs().mean();
    }
    return 0.0;  // unreachable
}

// An element of one of the four spaces: descriptor plus coordinates.
struct BanachValue {
    SpaceDescriptor space;
    Eigen::VectorXd coords;

    BanachValue(SpaceDescriptor s, Eigen::VectorXd c) : space(std::move(s)), coords(std::move(c)) {
        if (coords.size() != space.dim())
            throw std::invalid_argument("BanachValue: coordinate length does not match space");
    }
};

inline BanachValue zero(const SpaceDescriptor& space) {
    return BanachValue(space, Eigen::VectorXd::Zero(space.dim()));
}

inline BanachValue add(const BanachValue& u, const BanachValue& v) {
    if (u.space != v.space) throw std::invalid_argument("add: values live in different spaces");
    return BanachValue(u.space, u.coords + v.coords);
}

inline BanachValue sub(const BanachValue& u, const BanachValue& v) {
    if (u.space != v.space) throw std::invalid_argument("sub: values live in different spaces");
    return BanachValue(u.space, u.coords - v.coords);
}

inline BanachValue scale(double a, const BanachValue& v) { return BanachValue(v.space, a * v.coords); }

inline double norm(const BanachValue& v) { return space_norm(v.space, v.coords); }

inline BanachValue operator+(const BanachValue& u, const BanachValue& v) { return add(u, v); }
inline BanachValue operator-(const BanachValue& u, const BanachValue& v) { return sub(u, v); }
inline BanachValue operator*(double a, const BanachValue& v) { return scale(a, v); }

// A dual-space probe from the norming family declared for each space:
// identity on Real, coordinate evaluation on FiniteDim, grid-point evaluation
// on GridFunction, weighted averages on SampleFunction. Pairing is the dot
// product of the probe weights with the coordinates.
class DualFunctional {
public:
    static DualFunctional identity() {
        return DualFunctional(SpaceDescriptor::real(), Eigen::VectorXd::Ones(1));
    }

    static DualFunctional coordinate(const SpaceDescriptor& space, Eigen::Index i) {
        if (space.kind() != SpaceKind::FiniteDim)
            throw std::invalid_argument("coordinate probe: space must be FiniteDim");
        return DualFunctional(space, unit_weights(space, i));
    }

    static DualFunctional grid_point(const SpaceDescriptor& space, Eigen::Index i) {
        if (space.kind() != SpaceKind::GridFunction)
            throw std::invalid_argument("grid_point probe: space must be GridFunction");
        return DualFunctional(space, unit_weights(space, i));
    }

    static DualFunctional weighted_average(const SpaceDescriptor& space, Eigen::VectorXd w) {
        if (space.kind() != SpaceKind::SampleFunction)
            throw std::invalid_argument("weighted_average probe: space must be SampleFunction");
        if (w.size() != space.dim())
            throw std::invalid_argument("weighted_average probe: weight length mismatch");
        return DualFunctional(space, std::move(w));
    }

    // Default norming probe per space kind: identity / first coordinate /
    // first grid point / uniform average.
    static DualFunctional default_probe(const SpaceDescriptor& space) {
        switch (space.kind()) {
            case SpaceKind::Real: return identity();
            case SpaceKind::FiniteDim: return coordinate(space, 0);
            case SpaceKind::GridFunction: return grid_point(space, 0);
            case SpaceKind::SampleFunction:
                return weighted_average(space,
                                        Eigen::VectorXd::Constant(space.dim(), 1.0 / double(space.dim())));
        }
        return identity();  // unreachable
    }

    const SpaceDescriptor& space() const { return space_; }
    const Eigen::VectorXd& weights() const { return weights_; }

private:
    DualFunctional(SpaceDescriptor space, Eigen::VectorXd w)
        : space_(std::move(space)), weights_(std::move(w)) {}

    static Eigen::VectorXd unit_weights(const SpaceDescriptor& space, Eigen::Index i) {
        if (i < 0 || i >= space.dim()) throw std::invalid_argument("probe index out of range");
        Eigen::VectorXd w = Eigen::VectorXd::Zero(space.dim());
        w(i) = 1.0;
        return w;
    }

    SpaceDescriptor space_;
    Eigen::VectorXd weights_;
};

inline double pair(const DualFunctional& f, const BanachValue& v) {
    if (f.space() != v.space) throw std::invalid_argument("pair: functional and value spaces differ");
    return f.weights().dot(v.coords);
}

}  // namespace birkhoff
