#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "oswitch/model.hpp"

namespace oswitch {

enum class BoundaryPolicy { LinearExtrapolation, ZeroSecondDerivative };

const char* to_string(BoundaryPolicy p);

inline constexpr int kMaxStateDim = 3;

/// Uniform space-time lattice on a truncated box.
struct GridSpec {
    std::vector<std::pair<double, double>> box;  // per x dimension
    std::vector<int> nodes;                      // per x dimension, >= 3
    int n_time = 100;
    BoundaryPolicy boundary = BoundaryPolicy::LinearExtrapolation;
    double theta = 1.0;
    std::size_t max_nodes = 4'000'000;

    int k() const { return static_cast<int>(nodes.size()); }
    double dx(int q) const;
    std::size_t node_count() const;
    /// Throws ConfigError unless the spec is usable for a k-dimensional state.
    void validate(int k) const;
};

/// Index arithmetic on the spatial lattice. Dimension 0 varies fastest.
class Lattice {
public:
    explicit Lattice(const GridSpec& grid);

    int k() const { return k_; }
    std::size_t size() const { return size_; }
    int extent(int q) const { return n_[static_cast<std::size_t>(q)]; }
    std::size_t stride(int q) const { return stride_[static_cast<std::size_t>(q)]; }
    double lo(int q) const { return lo_[static_cast<std::size_t>(q)]; }
    double hi(int q) const { return hi_[static_cast<std::size_t>(q)]; }
    double dx(int q) const { return dx_[static_cast<std::size_t>(q)]; }

    int index_along(std::size_t node, int q) const {
        return static_cast<int>((node / stride(q)) % static_cast<std::size_t>(extent(q)));
    }
    double coord(std::size_t node, int q) const { return lo(q) + dx(q) * index_along(node, q); }
    std::vector<double> coords(std::size_t node) const;
    bool on_boundary(std::size_t node, int q) const {
        const int j = index_along(node, q);
        return j == 0 || j == extent(q) - 1;
    }
    bool on_boundary(std::size_t node) const;
    /// Node nearest to x (clamped into the box).
    std::size_t nearest(std::span<const double> x) const;

private:
    int k_ = 0;
    std::size_t size_ = 0;
    std::vector<int> n_;
    std::vector<std::size_t> stride_;
    std::vector<double> lo_, hi_, dx_;
};

/// Finite-difference approximation of L = 1/2 Tr(sigma sigma^T D^2) + b^T D at a fixed time.
///
/// Boundary rows drop the second-order and cross terms of the dimension they
/// sit on and keep the drift only when the upwind neighbour exists, so every
/// row sums to zero. The linear-extrapolation boundary policy is enforced by
/// the time stepper, not here.
struct GeneratorMatrix {
    Eigen::SparseMatrix<double, Eigen::RowMajor> op;
    bool positive_coefficients = true;
    std::size_t negative_entries = 0;
};

GeneratorMatrix build_generator(const DiffusionSpec& diffusion, const GridSpec& grid, double t);

/// d components per node, node-major: z[node * d + r] = (sigma^T D_x u)_r.
std::vector<double> gradient_field(std::span<const double> field, const GridSpec& grid,
                                   const DiffusionSpec& diffusion, double t);

/// Discrete (v^1, ..., v^m) on every retained time slice.
struct ValueFields {
    GridSpec grid;
    int m = 0;
    double horizon = 1.0;
    std::vector<double> times;             // increasing; times.back() == horizon
    std::vector<std::vector<double>> data;  // data[slice][mode * N + node]

    ValueFields() = default;
    /// All n_time + 1 slices, zero-filled.
    ValueFields(GridSpec grid, int m, double horizon);

    std::size_t node_count() const { return grid.node_count(); }
    std::size_t slices() const { return times.size(); }
    std::span<double> mode(std::size_t slice, int i) {
        return {data[slice].data() + static_cast<std::size_t>(i) * node_count(), node_count()};
    }
    std::span<const double> mode(std::size_t slice, int i) const {
        return {data[slice].data() + static_cast<std::size_t>(i) * node_count(), node_count()};
    }
    double value(std::size_t slice, int i, std::size_t node) const {
        return data[slice][static_cast<std::size_t>(i) * node_count() + node];
    }
    /// Every r-th slice counted back from the terminal one; t = 0 always kept.
    ValueFields decimated(int r) const;
    bool all_finite() const;
};

/// Sup-norm distance over all slices, modes and nodes. Shapes must agree.
double sup_distance(const ValueFields& a, const ValueFields& b);

struct Interpolated {
    double value = 0.0;
    bool clamped = false;
};

/// Multilinear in x, linear in t between retained slices; x is clamped into the box.
Interpolated interpolate(const ValueFields& fields, int i, double t, std::span<const double> x);

/// Repeated interpolation on one set of fields (the fields must outlive it).
class FieldInterpolator {
public:
    explicit FieldInterpolator(const ValueFields& fields);
    Interpolated operator()(int i, double t, std::span<const double> x) const;
    const Lattice& lattice() const { return lat_; }

private:
    double at_slice(std::size_t slice, int i, const int* base, const double* frac) const;
    const ValueFields& f_;
    Lattice lat_;
};

}  // namespace oswitch
