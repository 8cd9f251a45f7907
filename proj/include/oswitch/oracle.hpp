#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "oswitch/grid.hpp"
#include "oswitch/model.hpp"

namespace oswitch {

using ChainMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Markov chain on the lattice, P_k = I + dt L(t_k). Exact zeros are pruned.
struct ChainKernel {
    GridSpec grid;
    double horizon = 1.0;
    double dt = 0.0;
    bool time_dependent = false;
    std::vector<ChainMatrix> slices;  // one entry when time-independent, else n_time

    int n_time() const { return grid.n_time; }
    double time(int k) const { return k == grid.n_time ? horizon : horizon * k / grid.n_time; }
    const ChainMatrix& at(int k) const {
        return slices[time_dependent ? static_cast<std::size_t>(k) : 0u];
    }
};

/// Throws NumericalError when the stencil has a negative coefficient or when
/// dt times the largest total jump rate exceeds 1.
ChainKernel build_chain(const DiffusionSpec& diffusion, const GridSpec& grid, double horizon);

struct ChainMoments {
    std::vector<double> mean;        // E[dX], k entries
    std::vector<double> covariance;  // E[dX dX^T] - mean mean^T, k x k row-major
};

ChainMoments chain_moments(const ChainKernel& chain, int k, std::size_t node);

/// Backward dynamic programming on the chain:
///   c_i = sum_row P (e^{-r dt} Y_i(k+1)) + dt f_i(t_k, x, e^{-r dt} Y(k+1), z)
/// followed by the cyclic projection Y_i <- max(c_i, max_{j != i}(Y_j - g_ij)).
ValueFields dp_solve(const SwitchingModel& model, const ChainKernel& chain);

struct EnumerationCaps {
    int n_time = 6;
    int modes = 3;
    std::size_t nodes = 9;
    std::uint64_t max_evaluations = 200'000'000;
};

struct EnumerationResult {
    double value = 0.0;
    /// Mode held on each step (1-based) along the most probable scenario from x0.
    std::vector<int> mode_path;
    std::vector<std::size_t> node_path;
    std::uint64_t evaluations = 0;

    std::string to_json() const;
};

/// Exhaustive search over switching decisions adapted to the chain's scenario
/// tree. The driver is evaluated with y = 0 and z = 0. i0 is 1-based.
EnumerationResult enumerate_strategies(const SwitchingModel& model, const ChainKernel& chain,
                                       std::size_t x0_node, int i0, const EnumerationCaps& caps = {});

}  // namespace oswitch
