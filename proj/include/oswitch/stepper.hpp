#pragma once

#include <memory>
#include <span>
#include <vector>

#include "oswitch/grid.hpp"

namespace oswitch {

/// One backward theta-step of  -d_t w - L w + r w = f  on the lattice:
///
///   (I - theta dt L_k) w^k = (I + (1 - theta) dt L_{k+1}) u + dt f,   u = e^{-r dt} w^{k+1}
///
/// The reaction rate r is integrated exactly through the factor e^{-r dt};
/// callers pass the already-decayed next slice u. Under the linear-extrapolation
/// policy boundary rows are replaced by u_b - 2 u_{b+e} + u_{b+2e} = 0.
class ThetaStepper {
public:
    ThetaStepper(const DiffusionSpec& diffusion, const GridSpec& grid, double horizon,
                 double reaction_rate);
    ~ThetaStepper();
    ThetaStepper(const ThetaStepper&) = delete;
    ThetaStepper& operator=(const ThetaStepper&) = delete;

    int n_time() const { return grid_.n_time; }
    double dt() const { return dt_; }
    double time(int k) const;
    double decay() const { return decay_; }
    const Lattice& lattice() const { return lattice_; }
    const GridSpec& grid() const { return grid_; }
    const DiffusionSpec& diffusion() const { return diffusion_; }

    const GeneratorMatrix& generator(int k);

    /// Solves for w^k. `decayed_next` is e^{-r dt} w^{k+1}; `driver` is f per node.
    void step(int k, std::span<const double> decayed_next, std::span<const double> driver,
              std::span<double> out);

private:
    struct Factor;
    Factor& factor(int k);

    DiffusionSpec diffusion_;
    GridSpec grid_;
    Lattice lattice_;
    double horizon_;
    double dt_;
    double decay_;
    bool time_dependent_;
    struct BoundaryRow {
        std::size_t node;
        std::ptrdiff_t step;  // signed stride pointing inward
    };
    std::vector<BoundaryRow> boundary_rows_;
    std::vector<std::pair<int, std::unique_ptr<GeneratorMatrix>>> gen_cache_;
    std::unique_ptr<Factor> factor_;
    int factor_k_ = -1;
    std::vector<double> rhs_;
};

}  // namespace oswitch
