#include "oswitch/stepper.hpp"

#include <cmath>

#include <Eigen/SparseLU>

#include "oswitch/error.hpp"

namespace oswitch {

struct ThetaStepper::Factor {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

ThetaStepper::ThetaStepper(const DiffusionSpec& diffusion, const GridSpec& grid, double horizon,
                           double reaction_rate)
    : diffusion_(diffusion), grid_(grid), lattice_(grid), horizon_(horizon),
      dt_(horizon / grid.n_time), decay_(std::exp(-reaction_rate * horizon / grid.n_time)),
      time_dependent_(diffusion.time_dependent()) {
    if (diffusion.k != grid.k()) throw ConfigError("stepper: grid and diffusion dimensions differ");
    if (!std::isfinite(decay_)) throw NumericalError("stepper: reaction factor overflow");
    if (grid.boundary == BoundaryPolicy::LinearExtrapolation) {
        for (std::size_t node = 0; node < lattice_.size(); ++node) {
            for (int q = 0; q < lattice_.k(); ++q) {
                const int j = lattice_.index_along(node, q);
                const auto s = static_cast<std::ptrdiff_t>(lattice_.stride(q));
                if (j == 0) {
                    boundary_rows_.push_back({node, s});
                    break;
                }
                if (j == lattice_.extent(q) - 1) {
                    boundary_rows_.push_back({node, -s});
                    break;
                }
            }
        }
    }
    rhs_.resize(lattice_.size());
}

ThetaStepper::~ThetaStepper() = default;

double ThetaStepper::time(int k) const {
    return k == grid_.n_time ? horizon_ : horizon_ * k / grid_.n_time;
}

const GeneratorMatrix& ThetaStepper::generator(int k) {
    const int key = time_dependent_ ? k : 0;
    for (auto& [kk, g] : gen_cache_)
        if (kk == key) return *g;
    if (gen_cache_.size() >= 3) gen_cache_.erase(gen_cache_.begin());
    gen_cache_.emplace_back(key, std::make_unique<GeneratorMatrix>(build_generator(diffusion_, grid_, time(k))));
    return *gen_cache_.back().second;
}

ThetaStepper::Factor& ThetaStepper::factor(int k) {
    const int key = time_dependent_ ? k : 0;
    if (factor_ && factor_k_ == key) return *factor_;
    const GeneratorMatrix& gen = generator(k);
    const auto n = static_cast<Eigen::Index>(lattice_.size());
    std::vector<char> replaced(lattice_.size(), 0);
    for (const auto& br : boundary_rows_) replaced[br.node] = 1;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(gen.op.nonZeros()) + lattice_.size());
    const double c = grid_.theta * dt_;
    for (Eigen::Index row = 0; row < n; ++row) {
        if (replaced[static_cast<std::size_t>(row)]) continue;
        trip.emplace_back(static_cast<int>(row), static_cast<int>(row), 1.0);
        if (c == 0.0) continue;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(gen.op, row); it; ++it)
            trip.emplace_back(static_cast<int>(row), static_cast<int>(it.col()), -c * it.value());
    }
    for (const auto& br : boundary_rows_) {
        const auto b = static_cast<std::ptrdiff_t>(br.node);
        trip.emplace_back(static_cast<int>(b), static_cast<int>(b), 1.0);
        trip.emplace_back(static_cast<int>(b), static_cast<int>(b + br.step), -2.0);
        trip.emplace_back(static_cast<int>(b), static_cast<int>(b + 2 * br.step), 1.0);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();

    if (!factor_) factor_ = std::make_unique<Factor>();
    factor_->lu.analyzePattern(a);
    factor_->lu.factorize(a);
    if (factor_->lu.info() != Eigen::Success) throw NumericalError("stepper: sparse LU factorization failed");
    factor_k_ = key;
    return *factor_;
}

void ThetaStepper::step(int k, std::span<const double> decayed_next, std::span<const double> driver,
                        std::span<double> out) {
    const std::size_t n = lattice_.size();
    if (decayed_next.size() != n || driver.size() != n || out.size() != n)
        throw ConfigError("stepper: slice size mismatch");
    for (std::size_t e = 0; e < n; ++e) rhs_[e] = decayed_next[e] + dt_ * driver[e];
    if (grid_.theta < 1.0) {
        const GeneratorMatrix& next = generator(k + 1);
        const double c = (1.0 - grid_.theta) * dt_;
        Eigen::Map<const Eigen::VectorXd> u(decayed_next.data(), static_cast<Eigen::Index>(n));
        const Eigen::VectorXd lu = next.op * u;
        for (std::size_t e = 0; e < n; ++e) rhs_[e] += c * lu[static_cast<Eigen::Index>(e)];
    }
    for (const auto& br : boundary_rows_) rhs_[br.node] = 0.0;

    Factor& f = factor(k);
    Eigen::Map<const Eigen::VectorXd> rhs(rhs_.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::VectorXd> w(out.data(), static_cast<Eigen::Index>(n));
    w = f.lu.solve(rhs);
    if (f.lu.info() != Eigen::Success) throw NumericalError("stepper: sparse solve failed");
    for (double v : out)
        if (!std::isfinite(v)) throw NumericalError("stepper: non-finite value after time step");
}

}  // namespace oswitch
