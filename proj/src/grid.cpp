#include "oswitch/grid.hpp"

#include <algorithm>
#include <cmath>

#include "oswitch/error.hpp"

namespace oswitch {

const char* to_string(BoundaryPolicy p) {
    return p == BoundaryPolicy::LinearExtrapolation ? "linear-extrapolation" : "zero-second-derivative";
}

double GridSpec::dx(int q) const {
    const auto [lo, hi] = box[static_cast<std::size_t>(q)];
    return (hi - lo) / (nodes[static_cast<std::size_t>(q)] - 1);
}

std::size_t GridSpec::node_count() const {
    std::size_t n = 1;
    for (int c : nodes) n *= static_cast<std::size_t>(c);
    return n;
}

void GridSpec::validate(int k) const {
    if (k < 1) throw ConfigError("grid: state dimension must be at least 1");
    if (k > kMaxStateDim) {
        throw CapExceeded("grid: state dimension " + std::to_string(k) + " outside 1.." +
                          std::to_string(kMaxStateDim));
    }
    if (static_cast<int>(box.size()) != k || static_cast<int>(nodes.size()) != k) {
        throw ConfigError("grid: box and nodes need one entry per state dimension");
    }
    double cap = 1.0;
    for (int q = 0; q < k; ++q) {
        const auto [lo, hi] = box[static_cast<std::size_t>(q)];
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw ConfigError("grid: need lo < hi in dimension " + std::to_string(q + 1));
        if (nodes[static_cast<std::size_t>(q)] < 3) throw ConfigError("grid: at least 3 nodes per dimension");
        if (!(dx(q) > 0.0)) throw ConfigError("grid: degenerate spacing");
        cap *= nodes[static_cast<std::size_t>(q)];
    }
    if (cap > static_cast<double>(max_nodes)) {
        throw CapExceeded("grid: " + std::to_string(static_cast<long long>(cap)) +
                          " nodes exceed the cap of " + std::to_string(max_nodes));
    }
    if (n_time < 1) throw ConfigError("grid: n_time must be at least 1");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("grid: theta must lie in [0, 1]");
}

Lattice::Lattice(const GridSpec& grid) : k_(grid.k()) {
    grid.validate(k_);
    size_ = 1;
    for (int q = 0; q < k_; ++q) {
        n_.push_back(grid.nodes[static_cast<std::size_t>(q)]);
        stride_.push_back(size_);
        size_ *= static_cast<std::size_t>(n_.back());
        lo_.push_back(grid.box[static_cast<std::size_t>(q)].first);
        hi_.push_back(grid.box[static_cast<std::size_t>(q)].second);
        dx_.push_back(grid.dx(q));
    }
}

std::vector<double> Lattice::coords(std::size_t node) const {
    std::vector<double> x(static_cast<std::size_t>(k_));
    for (int q = 0; q < k_; ++q) x[static_cast<std::size_t>(q)] = coord(node, q);
    return x;
}

bool Lattice::on_boundary(std::size_t node) const {
    for (int q = 0; q < k_; ++q)
        if (on_boundary(node, q)) return true;
    return false;
}

std::size_t Lattice::nearest(std::span<const double> x) const {
    std::size_t node = 0;
    for (int q = 0; q < k_; ++q) {
        const double s = (x[static_cast<std::size_t>(q)] - lo(q)) / dx(q);
        const int j = std::clamp(static_cast<int>(std::lround(s)), 0, extent(q) - 1);
        node += static_cast<std::size_t>(j) * stride(q);
    }
    return node;
}

GeneratorMatrix build_generator(const DiffusionSpec& diffusion, const GridSpec& grid, double t) {
    const Lattice lat(grid);
    const int k = lat.k();
    const int d = diffusion.d;
    if (diffusion.k != k) throw ConfigError("generator: grid and diffusion dimensions differ");
    const Dims dims = diffusion.drift.front().dims();

    GeneratorMatrix gen;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(lat.size() * static_cast<std::size_t>(1 + 2 * k + 2 * k * k));
    std::vector<double> slots(static_cast<std::size_t>(dims.slot_count()), 0.0);
    std::vector<double> b(static_cast<std::size_t>(k)), sig(static_cast<std::size_t>(k * d));
    std::vector<double> a(static_cast<std::size_t>(k * k));

    for (std::size_t node = 0; node < lat.size(); ++node) {
        slots[0] = t;
        for (int q = 0; q < k; ++q) slots[static_cast<std::size_t>(dims.x_slot(q))] = lat.coord(node, q);
        for (int q = 0; q < k; ++q) b[static_cast<std::size_t>(q)] = diffusion.drift[static_cast<std::size_t>(q)].evaluate(slots);
        for (int e = 0; e < k * d; ++e) sig[static_cast<std::size_t>(e)] = diffusion.sigma[static_cast<std::size_t>(e)].evaluate(slots);
        for (int q = 0; q < k; ++q) {
            for (int r = 0; r < k; ++r) {
                double s = 0.0;
                for (int c = 0; c < d; ++c) s += sig[static_cast<std::size_t>(q * d + c)] * sig[static_cast<std::size_t>(r * d + c)];
                a[static_cast<std::size_t>(q * k + r)] = s;
            }
        }

        // Accumulates off-diagonal weights; the diagonal closes the row sum.
        std::vector<std::pair<std::size_t, double>> row;
        auto add = [&](std::size_t col, double w) {
            if (w == 0.0) return;
            for (auto& [c, v] : row) {
                if (c == col) {
                    v += w;
                    return;
                }
            }
            row.emplace_back(col, w);
        };
        for (int q = 0; q < k; ++q) {
            const std::size_t sq = lat.stride(q);
            const int jq = lat.index_along(node, q);
            const bool interior = !lat.on_boundary(node, q);
            const double h = lat.dx(q);
            if (interior) {
                const double w = 0.5 * a[static_cast<std::size_t>(q * k + q)] / (h * h);
                add(node + sq, w);
                add(node - sq, w);
            }
            const double bq = b[static_cast<std::size_t>(q)];
            if (bq > 0.0 && jq < lat.extent(q) - 1) add(node + sq, bq / h);
            if (bq < 0.0 && jq > 0) add(node - sq, -bq / h);
        }
        for (int q = 0; q < k; ++q) {
            for (int r = q + 1; r < k; ++r) {
                const double aqr = a[static_cast<std::size_t>(q * k + r)];
                if (aqr == 0.0 || lat.on_boundary(node, q) || lat.on_boundary(node, r)) continue;
                const std::size_t sq = lat.stride(q), sr = lat.stride(r);
                const double w = std::abs(aqr) / (2.0 * lat.dx(q) * lat.dx(r));
                if (aqr > 0.0) {
                    add(node + sq + sr, w);
                    add(node - sq - sr, w);
                } else {
                    add(node + sq - sr, w);
                    add(node - sq + sr, w);
                }
                add(node + sq, -w);
                add(node - sq, -w);
                add(node + sr, -w);
                add(node - sr, -w);
            }
        }
        double diag = 0.0;
        for (const auto& [c, v] : row) {
            if (v == 0.0) continue;
            trip.emplace_back(static_cast<int>(node), static_cast<int>(c), v);
            diag -= v;
            if (v < 0.0) {
                gen.positive_coefficients = false;
                ++gen.negative_entries;
            }
        }
        if (diag != 0.0) trip.emplace_back(static_cast<int>(node), static_cast<int>(node), diag);
    }
    const auto n = static_cast<Eigen::Index>(lat.size());
    gen.op.resize(n, n);
    gen.op.setFromTriplets(trip.begin(), trip.end());
    gen.op.prune(0.0);
    gen.op.makeCompressed();
    return gen;
}

std::vector<double> gradient_field(std::span<const double> field, const GridSpec& grid,
                                   const DiffusionSpec& diffusion, double t) {
    const Lattice lat(grid);
    const int k = lat.k();
    const int d = diffusion.d;
    if (field.size() != lat.size()) throw ConfigError("gradient_field: field size mismatch");
    const Dims dims = diffusion.drift.front().dims();
    std::vector<double> z(lat.size() * static_cast<std::size_t>(d), 0.0);
    if (!diffusion.has_diffusion()) return z;

    std::vector<double> slots(static_cast<std::size_t>(dims.slot_count()), 0.0);
    std::vector<double> grad(static_cast<std::size_t>(k));
    for (std::size_t node = 0; node < lat.size(); ++node) {
        for (int q = 0; q < k; ++q) {
            const std::size_t s = lat.stride(q);
            const int j = lat.index_along(node, q);
            const double h = lat.dx(q);
            double g;
            if (j == 0) g = (field[node + s] - field[node]) / h;
            else if (j == lat.extent(q) - 1) g = (field[node] - field[node - s]) / h;
            else g = (field[node + s] - field[node - s]) / (2.0 * h);
            grad[static_cast<std::size_t>(q)] = g;
        }
        slots[0] = t;
        for (int q = 0; q < k; ++q) slots[static_cast<std::size_t>(dims.x_slot(q))] = lat.coord(node, q);
        for (int r = 0; r < d; ++r) {
            double acc = 0.0;
            for (int q = 0; q < k; ++q) {
                const Expression& e = diffusion.sigma_at(q, r);
                if (e.is_zero_literal()) continue;
                acc += e.evaluate(slots) * grad[static_cast<std::size_t>(q)];
            }
            z[node * static_cast<std::size_t>(d) + static_cast<std::size_t>(r)] = acc;
        }
    }
    return z;
}

ValueFields::ValueFields(GridSpec g, int modes, double T) : grid(std::move(g)), m(modes), horizon(T) {
    grid.validate(grid.k());
    const std::size_t n = grid.node_count() * static_cast<std::size_t>(m);
    times.resize(static_cast<std::size_t>(grid.n_time) + 1);
    for (int s = 0; s <= grid.n_time; ++s) times[static_cast<std::size_t>(s)] = T * s / grid.n_time;
    times.back() = T;
    data.assign(times.size(), std::vector<double>(n, 0.0));
}

ValueFields ValueFields::decimated(int r) const {
    if (r < 1) throw ConfigError("decimated: stride must be at least 1");
    ValueFields out;
    out.grid = grid;
    out.m = m;
    out.horizon = horizon;
    std::vector<std::size_t> keep;
    for (std::size_t s = slices(); s-- > 0;) {
        if ((slices() - 1 - s) % static_cast<std::size_t>(r) == 0 || s == 0) keep.push_back(s);
    }
    std::reverse(keep.begin(), keep.end());
    for (std::size_t s : keep) {
        out.times.push_back(times[s]);
        out.data.push_back(data[s]);
    }
    return out;
}

bool ValueFields::all_finite() const {
    for (const auto& slice : data)
        for (double v : slice)
            if (!std::isfinite(v)) return false;
    return true;
}

double sup_distance(const ValueFields& a, const ValueFields& b) {
    if (a.data.size() != b.data.size()) throw ConfigError("sup_distance: slice counts differ");
    double best = 0.0;
    for (std::size_t s = 0; s < a.data.size(); ++s) {
        if (a.data[s].size() != b.data[s].size()) throw ConfigError("sup_distance: slice sizes differ");
        for (std::size_t e = 0; e < a.data[s].size(); ++e)
            best = std::max(best, std::abs(a.data[s][e] - b.data[s][e]));
    }
    return best;
}

FieldInterpolator::FieldInterpolator(const ValueFields& fields) : f_(fields), lat_(fields.grid) {}

double FieldInterpolator::at_slice(std::size_t slice, int i, const int* base, const double* frac) const {
    const int k = lat_.k();
    double acc = 0.0;
    for (int corner = 0; corner < (1 << k); ++corner) {
        double w = 1.0;
        std::size_t node = 0;
        for (int q = 0; q < k; ++q) {
            const bool up = (corner >> q) & 1;
            w *= up ? frac[q] : 1.0 - frac[q];
            node += static_cast<std::size_t>(base[q] + (up ? 1 : 0)) * lat_.stride(q);
        }
        if (w != 0.0) acc += w * f_.value(slice, i, node);
    }
    return acc;
}

Interpolated FieldInterpolator::operator()(int i, double t, std::span<const double> x) const {
    const int k = lat_.k();
    Interpolated out;
    int base[kMaxStateDim];
    double frac[kMaxStateDim];
    for (int q = 0; q < k; ++q) {
        double xq = x[static_cast<std::size_t>(q)];
        if (xq < lat_.lo(q) || xq > lat_.hi(q)) {
            out.clamped = true;
            xq = std::clamp(xq, lat_.lo(q), lat_.hi(q));
        }
        double s = (xq - lat_.lo(q)) / lat_.dx(q);
        if (std::abs(s - std::round(s)) <= 1e-9) s = std::round(s);  // node queries return the stored value
        const int j = std::max(std::min(static_cast<int>(std::floor(s)), lat_.extent(q) - 2), 0);
        base[q] = j;
        frac[q] = std::clamp(s - j, 0.0, 1.0);
    }
    const auto& times = f_.times;
    t = std::clamp(t, times.front(), times.back());
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t s1 = static_cast<std::size_t>(it - times.begin());
    if (s1 >= times.size()) s1 = times.size() - 1;
    const std::size_t s0 = s1 == 0 ? 0 : s1 - 1;
    if (s0 == s1) {
        out.value = at_slice(s1, i, base, frac);
        return out;
    }
    if (times[s0] == t) {
        out.value = at_slice(s0, i, base, frac);
        return out;
    }
    const double v0 = at_slice(s0, i, base, frac);
    const double v1 = at_slice(s1, i, base, frac);
    const double w = (t - times[s0]) / (times[s1] - times[s0]);
    out.value = (1.0 - w) * v0 + w * v1;
    return out;
}

Interpolated interpolate(const ValueFields& fields, int i, double t, std::span<const double> x) {
    return FieldInterpolator(fields)(i, t, x);
}

}  // namespace oswitch
