#include "oswitch/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "oswitch/error.hpp"

namespace oswitch {

ChainKernel build_chain(const DiffusionSpec& diffusion, const GridSpec& grid, double horizon) {
    grid.validate(grid.k());
    ChainKernel ch;
    ch.grid = grid;
    ch.horizon = horizon;
    ch.dt = horizon / grid.n_time;
    ch.time_dependent = diffusion.time_dependent();
    const int count = ch.time_dependent ? grid.n_time : 1;
    for (int k = 0; k < count; ++k) {
        const GeneratorMatrix gen = build_generator(diffusion, grid, ch.time(k));
        if (!gen.positive_coefficients) {
            throw NumericalError("chain: generator has " + std::to_string(gen.negative_entries) +
                                 " negative off-diagonal coefficients; refine the grid along correlated axes");
        }
        const auto n = gen.op.rows();
        double max_rate = 0.0;
        for (Eigen::Index row = 0; row < n; ++row)
            max_rate = std::max(max_rate, -gen.op.coeff(row, row));
        if (ch.dt * max_rate > 1.0) {
            std::ostringstream os;
            os << "chain: CFL violation, dt * max rate = " << ch.dt * max_rate
               << " > 1; increase n_time to at least " << static_cast<long>(std::ceil(horizon * max_rate));
            throw NumericalError(os.str());
        }
        ChainMatrix p(n, n);
        p.setIdentity();
        p += ch.dt * gen.op;
        p.prune(0.0);
        p.makeCompressed();
        for (Eigen::Index row = 0; row < n; ++row) {
            double s = 0.0;
            for (ChainMatrix::InnerIterator it(p, row); it; ++it) {
                if (it.value() < 0.0) throw NumericalError("chain: negative transition probability");
                s += it.value();
            }
            if (std::abs(s - 1.0) > 1e-12) throw NumericalError("chain: row does not sum to 1");
        }
        ch.slices.push_back(std::move(p));
    }
    return ch;
}

ChainMoments chain_moments(const ChainKernel& chain, int k, std::size_t node) {
    const Lattice lat(chain.grid);
    const int d = lat.k();
    ChainMoments out;
    out.mean.assign(static_cast<std::size_t>(d), 0.0);
    out.covariance.assign(static_cast<std::size_t>(d * d), 0.0);
    const auto x0 = lat.coords(node);
    std::vector<double> second(static_cast<std::size_t>(d * d), 0.0);
    for (ChainMatrix::InnerIterator it(chain.at(k), static_cast<Eigen::Index>(node)); it; ++it) {
        const auto x = lat.coords(static_cast<std::size_t>(it.col()));
        for (int q = 0; q < d; ++q) {
            const double dq = x[static_cast<std::size_t>(q)] - x0[static_cast<std::size_t>(q)];
            out.mean[static_cast<std::size_t>(q)] += it.value() * dq;
            for (int r = 0; r < d; ++r)
                second[static_cast<std::size_t>(q * d + r)] +=
                    it.value() * dq * (x[static_cast<std::size_t>(r)] - x0[static_cast<std::size_t>(r)]);
        }
    }
    for (int q = 0; q < d; ++q)
        for (int r = 0; r < d; ++r)
            out.covariance[static_cast<std::size_t>(q * d + r)] =
                second[static_cast<std::size_t>(q * d + r)] - out.mean[static_cast<std::size_t>(q)] * out.mean[static_cast<std::size_t>(r)];
    return out;
}

ValueFields dp_solve(const SwitchingModel& model, const ChainKernel& chain) {
    const Lattice lat(chain.grid);
    const std::size_t N = lat.size();
    const int m = model.modes();
    const int n = chain.n_time();
    const Dims& dims = model.dims();
    if (lat.k() != dims.k) throw ConfigError("dp_solve: chain and model dimensions differ");
    const double decay = std::exp(-model.reaction_rate() * chain.dt);
    const bool any_z = model.profit_depends_on_gradient();

    ValueFields out(chain.grid, m, chain.horizon);
    std::vector<std::vector<double>> xs(N);
    for (std::size_t node = 0; node < N; ++node) xs[node] = lat.coords(node);
    for (int i = 0; i < m; ++i)
        for (std::size_t node = 0; node < N; ++node)
            out.mode(static_cast<std::size_t>(n), i)[node] =
                model.terminal(i).evaluate(state_slots(dims, chain.horizon, xs[node]));

    std::vector<double> slots(static_cast<std::size_t>(dims.slot_count()));
    std::vector<std::vector<double>> u(static_cast<std::size_t>(m), std::vector<double>(N));
    std::vector<std::vector<double>> z(static_cast<std::size_t>(m));
    std::vector<double> g(static_cast<std::size_t>(m * m) * N);
    for (int k = n - 1; k >= 0; --k) {
        const auto ks = static_cast<std::size_t>(k);
        const double t = chain.time(k);
        const ChainMatrix& P = chain.at(k);
        for (int i = 0; i < m; ++i) {
            const auto next = out.mode(ks + 1, i);
            for (std::size_t node = 0; node < N; ++node) u[static_cast<std::size_t>(i)][node] = decay * next[node];
            if (any_z) z[static_cast<std::size_t>(i)] = gradient_field(u[static_cast<std::size_t>(i)], chain.grid, model.diffusion(), t);
        }
        for (int i = 0; i < m; ++i) {
            auto c = out.mode(ks, i);
            const Expression& f = model.profit(i);
            for (std::size_t node = 0; node < N; ++node) {
                double acc = 0.0;
                for (ChainMatrix::InnerIterator it(P, static_cast<Eigen::Index>(node)); it; ++it)
                    acc += it.value() * u[static_cast<std::size_t>(i)][static_cast<std::size_t>(it.col())];
                std::fill(slots.begin(), slots.end(), 0.0);
                slots[0] = t;
                for (int q = 0; q < dims.k; ++q) slots[static_cast<std::size_t>(dims.x_slot(q))] = xs[node][static_cast<std::size_t>(q)];
                for (int j = 0; j < m; ++j) slots[static_cast<std::size_t>(dims.y_slot(j))] = u[static_cast<std::size_t>(j)][node];
                if (any_z)
                    for (int r = 0; r < dims.d; ++r)
                        slots[static_cast<std::size_t>(dims.z_slot(r))] = z[static_cast<std::size_t>(i)][node * static_cast<std::size_t>(dims.d) + static_cast<std::size_t>(r)];
                c[node] = acc + chain.dt * f.evaluate(slots);
            }
        }
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                if (i != j)
                    for (std::size_t node = 0; node < N; ++node)
                        g[static_cast<std::size_t>(i * m + j) * N + node] = model.cost(i, j).evaluate(state_slots(dims, t, xs[node]));
        auto& slice = out.data[ks];
        bool stable = false;
        for (int pass = 0; pass < m * m && !stable; ++pass) {
            stable = true;
            for (int i = 0; i < m; ++i)
                for (std::size_t node = 0; node < N; ++node) {
                    double best = -HUGE_VAL;
                    for (int j = 0; j < m; ++j)
                        if (j != i) best = std::max(best, slice[static_cast<std::size_t>(j) * N + node] - g[static_cast<std::size_t>(i * m + j) * N + node]);
                    double& v = slice[static_cast<std::size_t>(i) * N + node];
                    if (best > v) {
                        v = best;
                        stable = false;
                    }
                }
        }
        if (!stable) throw FreeLoopError("dp_solve: projection did not stabilize at t=" + std::to_string(t));
    }
    return out;
}

std::string EnumerationResult::to_json() const {
    nlohmann::json j;
    j["value"] = value;
    j["mode_path"] = mode_path;
    j["node_path"] = node_path;
    j["evaluations"] = evaluations;
    return j.dump();
}

namespace {

class Enumerator {
public:
    Enumerator(const SwitchingModel& mdl, const ChainKernel& ch, const EnumerationCaps& caps)
        : model(mdl), chain(ch), lat(ch.grid), m(mdl.modes()), n(ch.n_time()), caps_(caps),
          decay(std::exp(-mdl.reaction_rate() * ch.dt)) {
        // Every simple route a0 -> ... -> a, listed per (start, end).
        routes.resize(static_cast<std::size_t>(m * m));
        std::vector<int> path;
        std::vector<char> used(static_cast<std::size_t>(m), 0);
        std::function<void()> dfs = [&] {
            const int last = path.back();
            routes[static_cast<std::size_t>(path.front() * m + last)].push_back(path);
            for (int v = 0; v < m; ++v) {
                if (used[static_cast<std::size_t>(v)]) continue;
                used[static_cast<std::size_t>(v)] = 1;
                path.push_back(v);
                dfs();
                path.pop_back();
                used[static_cast<std::size_t>(v)] = 0;
            }
        };
        for (int s = 0; s < m; ++s) {
            path.assign(1, s);
            used.assign(static_cast<std::size_t>(m), 0);
            used[static_cast<std::size_t>(s)] = 1;
            dfs();
        }
    }

    const SwitchingModel& model;
    const ChainKernel& chain;
    Lattice lat;
    int m, n;
    EnumerationCaps caps_;
    double decay;
    std::vector<std::vector<std::vector<int>>> routes;
    std::uint64_t evaluations = 0;

    std::vector<double> slots_for(int k, std::size_t node) const {
        return state_slots(model.dims(), chain.time(k), lat.coords(node));
    }

    // Largest value of mode a's continuation net of the cheapest-in-value route prev -> a.
    double routed(double cont, int prev, int a, int k, std::size_t node) {
        const auto slots = slots_for(k, node);
        double best = -HUGE_VAL;
        for (const auto& r : routes[static_cast<std::size_t>(prev * m + a)]) {
            double v = cont;
            for (std::size_t e = r.size() - 1; e > 0; --e) v -= model.cost(r[e - 1], r[e]).evaluate(slots);
            best = std::max(best, v);
        }
        return best;
    }

    double held(int k, std::size_t node, int a) {
        const ChainMatrix& P = chain.at(k);
        double acc = 0.0;
        for (ChainMatrix::InnerIterator it(P, static_cast<Eigen::Index>(node)); it; ++it)
            acc += it.value() * (decay * best(k + 1, static_cast<std::size_t>(it.col()), a, nullptr));
        return acc + chain.dt * model.profit(a).evaluate(slots_for(k, node));
    }

    double best(int k, std::size_t node, int prev, int* argmax) {
        if (++evaluations > caps_.max_evaluations) throw CapExceeded("enumerate_strategies: evaluation cap exceeded");
        if (k == n) {
            if (argmax) *argmax = prev;
            return model.terminal(prev).evaluate(state_slots(model.dims(), chain.horizon, lat.coords(node)));
        }
        double out = -HUGE_VAL;
        for (int a = 0; a < m; ++a) {
            const double v = routed(held(k, node, a), prev, a, k, node);
            if (v > out) {
                out = v;
                if (argmax) *argmax = a;
            }
        }
        return out;
    }
};

}  // namespace

EnumerationResult enumerate_strategies(const SwitchingModel& model, const ChainKernel& chain,
                                       std::size_t x0_node, int i0, const EnumerationCaps& caps) {
    if (chain.n_time() > caps.n_time) throw CapExceeded("enumerate_strategies: n_time above cap " + std::to_string(caps.n_time));
    if (model.modes() > caps.modes) throw CapExceeded("enumerate_strategies: m above cap " + std::to_string(caps.modes));
    if (chain.grid.node_count() > caps.nodes) throw CapExceeded("enumerate_strategies: node count above cap " + std::to_string(caps.nodes));
    if (i0 < 1 || i0 > model.modes()) throw ConfigError("enumerate_strategies: initial mode out of range");
    if (x0_node >= chain.grid.node_count()) throw ConfigError("enumerate_strategies: x0 node out of range");

    Enumerator en(model, chain, caps);
    EnumerationResult res;
    int a = -1;
    res.value = en.best(0, x0_node, i0 - 1, &a);
    const std::uint64_t main_evals = en.evaluations;

    std::size_t node = x0_node;
    int prev = i0 - 1;
    for (int k = 0; k < chain.n_time(); ++k) {
        int pick = prev;
        en.best(k, node, prev, &pick);
        res.mode_path.push_back(pick + 1);
        res.node_path.push_back(node);
        std::size_t next = node;
        double pmax = -1.0;
        for (ChainMatrix::InnerIterator it(chain.at(k), static_cast<Eigen::Index>(node)); it; ++it)
            if (it.value() > pmax) {
                pmax = it.value();
                next = static_cast<std::size_t>(it.col());
            }
        node = next;
        prev = pick;
    }
    res.node_path.push_back(node);
    res.evaluations = main_evals;
    return res;
}

}  // namespace oswitch
