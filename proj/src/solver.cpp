#include "oswitch/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "oswitch/error.hpp"
#include "oswitch/stepper.hpp"

namespace oswitch {

const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::Picard: return "picard";
        case Scheme::Increasing: return "increasing";
        case Scheme::Decreasing: return "decreasing";
    }
    return "?";
}

std::optional<Scheme> scheme_from_string(const std::string& name) {
    if (name == "picard") return Scheme::Picard;
    if (name == "increasing") return Scheme::Increasing;
    if (name == "decreasing") return Scheme::Decreasing;
    return std::nullopt;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

constexpr double kInnerRel = 1e-13;
constexpr int kInnerMax = 100;

MonotonicityReport probe_classes(const SwitchingModel& model, const GridSpec& grid) {
    AuditConfig cfg;
    cfg.state_box = grid.box;
    return classify_monotonicity(model, probe_box_for(model, cfg), 400, cfg.seed);
}

// Shared discretization state for one (model, grid) pair.
class Discrete {
public:
    Discrete(const SwitchingModel& mdl, const GridSpec& g)
        : model(mdl), grid(g), st(mdl.diffusion(), g, mdl.horizon(), mdl.reaction_rate()),
          lat(st.lattice()), N(lat.size()), m(mdl.modes()), n(g.n_time), dims(mdl.dims()) {
        if (g.k() != dims.k) throw ConfigError("solver: grid dimension differs from the model's");
        slots.assign(static_cast<std::size_t>(dims.slot_count()), 0.0);
        xs.resize(N * static_cast<std::size_t>(dims.k));
        for (std::size_t node = 0; node < N; ++node)
            for (int q = 0; q < dims.k; ++q)
                xs[node * static_cast<std::size_t>(dims.k) + static_cast<std::size_t>(q)] = lat.coord(node, q);
        terminal.resize(static_cast<std::size_t>(m) * N);
        for (int i = 0; i < m; ++i) {
            for (std::size_t node = 0; node < N; ++node) {
                load_state(mdl.horizon(), node);
                terminal[static_cast<std::size_t>(i) * N + node] = mdl.terminal(i).evaluate(slots);
            }
        }
        any_z = mdl.profit_depends_on_gradient();
        for (int i = 0; i < m; ++i) own_y.push_back(mdl.profit_depends_on(i, i));
        costs.resize(static_cast<std::size_t>(n) + 1);
    }

    const SwitchingModel& model;
    GridSpec grid;
    ThetaStepper st;
    const Lattice& lat;
    std::size_t N;
    int m;
    int n;
    Dims dims;
    std::vector<double> xs;
    std::vector<double> terminal;
    bool any_z = false;
    std::vector<bool> own_y;
    std::vector<double> slots;
    std::vector<std::vector<double>> costs;

    void load_state(double t, std::size_t node) {
        std::fill(slots.begin(), slots.end(), 0.0);
        slots[0] = t;
        for (int q = 0; q < dims.k; ++q)
            slots[static_cast<std::size_t>(dims.x_slot(q))] = xs[node * static_cast<std::size_t>(dims.k) + static_cast<std::size_t>(q)];
    }

    std::span<const double> terminal_of(int i) const {
        return {terminal.data() + static_cast<std::size_t>(i) * N, N};
    }

    const std::vector<double>& cost_slice(int k) {
        auto& c = costs[static_cast<std::size_t>(k)];
        if (!c.empty()) return c;
        c.assign(static_cast<std::size_t>(m * m) * N, 0.0);
        const double t = st.time(k);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                if (i == j) continue;
                for (std::size_t node = 0; node < N; ++node) {
                    load_state(t, node);
                    c[static_cast<std::size_t>(i * m + j) * N + node] = model.cost(i, j).evaluate(slots);
                }
            }
        return c;
    }

    double cost(const std::vector<double>& c, int i, int j, std::size_t node) const {
        return c[static_cast<std::size_t>(i * m + j) * N + node];
    }

    // z argument lagged from the decayed next slice; empty when no driver uses z.
    std::vector<double> lagged_z(int k, std::span<const double> decayed_next) const {
        if (!any_z) return {};
        return gradient_field(decayed_next, grid, model.diffusion(), st.time(k));
    }

    void eval(int k, std::size_t node, const std::vector<const double*>& y,
              const std::vector<double>& z) {
        load_state(st.time(k), node);
        for (int j = 0; j < m; ++j)
            if (y[static_cast<std::size_t>(j)])
                slots[static_cast<std::size_t>(dims.y_slot(j))] = y[static_cast<std::size_t>(j)][node];
        if (!z.empty())
            for (int r = 0; r < dims.d; ++r)
                slots[static_cast<std::size_t>(dims.z_slot(r))] = z[node * static_cast<std::size_t>(dims.d) + static_cast<std::size_t>(r)];
    }

    void driver(int i, int k, const std::vector<const double*>& y, const std::vector<double>& z,
                std::vector<double>& out) {
        out.resize(N);
        const Expression& f = model.profit(i);
        if (f.is_constant()) {
            load_state(st.time(k), 0);
            const double c = f.evaluate(slots);
            std::fill(out.begin(), out.end(), c);
            return;
        }
        for (std::size_t node = 0; node < N; ++node) {
            eval(k, node, y, z);
            out[node] = f.evaluate(slots);
        }
    }

    std::vector<double> decayed(std::span<const double> next) const {
        std::vector<double> u(next.begin(), next.end());
        const double a = st.decay();
        if (a != 1.0)
            for (double& v : u) v *= a;
        return u;
    }

    ValueFields blank() const {
        ValueFields f(grid, m, model.horizon());
        std::copy(terminal.begin(), terminal.end(), f.data.back().begin());
        return f;
    }

    // Cyclic projection v_i <- max(v_i, max_{j != i}(v_j - g_ij)) until stable.
    void project(int k, std::vector<double>& slice, double tol_inner) {
        const auto& c = cost_slice(k);
        const int passes = m * m;
        for (int pass = 0; pass < passes; ++pass) {
            bool changed = false;
            for (int i = 0; i < m; ++i) {
                double* vi = slice.data() + static_cast<std::size_t>(i) * N;
                for (std::size_t node = 0; node < N; ++node) {
                    double best = -HUGE_VAL;
                    for (int j = 0; j < m; ++j) {
                        if (j == i) continue;
                        best = std::max(best, slice[static_cast<std::size_t>(j) * N + node] - cost(c, i, j, node));
                    }
                    if (best > vi[node] + tol_inner) {
                        vi[node] = best;
                        changed = true;
                    }
                }
            }
            if (!changed) return;
        }
        throw FreeLoopError("obstacle projection did not stabilize within " + std::to_string(passes) +
                            " passes at t=" + std::to_string(st.time(k)) +
                            "; the costs admit a free loop");
    }

    ValueFields phi(const ValueFields& frozen, double tol_inner) {
        if (frozen.slices() != static_cast<std::size_t>(n) + 1 || frozen.m != m || frozen.node_count() != N)
            throw ConfigError("phi_step: frozen fields do not match the grid");
        ValueFields out = blank();
        std::vector<double> drv;
        std::vector<const double*> y(static_cast<std::size_t>(m));
        for (int k = n - 1; k >= 0; --k) {
            for (int j = 0; j < m; ++j) y[static_cast<std::size_t>(j)] = frozen.mode(static_cast<std::size_t>(k), j).data();
            for (int i = 0; i < m; ++i) {
                const auto u = decayed(out.mode(static_cast<std::size_t>(k) + 1, i));
                const auto z = lagged_z(k, u);
                driver(i, k, y, z, drv);
                st.step(k, u, drv, out.mode(static_cast<std::size_t>(k), i));
            }
            project(k, out.data[static_cast<std::size_t>(k)], tol_inner);
        }
        return out;
    }
};

long count_below(const ValueFields& cur, const ValueFields& prev, double slack) {
    long c = 0;
    for (std::size_t s = 0; s < cur.data.size(); ++s)
        for (std::size_t e = 0; e < cur.data[s].size(); ++e)
            if (cur.data[s][e] < prev.data[s][e] - slack) ++c;
    return c;
}

void finish_report(IterationReport& rep) {
    for (const auto& r : rep.iterations) {
        rep.violations += r.violations;
        if (r.n >= 4 && r.ratio) rep.rho = std::max(rep.rho.value_or(0.0), *r.ratio);
    }
}

void record(IterationReport& rep, int n, double delta, long violations, Clock::time_point t0) {
    IterationRecord r;
    r.n = n;
    r.delta = delta;
    if (!rep.iterations.empty() && rep.iterations.back().delta > 0.0) r.ratio = delta / rep.iterations.back().delta;
    r.violations = violations;
    r.wall_ms = ms_since(t0);
    rep.iterations.push_back(r);
}

ValueFields initial_fields(Discrete& D, const SwitchingModel& model, const GridSpec& grid, InitKind init) {
    switch (init) {
        case InitKind::LowerBound: return solve_unreflected_bound(model, grid, Bound::Lower);
        case InitKind::UpperBound: return solve_unreflected_bound(model, grid, Bound::Upper);
        case InitKind::Zero: break;
    }
    ValueFields f(grid, D.m, model.horizon());
    return f;
}

SolveResult picard_core(Discrete& D, ValueFields start, const SolverOptions& opts, const char* name,
                        const std::function<void(int, const ValueFields&)>& visit = {}) {
    SolveResult res;
    res.report.scheme = name;
    ValueFields prev = std::move(start);
    if (visit) visit(0, prev);
    for (int it = 1; it <= opts.max_iter; ++it) {
        const auto t0 = Clock::now();
        ValueFields cur = D.phi(prev, opts.tol_inner);
        const double delta = sup_distance(cur, prev);
        record(res.report, it, delta, 0, t0);
        if (visit) visit(it, cur);
        prev = std::move(cur);
        if (delta <= opts.tol) {
            res.report.converged = true;
            break;
        }
    }
    res.fields = std::move(prev);
    finish_report(res.report);
    return res;
}

}  // namespace

SwitchingModel exponential_transform(const SwitchingModel& model, double lambda) {
    if (!std::isfinite(lambda)) throw ConfigError("exponential_transform: lambda must be finite");
    if (lambda == 0.0) return model;
    const Dims& dims = model.dims();
    const int m = model.modes();
    const Expression t = Expression::variable(dims.t_slot(), dims);
    const Expression up = exp(Expression::literal(lambda, dims) * t);
    const Expression down = exp(Expression::literal(-lambda, dims) * t);

    std::vector<Expression> profit;
    for (int i = 0; i < m; ++i) {
        const Expression& f = model.profit(i);
        if (f.is_zero_literal()) {
            profit.push_back(f);
            continue;
        }
        const Expression scaled = f.substitute([&](int slot) -> std::optional<Expression> {
            const bool y = slot >= dims.y_slot(0) && slot < dims.y_slot(0) + dims.m;
            const bool z = slot >= dims.z_slot(0) && slot < dims.z_slot(0) + dims.d;
            if (y || z) return down * Expression::variable(slot, dims);
            return std::nullopt;
        });
        profit.push_back(up * scaled);
    }
    std::vector<std::vector<Expression>> costs(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const Expression& g = model.cost(i, j);
            costs[static_cast<std::size_t>(i)].push_back(i == j || g.is_zero_literal() ? g : up * g);
        }
    std::vector<Expression> terminal;
    const Expression endf = Expression::literal(std::exp(lambda * model.horizon()), dims);
    for (int i = 0; i < m; ++i) {
        const Expression& h = model.terminal(i);
        terminal.push_back(h.is_zero_literal() ? h : endf * h);
    }
    return SwitchingModel::create(model.name(), model.horizon(), model.diffusion(), std::move(profit),
                                  std::move(costs), std::move(terminal), model.reaction_rate() + lambda,
                                  model.transform_lambda() + lambda);
}

ValueFields inverse_transform(ValueFields fields, double lambda) {
    if (lambda == 0.0) return fields;
    for (std::size_t s = 0; s < fields.slices(); ++s) {
        const double a = std::exp(-lambda * fields.times[s]);
        for (double& v : fields.data[s]) v *= a;
    }
    return fields;
}

double default_lambda(const SwitchingModel& model, const GridSpec& grid, Scheme scheme) {
    if (scheme == Scheme::Picard) return 0.0;
    const double cf = probe_classes(model, grid).lipschitz_y;
    const double mag = model.modes() * cf + 1.0;
    return scheme == Scheme::Increasing ? -mag : mag;
}

ValueFields solve_unreflected_bound(const SwitchingModel& model, const GridSpec& grid, Bound which) {
    Discrete D(model, grid);
    const int m = D.m;
    const std::size_t N = D.N;
    const MonotonicityReport mono = probe_classes(model, grid);

    // lower_arg[i][j]: in the upper driver, y_j of f_i is taken from the lower bound.
    std::vector<char> swap_arg(static_cast<std::size_t>(m * m), 0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j && mono.at(i, j) == Direction::Nonincreasing) swap_arg[static_cast<std::size_t>(i * m + j)] = 1;
    const bool coupled = model.profit_depends_on_values();

    std::vector<double> U(N), L(N);
    for (std::size_t node = 0; node < N; ++node) {
        double hi = -HUGE_VAL, lo = HUGE_VAL;
        for (int i = 0; i < m; ++i) {
            hi = std::max(hi, D.terminal_of(i)[node]);
            lo = std::min(lo, D.terminal_of(i)[node]);
        }
        U[node] = hi;
        L[node] = lo;
    }
    ValueFields out(grid, m, model.horizon());
    auto store = [&](int k, const std::vector<double>& v) {
        for (int i = 0; i < m; ++i) std::copy(v.begin(), v.end(), out.mode(static_cast<std::size_t>(k), i).begin());
    };
    store(D.n, which == Bound::Upper ? U : L);

    std::vector<double> dU(N), dL(N), nU(N), nL(N), tmp;
    std::vector<const double*> yU(static_cast<std::size_t>(m)), yL(static_cast<std::size_t>(m));
    for (int k = D.n - 1; k >= 0; --k) {
        const auto uu = D.decayed(U);
        const auto ul = D.decayed(L);
        const auto zU = D.lagged_z(k, uu);
        const auto zL = D.lagged_z(k, ul);
        std::vector<double> wU = U, wL = L;
        for (int it = 0; it < kInnerMax; ++it) {
            std::fill(dU.begin(), dU.end(), -HUGE_VAL);
            std::fill(dL.begin(), dL.end(), HUGE_VAL);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < m; ++j) {
                    const bool sw = swap_arg[static_cast<std::size_t>(i * m + j)] != 0;
                    yU[static_cast<std::size_t>(j)] = sw ? wL.data() : wU.data();
                    yL[static_cast<std::size_t>(j)] = sw ? wU.data() : wL.data();
                }
                D.driver(i, k, yU, zU, tmp);
                for (std::size_t e = 0; e < N; ++e) dU[e] = std::max(dU[e], tmp[e]);
                D.driver(i, k, yL, zL, tmp);
                for (std::size_t e = 0; e < N; ++e) dL[e] = std::min(dL[e], tmp[e]);
            }
            D.st.step(k, uu, dU, nU);
            D.st.step(k, ul, dL, nL);
            double diff = 0.0, scale = 1.0;
            for (std::size_t e = 0; e < N; ++e) {
                diff = std::max({diff, std::abs(nU[e] - wU[e]), std::abs(nL[e] - wL[e])});
                scale = std::max({scale, std::abs(nU[e]), std::abs(nL[e])});
            }
            wU.swap(nU);
            wL.swap(nL);
            if (!coupled || diff <= kInnerRel * scale) break;
        }
        U.swap(wU);
        L.swap(wL);
        store(k, which == Bound::Upper ? U : L);
    }
    return out;
}

ValueFields phi_step(const SwitchingModel& model, const GridSpec& grid, const ValueFields& frozen,
                     const SolverOptions& opts) {
    Discrete D(model, grid);
    return D.phi(frozen, opts.tol_inner);
}

SolveResult picard_solve(const SwitchingModel& model, const GridSpec& grid, const SolverOptions& opts,
                         InitKind init) {
    Discrete D(model, grid);
    return picard_core(D, initial_fields(D, model, grid, init), opts, "picard");
}

SolveResult monotone_increasing_solve(const SwitchingModel& model, const GridSpec& grid,
                                      const SolverOptions& opts) {
    Discrete D(model, grid);
    const int m = D.m;
    const std::size_t N = D.N;
    SolveResult res;
    res.report.scheme = "increasing";
    ValueFields prev = solve_unreflected_bound(model, grid, Bound::Lower);

    std::vector<double> drv, obstacle(N), w(N), w2(N);
    std::vector<const double*> y(static_cast<std::size_t>(m));
    for (int it = 1; it <= opts.max_iter; ++it) {
        const auto t0 = Clock::now();
        ValueFields cur = D.blank();
        for (int k = D.n - 1; k >= 0; --k) {
            const auto ks = static_cast<std::size_t>(k);
            const auto& c = D.cost_slice(k);
            for (int i = 0; i < m; ++i) {
                for (std::size_t node = 0; node < N; ++node) {
                    double best = -HUGE_VAL;
                    for (int j = 0; j < m; ++j)
                        if (j != i) best = std::max(best, prev.value(ks, j, node) - D.cost(c, i, j, node));
                    obstacle[node] = best;
                }
                for (int j = 0; j < m; ++j) y[static_cast<std::size_t>(j)] = prev.mode(ks, j).data();
                y[static_cast<std::size_t>(i)] = w.data();
                const auto u = D.decayed(cur.mode(ks + 1, i));
                const auto z = D.lagged_z(k, u);
                const auto pv = prev.mode(ks, i);
                std::copy(pv.begin(), pv.end(), w.begin());
                for (int inner = 0; inner < kInnerMax; ++inner) {
                    D.driver(i, k, y, z, drv);
                    D.st.step(k, u, drv, w2);
                    double diff = 0.0, scale = 1.0;
                    for (std::size_t e = 0; e < N; ++e) {
                        w2[e] = std::max(w2[e], obstacle[e]);
                        diff = std::max(diff, std::abs(w2[e] - w[e]));
                        scale = std::max(scale, std::abs(w2[e]));
                    }
                    w.swap(w2);
                    y[static_cast<std::size_t>(i)] = w.data();
                    if (!D.own_y[static_cast<std::size_t>(i)] || diff <= kInnerRel * scale) break;
                }
                std::copy(w.begin(), w.end(), cur.mode(ks, i).begin());
            }
        }
        const double delta = sup_distance(cur, prev);
        const long viol = count_below(cur, prev, opts.order_tol);
        record(res.report, it, delta, viol, t0);
        prev = std::move(cur);
        if (delta <= opts.tol) {
            res.report.converged = true;
            break;
        }
    }
    // Same-generation projection so the limit is obstacle-feasible, not just lagged-feasible.
    for (int k = 0; k < D.n; ++k) D.project(k, prev.data[static_cast<std::size_t>(k)], opts.tol_inner);
    res.fields = std::move(prev);
    finish_report(res.report);
    return res;
}

SolveResult monotone_decreasing_solve(const SwitchingModel& model, const GridSpec& grid,
                                      const SolverOptions& opts) {
    Discrete D(model, grid);
    const ValueFields upper = solve_unreflected_bound(model, grid, Bound::Upper);
    SolveResult res = picard_core(D, upper, opts, "decreasing");

    // Replay the same deterministic iteration and check the odd/even order against the limit.
    SandwichRecord sw;
    const ValueFields& limit = res.fields;
    const int last = static_cast<int>(res.report.iterations.size());
    SolverOptions replay = opts;
    replay.max_iter = last;
    replay.tol = -1.0;
    picard_core(D, upper, replay, "decreasing", [&](int n, const ValueFields& v) {
        long c = 0;
        for (std::size_t s = 0; s < v.data.size(); ++s)
            for (std::size_t e = 0; e < v.data[s].size(); ++e) {
                const double gap = v.data[s][e] - limit.data[s][e];
                const double bad = n % 2 == 1 ? gap : -gap;
                if (bad > opts.order_tol) {
                    ++c;
                    sw.worst = std::max(sw.worst, bad);
                }
            }
        sw.violations.push_back(c);
        sw.total += c;
    });
    for (std::size_t n = 1; n <= res.report.iterations.size() && n < sw.violations.size(); ++n)
        res.report.iterations[n - 1].violations = sw.violations[n];
    res.report.violations = sw.total;
    res.sandwich = std::move(sw);
    return res;
}

SolveResult solve(const SwitchingModel& model, const GridSpec& grid, Scheme scheme,
                  const SolverOptions& opts, std::optional<double> lambda) {
    if (scheme != Scheme::Picard) {
        const MonotonicityReport mono = probe_classes(model, grid);
        const bool ok = scheme == Scheme::Increasing ? mono.admits_increasing() : mono.admits_decreasing();
        if (!ok) {
            throw ConfigError(std::string("scheme '") + to_string(scheme) + "' refused: model class is " +
                              to_string(mono.model_class) +
                              "; use scheme picard, or a model whose drivers are monotone in the other modes' values");
        }
    }
    const double lam = lambda.value_or(default_lambda(model, grid, scheme));
    const SwitchingModel work = exponential_transform(model, lam);
    SolveResult res;
    switch (scheme) {
        case Scheme::Picard: res = picard_solve(work, grid, opts, InitKind::Zero); break;
        case Scheme::Increasing: res = monotone_increasing_solve(work, grid, opts); break;
        case Scheme::Decreasing: res = monotone_decreasing_solve(work, grid, opts); break;
    }
    res.fields = inverse_transform(std::move(res.fields), lam);
    res.report.lambda = lam;
    return res;
}

ResidualReport residual_report(const ValueFields& fields, const SwitchingModel& model, const GridSpec& grid,
                               double flag_tol) {
    Discrete D(model, grid);
    const int m = D.m;
    const std::size_t N = D.N;
    if (fields.slices() != static_cast<std::size_t>(D.n) + 1 || fields.m != m || fields.node_count() != N)
        throw ConfigError("residual_report: fields do not match the grid");
    ResidualReport rep;
    rep.flag_tol = flag_tol;
    const std::size_t total = static_cast<std::size_t>(D.n) * static_cast<std::size_t>(m) * N;
    rep.slack.assign(total, 0.0);
    rep.pde.assign(total, 0.0);
    rep.min_form.assign(total, 0.0);
    rep.defect.assign(total, 0.0);
    rep.min_slack = HUGE_VAL;
    const double dt = D.st.dt();
    const double theta = grid.theta;
    std::vector<const double*> y(static_cast<std::size_t>(m));
    std::vector<double> drv;
    for (int k = 0; k < D.n; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const auto& c = D.cost_slice(k);
        for (int j = 0; j < m; ++j) y[static_cast<std::size_t>(j)] = fields.mode(ks, j).data();
        const auto& gk = D.st.generator(k).op;
        for (int i = 0; i < m; ++i) {
            const auto v = fields.mode(ks, i);
            const auto u = D.decayed(fields.mode(ks + 1, i));
            const auto z = D.lagged_z(k, u);
            D.driver(i, k, y, z, drv);
            Eigen::Map<const Eigen::VectorXd> vv(v.data(), static_cast<Eigen::Index>(N));
            Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(N));
            Eigen::VectorXd lv = theta * (gk * vv);
            if (theta < 1.0) lv += (1.0 - theta) * (D.st.generator(k + 1).op * uv);
            for (std::size_t node = 0; node < N; ++node) {
                if (D.lat.on_boundary(node)) continue;
                double best = -HUGE_VAL;
                for (int j = 0; j < m; ++j)
                    if (j != i) best = std::max(best, fields.value(ks, j, node) - D.cost(c, i, j, node));
                const double s = v[node] - best;
                const double r = (v[node] - u[node]) / dt - lv[static_cast<Eigen::Index>(node)] - drv[node];
                const double mf = std::min(s, r);
                const double df = std::min(std::abs(s), std::abs(r));
                const std::size_t at = (ks * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)) * N + node;
                rep.slack[at] = s;
                rep.pde[at] = r;
                rep.min_form[at] = mf;
                rep.defect[at] = df;
                rep.min_slack = std::min(rep.min_slack, s);
                rep.max_abs_min_form = std::max(rep.max_abs_min_form, std::abs(mf));
                rep.max_defect = std::max(rep.max_defect, df);
                rep.max_scaled_defect = std::max(rep.max_scaled_defect, df / (1.0 + std::abs(v[node])));
                if (std::abs(mf) > flag_tol * (1.0 + std::abs(v[node]))) ++rep.flagged;
                ++rep.checked;
            }
        }
    }
    if (rep.checked == 0) rep.min_slack = 0.0;
    return rep;
}

double obstacle_infeasibility(const ValueFields& fields, const SwitchingModel& model) {
    const int m = model.modes();
    const Lattice lat(fields.grid);
    const Dims& dims = model.dims();
    double worst = 0.0;
    for (std::size_t s = 0; s < fields.slices(); ++s) {
        for (std::size_t node = 0; node < lat.size(); ++node) {
            const auto x = lat.coords(node);
            const auto slots = state_slots(dims, fields.times[s], x);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    if (i == j) continue;
                    const double gap = fields.value(s, j, node) - model.cost(i, j).evaluate(slots) - fields.value(s, i, node);
                    worst = std::max(worst, gap);
                }
        }
    }
    return worst;
}

}  // namespace oswitch
