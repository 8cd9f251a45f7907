#include "oswitch/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "oswitch/error.hpp"

namespace oswitch {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

PathSet simulate_paths(const DiffusionSpec& diffusion, double horizon, double t0, std::span<const double> x0,
                       int n_paths, int n_steps, std::uint64_t seed) {
    if (n_paths < 1 || n_steps < 1) throw ConfigError("simulate_paths: n_paths and n_steps must be at least 1");
    if (static_cast<int>(x0.size()) != diffusion.k) throw ConfigError("simulate_paths: x0 needs k coordinates");
    if (!(t0 < horizon)) throw ConfigError("simulate_paths: need t0 < T");
    const int k = diffusion.k;
    const int d = diffusion.d;
    const Dims dims = diffusion.drift.front().dims();

    PathSet ps;
    ps.k = k;
    ps.n_paths = n_paths;
    ps.n_steps = n_steps;
    ps.seed = seed;
    ps.t0 = t0;
    ps.horizon = horizon;
    ps.dt = (horizon - t0) / n_steps;
    ps.states.resize(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(n_steps + 1) * static_cast<std::size_t>(k));
    ps.valid.assign(static_cast<std::size_t>(n_paths), 1);

    const double sq = std::sqrt(ps.dt);
    std::vector<double> slots(static_cast<std::size_t>(dims.slot_count()), 0.0);
    std::vector<double> x(static_cast<std::size_t>(k)), b(static_cast<std::size_t>(k)), xi(static_cast<std::size_t>(d));
    for (int p = 0; p < n_paths; ++p) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(p))));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::copy(x0.begin(), x0.end(), x.begin());
        double* out = ps.states.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(n_steps + 1) * static_cast<std::size_t>(k);
        std::copy(x.begin(), x.end(), out);
        bool ok = true;
        for (int s = 0; s < n_steps; ++s) {
            for (int r = 0; r < d; ++r) xi[static_cast<std::size_t>(r)] = normal(rng);
            if (ok) {
                try {
                    slots[0] = ps.time(s);
                    for (int q = 0; q < k; ++q) slots[static_cast<std::size_t>(dims.x_slot(q))] = x[static_cast<std::size_t>(q)];
                    for (int q = 0; q < k; ++q) b[static_cast<std::size_t>(q)] = diffusion.drift[static_cast<std::size_t>(q)].evaluate(slots);
                    std::vector<double> nx(x);
                    for (int q = 0; q < k; ++q) {
                        double dw = 0.0;
                        for (int r = 0; r < d; ++r) {
                            const Expression& e = diffusion.sigma_at(q, r);
                            if (!e.is_zero_literal()) dw += e.evaluate(slots) * xi[static_cast<std::size_t>(r)];
                        }
                        nx[static_cast<std::size_t>(q)] += b[static_cast<std::size_t>(q)] * ps.dt + dw * sq;
                        if (!std::isfinite(nx[static_cast<std::size_t>(q)])) throw DomainError("non-finite state", "path");
                    }
                    x.swap(nx);
                } catch (const DomainError&) {
                    ok = false;
                }
            }
            std::copy(x.begin(), x.end(), out + static_cast<std::size_t>(s + 1) * static_cast<std::size_t>(k));
        }
        if (!ok) {
            ps.valid[static_cast<std::size_t>(p)] = 0;
            ++ps.invalid;
        }
    }
    return ps;
}

Strategy extract_strategy(const ValueFields& fields, const SwitchingModel& model, const PathSet& paths,
                          int p, int i0, const StrategyOptions& opts) {
    const int m = model.modes();
    if (i0 < 1 || i0 > m) throw ConfigError("extract_strategy: initial mode out of range");
    const FieldInterpolator interp(fields);
    const int cap = opts.cap > 0 ? opts.cap : 50 * m;
    Strategy st;
    st.i0 = i0;
    int cur = i0 - 1;
    for (int s = 0; s < paths.n_steps; ++s) {
        const double t = paths.time(s);
        const auto x = paths.state(p, s);
        const auto slots = state_slots(model.dims(), t, x);
        const Interpolated vc = interp(cur, t, x);
        st.clamped = st.clamped || vc.clamped;
        double best = -HUGE_VAL;
        int arg = -1;
        for (int j = 0; j < m; ++j) {
            if (j == cur) continue;
            const double cand = interp(j, t, x).value - model.cost(cur, j).evaluate(slots);
            if (cand > best) {
                best = cand;
                arg = j;
            }
        }
        if (vc.value - best <= 10.0 * opts.tol_obstacle * (1.0 + std::abs(vc.value))) {
            if (static_cast<int>(st.modes.size()) >= cap) {
                st.chattering = true;
                break;
            }
            st.steps.push_back(s);
            st.times.push_back(t);
            st.modes.push_back(arg + 1);
            cur = arg;  // entered at step s: the next decision is at step s + 1
        }
    }
    return st;
}

Strategy fixed_strategy(int i0, std::optional<int> target, int step, const PathSet& paths) {
    Strategy st;
    st.i0 = i0;
    if (target && *target != i0) {
        if (step < 0 || step >= paths.n_steps) throw ConfigError("fixed_strategy: step outside [0, n_steps)");
        st.steps.push_back(step);
        st.times.push_back(paths.time(step));
        st.modes.push_back(*target);
    }
    return st;
}

std::vector<int> mode_indicator(const Strategy& s, int n_steps) {
    std::vector<int> out(static_cast<std::size_t>(n_steps));
    int cur = s.i0;
    std::size_t next = 0;
    for (int k = 0; k < n_steps; ++k) {
        while (next < s.steps.size() && s.steps[next] == k) cur = s.modes[next++];
        out[static_cast<std::size_t>(k)] = cur;
    }
    return out;
}

PayoffEntry evaluate_payoff(const PathSet& paths, int p, const Strategy& strategy, const SwitchingModel& model,
                            const ValueFields* fields) {
    const Dims& dims = model.dims();
    const int m = model.modes();
    const bool need_y = model.profit_depends_on_values();
    const bool need_z = model.profit_depends_on_gradient();
    if ((need_y || need_z) && !fields) throw ConfigError("evaluate_payoff: coupled drivers need solved fields");
    std::optional<FieldInterpolator> interp;
    if (fields) interp.emplace(*fields);
    const double r = model.reaction_rate();
    auto disc = [&](double t) { return r == 0.0 ? 1.0 : std::exp(-r * (t - paths.t0)); };

    PayoffEntry out;
    int cur = strategy.i0 - 1;
    std::size_t next = 0;
    for (int s = 0; s < paths.n_steps; ++s) {
        const double t = paths.time(s);
        const auto x = paths.state(p, s);
        auto slots = state_slots(dims, t, x);
        while (next < strategy.steps.size() && strategy.steps[next] == s) {
            const int to = strategy.modes[next] - 1;
            if (strategy.times[next] < paths.horizon) out.cost += disc(t) * model.cost(cur, to).evaluate(slots);
            cur = to;
            ++next;
        }
        if (need_y)
            for (int j = 0; j < m; ++j) slots[static_cast<std::size_t>(dims.y_slot(j))] = (*interp)(j, t, x).value;
        if (need_z) {
            const Lattice& lat = interp->lattice();
            std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end()), grad(static_cast<std::size_t>(dims.k));
            for (int q = 0; q < dims.k; ++q) {
                const double h = lat.dx(q);
                xp[static_cast<std::size_t>(q)] = x[static_cast<std::size_t>(q)] + h;
                xm[static_cast<std::size_t>(q)] = x[static_cast<std::size_t>(q)] - h;
                grad[static_cast<std::size_t>(q)] = ((*interp)(cur, t, xp).value - (*interp)(cur, t, xm).value) / (2.0 * h);
                xp[static_cast<std::size_t>(q)] = xm[static_cast<std::size_t>(q)] = x[static_cast<std::size_t>(q)];
            }
            for (int rr = 0; rr < dims.d; ++rr) {
                double z = 0.0;
                for (int q = 0; q < dims.k; ++q)
                    z += model.diffusion().sigma_at(q, rr).evaluate(slots) * grad[static_cast<std::size_t>(q)];
                slots[static_cast<std::size_t>(dims.z_slot(rr))] = z;
            }
        }
        out.profit += paths.dt * disc(t) * model.profit(cur).evaluate(slots);
    }
    const auto xT = paths.state(p, paths.n_steps);
    out.terminal = disc(paths.horizon) * model.terminal(cur).evaluate(state_slots(dims, paths.horizon, xT));
    out.total = out.profit - out.cost + out.terminal;
    return out;
}

PayoffSummary summarize(std::span<const double> values) {
    PayoffSummary s;
    s.n = static_cast<int>(values.size());
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / s.n;
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.se = std::sqrt(ss / (s.n - 1) / s.n);
    }
    return s;
}

ComparisonRecord validate_representation(const ValueFields& fields, const SwitchingModel& model, double t0,
                                         std::span<const double> x0, int i0, const McConfig& cfg) {
    const int m = model.modes();
    if (i0 < 1 || i0 > m) throw ConfigError("validate_representation: initial mode out of range");
    ComparisonRecord rec;
    rec.pde_value = interpolate(fields, i0 - 1, t0, x0).value;
    const PathSet paths = simulate_paths(model.diffusion(), model.horizon(), t0, x0, cfg.n_paths, cfg.n_steps, cfg.seed);
    rec.invalid_paths = paths.invalid;

    std::vector<double> ext, never, mid;
    const int mid_step = paths.n_steps / 2;
    const int mid_target = i0 % m + 1;
    StrategyOptions so;
    so.tol_obstacle = cfg.tol_obstacle;
    long switches = 0;
    for (int p = 0; p < paths.n_paths; ++p) {
        if (!paths.valid[static_cast<std::size_t>(p)]) continue;
        try {
            const Strategy s = extract_strategy(fields, model, paths, p, i0, so);
            if (s.chattering) ++rec.chattering_paths;
            if (s.clamped) ++rec.clamped_paths;
            switches += static_cast<long>(s.modes.size());
            ext.push_back(evaluate_payoff(paths, p, s, model, &fields).total);
            never.push_back(evaluate_payoff(paths, p, fixed_strategy(i0, std::nullopt, 0, paths), model, &fields).total);
            mid.push_back(evaluate_payoff(paths, p, fixed_strategy(i0, mid_target, mid_step, paths), model, &fields).total);
        } catch (const DomainError&) {
            ++rec.invalid_paths;
        }
    }
    rec.valid_paths = static_cast<int>(ext.size());
    rec.extracted = summarize(ext);
    rec.never_switch = summarize(never);
    rec.midpoint_switch = summarize(mid);
    rec.mean_switches = ext.empty() ? 0.0 : static_cast<double>(switches) / static_cast<double>(ext.size());

    double dx2 = 0.0;
    for (int q = 0; q < fields.grid.k(); ++q) dx2 = std::max(dx2, fields.grid.dx(q) * fields.grid.dx(q));
    const double dt = std::max(model.horizon() / fields.grid.n_time, paths.dt);
    rec.budget = cfg.budget_scale * (dt + dx2) * (1.0 + std::abs(rec.pde_value));

    if (rec.valid_paths < 0.9 * paths.n_paths) {
        rec.verdict = false;
        rec.pass = false;
        rec.reason = "only " + std::to_string(rec.valid_paths) + " of " + std::to_string(paths.n_paths) +
                     " paths valid; no verdict";
        return rec;
    }
    rec.verdict = true;
    const double margin = 2.0 * rec.extracted.se + rec.budget;
    const bool close = std::abs(rec.pde_value - rec.extracted.mean) <= margin;
    const bool never_ok = rec.never_switch.mean <= rec.extracted.mean + margin;
    const bool mid_ok = rec.midpoint_switch.mean <= rec.extracted.mean + margin;
    rec.pass = close && never_ok && mid_ok;
    if (!close) rec.reason = "PDE value and MC estimate differ by more than 2 SE + budget";
    else if (!never_ok) rec.reason = "never-switch reference beats the extracted strategy";
    else if (!mid_ok) rec.reason = "midpoint-switch reference beats the extracted strategy";
    else rec.reason = "ok";
    return rec;
}

}  // namespace oswitch
