#include "oswitch/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oswitch/error.hpp"

namespace oswitch {

namespace {

Expression parse_field(const std::string& text, const Dims& dims, VarScope scope,
                       const std::string& field) {
    try {
        return parse_expression(text, dims, scope);
    } catch (const ParseError& e) {
        throw ParseError(field + ": " + e.bare_message(), e.offset(), e.line(), e.column());
    }
}

std::string point_text(double t, std::span<const double> x) {
    std::ostringstream os;
    os << "t=" << t;
    for (std::size_t q = 0; q < x.size(); ++q) os << ", x" << q + 1 << "=" << x[q];
    return os.str();
}

}  // namespace

bool DiffusionSpec::time_dependent() const {
    const auto uses_t = [](const Expression& e) { return e.depends_on(0); };
    return std::any_of(drift.begin(), drift.end(), uses_t) ||
           std::any_of(sigma.begin(), sigma.end(), uses_t);
}

bool DiffusionSpec::has_diffusion() const {
    return std::any_of(sigma.begin(), sigma.end(),
                       [](const Expression& e) { return !e.is_zero_literal(); });
}

SwitchingModel SwitchingModel::from_source(const ModelSource& src) {
    const int m = static_cast<int>(src.profit.size());
    if (src.k < 1 || src.d < 1) throw ConfigError("model: k and d must be at least 1");
    if (m < 2) throw ConfigError("model: at least two modes are required");
    const Dims dims{src.k, m, src.d};

    DiffusionSpec diff;
    diff.k = src.k;
    diff.d = src.d;
    if (static_cast<int>(src.drift.size()) != src.k) throw ConfigError("model: drift needs k entries");
    if (static_cast<int>(src.sigma.size()) != src.k) throw ConfigError("model: sigma needs k rows");
    for (int q = 0; q < src.k; ++q) {
        diff.drift.push_back(parse_field(src.drift[static_cast<std::size_t>(q)], dims,
                                         VarScope::TimeState, "drift[" + std::to_string(q + 1) + "]"));
    }
    for (int q = 0; q < src.k; ++q) {
        const auto& row = src.sigma[static_cast<std::size_t>(q)];
        if (static_cast<int>(row.size()) != src.d) throw ConfigError("model: sigma rows need d entries");
        for (int r = 0; r < src.d; ++r) {
            diff.sigma.push_back(parse_field(row[static_cast<std::size_t>(r)], dims, VarScope::TimeState,
                                             "sigma[" + std::to_string(q + 1) + "][" +
                                                 std::to_string(r + 1) + "]"));
        }
    }

    std::vector<Expression> f;
    for (int i = 0; i < m; ++i) {
        f.push_back(parse_field(src.profit[static_cast<std::size_t>(i)], dims, VarScope::All,
                                "f_" + std::to_string(i + 1)));
    }
    if (static_cast<int>(src.costs.size()) != m) throw ConfigError("model: costs must be m x m");
    std::vector<std::vector<Expression>> g(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const auto& row = src.costs[static_cast<std::size_t>(i)];
        if (static_cast<int>(row.size()) != m) throw ConfigError("model: costs must be m x m");
        for (int j = 0; j < m; ++j) {
            Expression e = parse_field(row[static_cast<std::size_t>(j)], dims, VarScope::TimeState,
                                       "g_" + std::to_string(i + 1) + std::to_string(j + 1));
            if (i == j && !e.is_zero_literal()) {
                throw ConfigError("model: diagonal cost g_" + std::to_string(i + 1) +
                                  std::to_string(i + 1) + " must be 0");
            }
            g[static_cast<std::size_t>(i)].push_back(std::move(e));
        }
    }
    if (static_cast<int>(src.terminal.size()) != m) throw ConfigError("model: terminal needs m entries");
    std::vector<Expression> h;
    for (int i = 0; i < m; ++i) {
        h.push_back(parse_field(src.terminal[static_cast<std::size_t>(i)], dims, VarScope::State,
                                "h_" + std::to_string(i + 1)));
    }
    return create(src.name, src.horizon, std::move(diff), std::move(f), std::move(g), std::move(h));
}

SwitchingModel SwitchingModel::create(std::string name, double horizon, DiffusionSpec diffusion,
                                      std::vector<Expression> profit,
                                      std::vector<std::vector<Expression>> costs,
                                      std::vector<Expression> terminal, double reaction_rate,
                                      double transform_lambda) {
    const int m = static_cast<int>(profit.size());
    if (m < 2) throw ConfigError("model: at least two modes are required");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("model: horizon must be positive");
    if (diffusion.k < 1 || diffusion.d < 1) throw ConfigError("model: k and d must be at least 1");
    if (static_cast<int>(diffusion.drift.size()) != diffusion.k ||
        static_cast<int>(diffusion.sigma.size()) != diffusion.k * diffusion.d) {
        throw ConfigError("model: diffusion shape mismatch");
    }
    if (static_cast<int>(costs.size()) != m || static_cast<int>(terminal.size()) != m) {
        throw ConfigError("model: costs/terminal shape mismatch");
    }
    const Dims dims{diffusion.k, m, diffusion.d};

    SwitchingModel model;
    model.name_ = std::move(name);
    model.horizon_ = horizon;
    model.dims_ = dims;
    model.reaction_rate_ = reaction_rate;
    model.transform_lambda_ = transform_lambda;

    auto check_dims = [&](const Expression& e, const char* what) {
        if (!(e.dims() == dims)) throw ConfigError(std::string("model: ") + what + " parsed with other dims");
    };
    for (const auto& e : diffusion.drift) check_dims(e, "drift");
    for (const auto& e : diffusion.sigma) check_dims(e, "sigma");
    model.diffusion_ = std::move(diffusion);

    for (auto& e : profit) check_dims(e, "profit");
    model.profit_ = std::move(profit);
    for (int i = 0; i < m; ++i) {
        const auto& row = costs[static_cast<std::size_t>(i)];
        if (static_cast<int>(row.size()) != m) throw ConfigError("model: costs must be m x m");
        for (int j = 0; j < m; ++j) {
            const Expression& e = row[static_cast<std::size_t>(j)];
            check_dims(e, "cost");
            if (i == j && !e.is_zero_literal()) throw ConfigError("model: diagonal costs must be 0");
            model.costs_.push_back(e);
        }
    }
    for (auto& e : terminal) check_dims(e, "terminal");
    model.terminal_ = std::move(terminal);
    return model;
}

bool SwitchingModel::profit_depends_on_values() const {
    for (int i = 0; i < dims_.m; ++i)
        for (int j = 0; j < dims_.m; ++j)
            if (profit_depends_on(i, j)) return true;
    return false;
}

bool SwitchingModel::profit_depends_on_gradient() const {
    for (const auto& f : profit_)
        for (int r = 0; r < dims_.d; ++r)
            if (f.depends_on(dims_.z_slot(r))) return true;
    return false;
}

bool SwitchingModel::profit_depends_on(int i, int j) const {
    return profit(i).depends_on(dims_.y_slot(j));
}

std::vector<double> state_slots(const Dims& dims, double t, std::span<const double> x) {
    std::vector<double> s(static_cast<std::size_t>(dims.slot_count()), 0.0);
    s[0] = t;
    for (int q = 0; q < dims.k; ++q) s[static_cast<std::size_t>(dims.x_slot(q))] = x[static_cast<std::size_t>(q)];
    return s;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Certified: return "certified-on-samples";
        case Verdict::Refuted: return "refuted";
        case Verdict::Skipped: return "skipped";
        case Verdict::Info: return "info";
    }
    return "?";
}

std::string to_string(Direction d) {
    switch (d) {
        case Direction::Nondecreasing: return "nondecreasing";
        case Direction::Nonincreasing: return "nonincreasing";
        case Direction::Constant: return "constant";
        case Direction::Mixed: return "mixed";
    }
    return "?";
}

std::string to_string(ModelClass c) {
    switch (c) {
        case ModelClass::Uncoupled: return "uncoupled";
        case ModelClass::Increasing: return "increasing-case";
        case ModelClass::Decreasing: return "decreasing-case";
        case ModelClass::General: return "general";
    }
    return "?";
}

AssumptionEntry check_no_free_loop(const SwitchingModel& model, std::span<const StatePoint> samples) {
    const int m = model.modes();
    if (m > kMaxCycleModes) {
        throw CapExceeded("no-free-loop: cycle enumeration is capped at m <= " +
                          std::to_string(kMaxCycleModes));
    }
    if (samples.empty()) throw ConfigError("no-free-loop: empty sample list");

    AssumptionEntry entry{"no-free-loop", Verdict::Certified, "", std::nullopt};
    std::vector<double> g(static_cast<std::size_t>(m * m), 0.0);
    std::size_t cycles_seen = 0;

    for (const StatePoint& p : samples) {
        const auto slots = state_slots(model.dims(), p.t, p.x);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                g[static_cast<std::size_t>(i * m + j)] = i == j ? 0.0 : model.cost(i, j).evaluate(slots);

        // Simple cycles listed once each, rooted at their smallest mode, in
        // lexicographic depth-first order.
        std::vector<int> path;
        std::vector<char> used(static_cast<std::size_t>(m), 0);
        std::optional<Witness> found;
        auto dfs = [&](auto&& self, int root, double partial) -> void {
            const int last = path.back();
            for (int v = root + 1; v < m && !found; ++v) {
                if (used[static_cast<std::size_t>(v)]) continue;
                const double step = partial + g[static_cast<std::size_t>(last * m + v)];
                const double closed = step + g[static_cast<std::size_t>(v * m + root)];
                path.push_back(v);
                used[static_cast<std::size_t>(v)] = 1;
                ++cycles_seen;
                if (closed <= 0.0) {
                    Witness w;
                    w.t = p.t;
                    w.x = p.x;
                    for (int c : path) w.cycle.push_back(c + 1);
                    w.cycle.push_back(root + 1);
                    w.value = closed;
                    found = w;
                } else {
                    self(self, root, step);
                }
                used[static_cast<std::size_t>(v)] = 0;
                path.pop_back();
            }
        };
        for (int root = 0; root < m && !found; ++root) {
            path.assign(1, root);
            used.assign(static_cast<std::size_t>(m), 0);
            used[static_cast<std::size_t>(root)] = 1;
            dfs(dfs, root, 0.0);
        }
        if (found) {
            std::ostringstream os;
            os << "cycle (";
            for (std::size_t c = 0; c < found->cycle.size(); ++c) os << (c ? "," : "") << found->cycle[c];
            os << ") has total cost " << found->value << " <= 0 at " << point_text(p.t, p.x);
            entry.verdict = Verdict::Refuted;
            entry.detail = os.str();
            entry.witness = std::move(found);
            return entry;
        }
    }
    entry.detail = std::to_string(cycles_seen) + " cycle evaluations over " +
                   std::to_string(samples.size()) + " samples, all strictly positive";
    return entry;
}

AssumptionEntry check_terminal_consistency(const SwitchingModel& model,
                                           std::span<const std::vector<double>> x_samples) {
    if (x_samples.empty()) throw ConfigError("terminal consistency: empty sample list");
    const int m = model.modes();
    const double T = model.horizon();
    AssumptionEntry entry{"terminal consistency", Verdict::Certified, "", std::nullopt};
    std::vector<double> h(static_cast<std::size_t>(m));
    for (const auto& x : x_samples) {
        const auto slots = state_slots(model.dims(), T, x);
        for (int i = 0; i < m; ++i) h[static_cast<std::size_t>(i)] = model.terminal(i).evaluate(slots);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (i == j) continue;
                const double rhs = h[static_cast<std::size_t>(j)] - model.cost(i, j).evaluate(slots);
                const double lhs = h[static_cast<std::size_t>(i)];
                if (lhs < rhs - 1e-12 * (1.0 + std::abs(rhs))) {
                    Witness w;
                    w.t = T;
                    w.x = x;
                    w.i = i + 1;
                    w.j = j + 1;
                    w.value = rhs - lhs;
                    std::ostringstream os;
                    os << "h_" << i + 1 << " = " << lhs << " < h_" << j + 1 << " - g_" << i + 1 << j + 1
                       << "(T,x) = " << rhs << " at " << point_text(T, x);
                    entry.verdict = Verdict::Refuted;
                    entry.detail = os.str();
                    entry.witness = std::move(w);
                    return entry;
                }
            }
        }
    }
    entry.detail = "inequality holds at " + std::to_string(x_samples.size()) + " samples";
    return entry;
}

AssumptionEntry check_costs_nonnegative(const SwitchingModel& model,
                                        std::span<const StatePoint> samples) {
    const int m = model.modes();
    AssumptionEntry entry{"nonnegative costs", Verdict::Certified, "", std::nullopt};
    for (const StatePoint& p : samples) {
        const auto slots = state_slots(model.dims(), p.t, p.x);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (i == j) continue;
                const double g = model.cost(i, j).evaluate(slots);
                if (g < 0.0) {
                    Witness w;
                    w.t = p.t;
                    w.x = p.x;
                    w.i = i + 1;
                    w.j = j + 1;
                    w.value = g;
                    entry.verdict = Verdict::Refuted;
                    entry.detail = "g_" + std::to_string(i + 1) + std::to_string(j + 1) + " = " +
                                   std::to_string(g) + " < 0 at " + point_text(p.t, p.x);
                    entry.witness = std::move(w);
                    return entry;
                }
            }
        }
    }
    entry.detail = "all off-diagonal costs nonnegative at " + std::to_string(samples.size()) + " samples";
    return entry;
}

AssumptionEntry check_zero_terminal_costs(const SwitchingModel& model,
                                          std::span<const std::vector<double>> x_samples) {
    const int m = model.modes();
    AssumptionEntry entry{"zero terminal costs", Verdict::Info, "no off-diagonal cost vanishes at T", std::nullopt};
    for (const auto& x : x_samples) {
        const auto slots = state_slots(model.dims(), model.horizon(), x);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (i != j && model.cost(i, j).evaluate(slots) == 0.0) {
                    Witness w;
                    w.t = model.horizon();
                    w.x = x;
                    w.i = i + 1;
                    w.j = j + 1;
                    entry.detail = "g_" + std::to_string(i + 1) + std::to_string(j + 1) +
                                   "(T,x) = 0 at " + point_text(model.horizon(), x) +
                                   "; extracted strategies may chatter near T";
                    entry.witness = std::move(w);
                    return entry;
                }
            }
        }
    }
    return entry;
}

MonotonicityReport classify_monotonicity(const SwitchingModel& model, const ProbeBox& box,
                                         int n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw ConfigError("classify_monotonicity: n_samples must be at least 2");
    const int m = model.modes();
    const Dims& dims = model.dims();
    MonotonicityReport rep;
    rep.m = m;
    rep.directions.resize(static_cast<std::size_t>(m * m), Direction::Constant);
    rep.slopes.resize(static_cast<std::size_t>(m * m));

    bool all_constant = true, all_up = true, all_down = true;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const std::uint64_t s = seed + static_cast<std::uint64_t>(i * m + j) * 0x9E3779B97F4A7C15ull;
            SlopeRange r = probe_slopes(model.profit(i), dims.y_slot(j), box, n_samples, s);
            rep.lipschitz_y = std::max(rep.lipschitz_y, r.max_abs());
            if (i == j) {
                r.min_slope -= model.reaction_rate();
                r.max_slope -= model.reaction_rate();
            }
            const double eps = 1e-12 * (1.0 + r.max_abs());
            Direction dir;
            if (r.max_abs() <= eps) dir = Direction::Constant;
            else if (r.min_slope >= -eps) dir = Direction::Nondecreasing;
            else if (r.max_slope <= eps) dir = Direction::Nonincreasing;
            else dir = Direction::Mixed;
            rep.directions[static_cast<std::size_t>(i * m + j)] = dir;
            rep.slopes[static_cast<std::size_t>(i * m + j)] = r;
            if (i == j) continue;
            if (dir != Direction::Constant) all_constant = false;
            if (dir == Direction::Nonincreasing || dir == Direction::Mixed) all_up = false;
            if (dir == Direction::Nondecreasing || dir == Direction::Mixed) all_down = false;
        }
    }
    if (all_constant) rep.model_class = ModelClass::Uncoupled;
    else if (all_up) rep.model_class = ModelClass::Increasing;
    else if (all_down) rep.model_class = ModelClass::Decreasing;
    else rep.model_class = ModelClass::General;
    return rep;
}

bool AssumptionReport::refuted() const {
    return std::any_of(entries.begin(), entries.end(),
                       [](const AssumptionEntry& e) { return e.verdict == Verdict::Refuted; });
}

const AssumptionEntry* AssumptionReport::find(const std::string& check) const {
    for (const auto& e : entries)
        if (e.check == check) return &e;
    return nullptr;
}

std::vector<StatePoint> sample_states(const SwitchingModel& model, const AuditConfig& cfg) {
    const int k = model.dims().k;
    if (static_cast<int>(cfg.state_box.size()) != k) throw ConfigError("audit: state box needs k intervals");
    const double T = model.horizon();
    std::vector<StatePoint> out;
    const double times[] = {0.0, 0.5 * T, T};
    for (double t : times) {
        for (int mask = 0; mask < (1 << k); ++mask) {
            StatePoint p{t, std::vector<double>(static_cast<std::size_t>(k))};
            for (int q = 0; q < k; ++q) {
                const auto [lo, hi] = cfg.state_box[static_cast<std::size_t>(q)];
                p.x[static_cast<std::size_t>(q)] = (mask >> q) & 1 ? hi : lo;
            }
            out.push_back(std::move(p));
        }
        StatePoint c{t, std::vector<double>(static_cast<std::size_t>(k))};
        for (int q = 0; q < k; ++q) {
            const auto [lo, hi] = cfg.state_box[static_cast<std::size_t>(q)];
            c.x[static_cast<std::size_t>(q)] = 0.5 * (lo + hi);
        }
        out.push_back(std::move(c));
    }
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < cfg.n_states; ++s) {
        StatePoint p{T * unit(rng), std::vector<double>(static_cast<std::size_t>(k))};
        for (int q = 0; q < k; ++q) {
            const auto [lo, hi] = cfg.state_box[static_cast<std::size_t>(q)];
            p.x[static_cast<std::size_t>(q)] = lo + (hi - lo) * unit(rng);
        }
        out.push_back(std::move(p));
    }
    return out;
}

ProbeBox probe_box_for(const SwitchingModel& model, const AuditConfig& cfg) {
    const Dims& dims = model.dims();
    ProbeBox box(dims);
    box.set_slot(dims.t_slot(), 0.0, model.horizon());
    for (int q = 0; q < dims.k; ++q) {
        const auto [lo, hi] = cfg.state_box[static_cast<std::size_t>(q)];
        box.set_slot(dims.x_slot(q), lo, hi);
    }
    for (int j = 0; j < dims.m; ++j) box.set_slot(dims.y_slot(j), -cfg.value_bound, cfg.value_bound);
    for (int r = 0; r < dims.d; ++r) box.set_slot(dims.z_slot(r), -cfg.gradient_bound, cfg.gradient_bound);
    return box;
}

AssumptionReport audit_model(const SwitchingModel& model, const AuditConfig& cfg) {
    AssumptionReport rep;
    const auto states = sample_states(model, cfg);
    std::vector<std::vector<double>> xs;
    for (const auto& p : states) xs.push_back(p.x);
    const ProbeBox box = probe_box_for(model, cfg);
    const Dims& dims = model.dims();

    {
        // Lipschitz probes of b and sigma in x; finite samples can only bound from below.
        double lip = 0.0;
        const auto& diff = model.diffusion();
        std::vector<const Expression*> coeffs;
        for (const auto& e : diff.drift) coeffs.push_back(&e);
        for (const auto& e : diff.sigma) coeffs.push_back(&e);
        std::uint64_t s = cfg.seed;
        for (const Expression* e : coeffs)
            for (int q = 0; q < dims.k; ++q)
                lip = std::max(lip, probe_slopes(*e, dims.x_slot(q), box, cfg.n_probe, ++s).max_abs());
        for (const auto& p : states) {
            const auto slots = state_slots(dims, p.t, p.x);
            for (const Expression* e : coeffs) (void)e->evaluate(slots);
        }
        rep.entries.push_back({"diffusion coefficients", Verdict::Certified,
                               "finite on samples; probed Lipschitz constant in x " + std::to_string(lip),
                               std::nullopt});
    }
    {
        double lip_z = 0.0;
        std::uint64_t s = cfg.seed + 7;
        for (int i = 0; i < dims.m; ++i)
            for (int r = 0; r < dims.d; ++r)
                lip_z = std::max(lip_z, probe_slopes(model.profit(i), dims.z_slot(r), box, cfg.n_probe, ++s).max_abs());
        rep.monotonicity = classify_monotonicity(model, box, cfg.n_probe, cfg.seed + 11);
        rep.entries.push_back({"driver Lipschitz", Verdict::Certified,
                               "probed constants: y " + std::to_string(rep.monotonicity.lipschitz_y) +
                                   ", z " + std::to_string(lip_z),
                               std::nullopt});
        rep.entries.push_back({"driver monotonicity", Verdict::Info,
                               "model class " + to_string(rep.monotonicity.model_class), std::nullopt});
        rep.entries.push_back({"uncoupled drivers", Verdict::Info,
                               rep.monotonicity.model_class == ModelClass::Uncoupled
                                   ? "holds: no driver depends on another mode's value"
                                   : "does not hold",
                               std::nullopt});
    }
    rep.entries.push_back({"polynomial growth", Verdict::Skipped,
                           "growth classes are not checked for expressions", std::nullopt});
    rep.entries.push_back(check_costs_nonnegative(model, states));
    rep.entries.push_back(check_no_free_loop(model, states));
    rep.entries.push_back(check_terminal_consistency(model, xs));
    rep.entries.push_back(check_zero_terminal_costs(model, xs));
    return rep;
}

}  // namespace oswitch
