#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oswitch/grid.hpp"
#include "oswitch/model.hpp"

namespace oswitch {

/// Euler-Maruyama trajectories. Path p draws from its own generator seeded by
/// (seed, p), so a path does not depend on how many others are simulated.
struct PathSet {
    int k = 1;
    int n_paths = 0;
    int n_steps = 0;
    std::uint64_t seed = 0;
    double t0 = 0.0;
    double horizon = 1.0;
    double dt = 0.0;
    std::vector<double> states;  // [path][step][q]
    std::vector<char> valid;
    int invalid = 0;

    double time(int s) const { return s == n_steps ? horizon : t0 + dt * s; }
    std::span<const double> state(int p, int s) const {
        return {states.data() + (static_cast<std::size_t>(p) * static_cast<std::size_t>(n_steps + 1) + static_cast<std::size_t>(s)) * static_cast<std::size_t>(k),
                static_cast<std::size_t>(k)};
    }
};

PathSet simulate_paths(const DiffusionSpec& diffusion, double horizon, double t0, std::span<const double> x0,
                       int n_paths, int n_steps, std::uint64_t seed);

struct Strategy {
    int i0 = 1;                  // 1-based
    std::vector<int> steps;      // step index of each switch
    std::vector<double> times;   // tau_n
    std::vector<int> modes;      // xi_n, 1-based
    bool chattering = false;     // switch cap reached
    bool clamped = false;        // path left the grid box somewhere
};

struct StrategyOptions {
    double tol_obstacle = 1e-8;  // switch_tol = 10 tol_obstacle (1 + |v|)
    int cap = 0;                 // 0 means 50 m
};

/// Walks path p forward and switches when v_cur is within switch_tol of
/// max_{j != cur}(v_j - g_cur,j), to the argmax (smallest index on ties). A mode
/// entered at step s is not left at step s. No switch is taken at T.
Strategy extract_strategy(const ValueFields& fields, const SwitchingModel& model, const PathSet& paths,
                          int p, int i0, const StrategyOptions& opts = {});

/// Switch to `target` (1-based) at `step`, or never when target is empty.
Strategy fixed_strategy(int i0, std::optional<int> target, int step, const PathSet& paths);

/// Mode held on each step 0..n_steps-1 (1-based).
std::vector<int> mode_indicator(const Strategy& s, int n_steps);

struct PayoffEntry {
    double profit = 0.0;
    double cost = 0.0;
    double terminal = 0.0;
    double total = 0.0;  // profit - cost + terminal
};

/// Left-endpoint reward along the path, costs at switch times with tau < T,
/// terminal payoff of the final mode. Coupled drivers read y (and z) from
/// `fields`, which must then be non-null.
PayoffEntry evaluate_payoff(const PathSet& paths, int p, const Strategy& strategy, const SwitchingModel& model,
                            const ValueFields* fields = nullptr);

struct PayoffSummary {
    double mean = 0.0;
    double se = 0.0;
    int n = 0;
};

PayoffSummary summarize(std::span<const double> values);

struct McConfig {
    int n_paths = 10'000;
    int n_steps = 200;
    std::uint64_t seed = 20100601;
    double tol_obstacle = 1e-8;
    /// scheme_bias_budget = budget_scale (dt + dx^2)(1 + |v|)
    double budget_scale = 1.0;
};

struct ComparisonRecord {
    double pde_value = 0.0;
    PayoffSummary extracted;
    PayoffSummary never_switch;
    PayoffSummary midpoint_switch;
    double budget = 0.0;
    int valid_paths = 0;
    int invalid_paths = 0;
    int chattering_paths = 0;
    int clamped_paths = 0;
    double mean_switches = 0.0;
    bool verdict = false;  // false: too few valid paths
    bool pass = false;
    std::string reason;
};

ComparisonRecord validate_representation(const ValueFields& fields, const SwitchingModel& model, double t0,
                                         std::span<const double> x0, int i0, const McConfig& cfg = {});

}  // namespace oswitch
