#pragma once

#include <optional>
#include <string>
#include <vector>

#include "oswitch/grid.hpp"
#include "oswitch/model.hpp"

namespace oswitch {

enum class Scheme { Picard, Increasing, Decreasing };
enum class InitKind { LowerBound, UpperBound, Zero };
enum class Bound { Upper, Lower };

const char* to_string(Scheme s);
std::optional<Scheme> scheme_from_string(const std::string& name);

struct SolverOptions {
    double tol = 1e-6;           // sup-norm stopping distance between iterates
    double tol_obstacle = 1e-8;  // allowed obstacle infeasibility of a converged solution
    double tol_inner = 0.0;      // projection passes stop once no entry rises by more than this
    int max_iter = 200;
    double order_tol = 1e-9;     // slack for the monotone-order counts
};

struct IterationRecord {
    int n = 0;
    double delta = 0.0;
    std::optional<double> ratio;  // delta_n / delta_{n-1}
    long violations = 0;
    double wall_ms = 0.0;
};

struct IterationReport {
    std::string scheme;
    std::vector<IterationRecord> iterations;
    bool converged = false;
    /// Largest observed ratio for n >= 4; empty when fewer iterations ran.
    std::optional<double> rho;
    double lambda = 0.0;
    long violations = 0;
};

/// Nodewise order of the decreasing scheme: odd iterates below the limit,
/// even iterates above, within order_tol. violations[n] counts failures of iterate n.
struct SandwichRecord {
    std::vector<long> violations;
    long total = 0;
    double worst = 0.0;
};

struct SolveResult {
    ValueFields fields;
    IterationReport report;
    std::optional<SandwichRecord> sandwich;
};

/// Drivers F_i = e^{lt} f_i(t, x, e^{-lt} y, e^{-lt} z) - l y_i, terminals
/// e^{lT} h_i and costs e^{lt} g_ij. The -l y_i part goes to the reaction rate.
SwitchingModel exponential_transform(const SwitchingModel& model, double lambda);
/// Maps fields of the transformed system back: v(t) = e^{-l t} V(t).
ValueFields inverse_transform(ValueFields fields, double lambda);

/// +-(m C_f + 1), C_f the probed Lipschitz constant of the drivers in y.
/// Negative for the increasing scheme, positive for the decreasing one, 0 for Picard.
double default_lambda(const SwitchingModel& model, const GridSpec& grid, Scheme scheme);

/// Unreflected bounding solve broadcast to all m modes. The driver is
/// max_i f_i (resp. min_i), evaluated implicitly in y at the same slice and
/// with z lagged; the terminal is max_i h_i (resp. min_i).
ValueFields solve_unreflected_bound(const SwitchingModel& model, const GridSpec& grid, Bound which);

/// One application of the map Phi: decoupled reflected solve with y frozen.
ValueFields phi_step(const SwitchingModel& model, const GridSpec& grid, const ValueFields& frozen,
                     const SolverOptions& opts = {});

SolveResult picard_solve(const SwitchingModel& model, const GridSpec& grid, const SolverOptions& opts = {},
                         InitKind init = InitKind::Zero);
SolveResult monotone_increasing_solve(const SwitchingModel& model, const GridSpec& grid,
                                      const SolverOptions& opts = {});
SolveResult monotone_decreasing_solve(const SwitchingModel& model, const GridSpec& grid,
                                      const SolverOptions& opts = {});

/// Picks the scheme, refuses it when the model class does not admit it
/// (ConfigError), applies the transform with `lambda` (default_lambda when
/// empty) and maps the fields back.
SolveResult solve(const SwitchingModel& model, const GridSpec& grid, Scheme scheme,
                  const SolverOptions& opts = {}, std::optional<double> lambda = std::nullopt);

/// Discrete residuals of the obstacle system on interior nodes and slices
/// 0..n_time-1. Arrays are laid out [slice][mode][node]; boundary entries are 0.
struct ResidualReport {
    std::vector<double> slack;
    std::vector<double> pde;
    std::vector<double> min_form;
    std::vector<double> defect;
    double min_slack = 0.0;
    double max_abs_min_form = 0.0;
    double max_defect = 0.0;
    /// max of defect / (1 + |v|)
    double max_scaled_defect = 0.0;
    std::size_t flagged = 0;  // |min_form| > flag_tol (1 + |v|)
    double flag_tol = 1e-2;
    std::size_t checked = 0;
};

ResidualReport residual_report(const ValueFields& fields, const SwitchingModel& model,
                               const GridSpec& grid, double flag_tol = 1e-2);

/// Largest violation of v_i >= max_{j != i}(v_j - g_ij) over all nodes and slices.
double obstacle_infeasibility(const ValueFields& fields, const SwitchingModel& model);

}  // namespace oswitch
