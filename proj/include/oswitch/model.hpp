#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oswitch/expr.hpp"

namespace oswitch {

/// Drift b (k expressions) and volatility sigma (k x d, row-major) in (t, x).
struct DiffusionSpec {
    int k = 1;
    int d = 1;
    std::vector<Expression> drift;
    std::vector<Expression> sigma;

    const Expression& sigma_at(int q, int r) const {
        return sigma[static_cast<std::size_t>(q * d + r)];
    }
    bool time_dependent() const;
    bool has_diffusion() const;  // some sigma entry is not the literal 0
};

/// Text form of a model, one string per expression. Mode indices are 0-based.
struct ModelSource {
    std::string name;
    double horizon = 1.0;
    int k = 1;
    int d = 1;
    std::vector<std::string> drift;                 // k
    std::vector<std::vector<std::string>> sigma;   // k x d
    std::vector<std::string> profit;               // m
    std::vector<std::vector<std::string>> costs;   // m x m, diagonal "0"
    std::vector<std::string> terminal;             // m
};

/// Problem datum of the m-modes switching problem. Immutable once built.
///
/// The running reward of mode i is F_i = f_i(t, x, y, z) - reaction_rate * y_i.
/// User models have reaction_rate 0; exponential_transform() accumulates the
/// transform exponent there so the time steppers can integrate it exactly.
class SwitchingModel {
public:
    static SwitchingModel from_source(const ModelSource& src);
    static SwitchingModel create(std::string name, double horizon, DiffusionSpec diffusion,
                                 std::vector<Expression> profit,
                                 std::vector<std::vector<Expression>> costs,
                                 std::vector<Expression> terminal, double reaction_rate = 0.0,
                                 double transform_lambda = 0.0);

    const std::string& name() const { return name_; }
    int modes() const { return dims_.m; }
    double horizon() const { return horizon_; }
    const Dims& dims() const { return dims_; }
    const DiffusionSpec& diffusion() const { return diffusion_; }
    const Expression& profit(int i) const { return profit_[static_cast<std::size_t>(i)]; }
    const Expression& cost(int i, int j) const {
        return costs_[static_cast<std::size_t>(i * dims_.m + j)];
    }
    const Expression& terminal(int i) const { return terminal_[static_cast<std::size_t>(i)]; }
    double reaction_rate() const { return reaction_rate_; }
    /// Total exponent applied by exponential_transform (0 for an untransformed model).
    double transform_lambda() const { return transform_lambda_; }

    /// Some profit depends on a y (any mode) variable.
    bool profit_depends_on_values() const;
    /// Some profit depends on a zvar variable.
    bool profit_depends_on_gradient() const;
    /// Profit i depends on y_j.
    bool profit_depends_on(int i, int j) const;

private:
    std::string name_;
    double horizon_ = 1.0;
    Dims dims_;
    DiffusionSpec diffusion_;
    std::vector<Expression> profit_;
    std::vector<Expression> costs_;
    std::vector<Expression> terminal_;
    double reaction_rate_ = 0.0;
    double transform_lambda_ = 0.0;
};

/// Slot vector for the model's expressions, with y and z zero.
std::vector<double> state_slots(const Dims& dims, double t, std::span<const double> x);

// ---------------------------------------------------------------------------
// Sampled assumption audit.

enum class Verdict { Certified, Refuted, Skipped, Info };

std::string to_string(Verdict v);

struct Witness {
    double t = 0.0;
    std::vector<double> x;
    std::vector<int> cycle;  // 1-based mode indices, first == last
    int i = -1;              // 1-based
    int j = -1;              // 1-based
    double value = 0.0;
};

struct AssumptionEntry {
    std::string check;  // e.g. "no-free-loop"
    Verdict verdict = Verdict::Skipped;
    std::string detail;
    std::optional<Witness> witness;  // always set when refuted
};

enum class Direction { Nondecreasing, Nonincreasing, Constant, Mixed };
enum class ModelClass { Uncoupled, Increasing, Decreasing, General };

std::string to_string(Direction d);
std::string to_string(ModelClass c);

/// Slope directions of F_i in y_j, for every (i, j). The model class is read
/// from the off-diagonal entries; the diagonal (own value) is informative.
struct MonotonicityReport {
    int m = 0;
    std::vector<Direction> directions;
    std::vector<SlopeRange> slopes;
    ModelClass model_class = ModelClass::Uncoupled;
    /// Largest probed |dF_i/dy_j| over off-diagonal and diagonal pairs (excluding the reaction term).
    double lipschitz_y = 0.0;

    Direction at(int i, int j) const { return directions[static_cast<std::size_t>(i * m + j)]; }
    bool admits_increasing() const {
        return model_class == ModelClass::Uncoupled || model_class == ModelClass::Increasing;
    }
    bool admits_decreasing() const {
        return model_class == ModelClass::Uncoupled || model_class == ModelClass::Decreasing;
    }
};

struct StatePoint {
    double t = 0.0;
    std::vector<double> x;
};

/// Maximum number of modes for exhaustive cycle enumeration.
inline constexpr int kMaxCycleModes = 8;

AssumptionEntry check_no_free_loop(const SwitchingModel& model, std::span<const StatePoint> samples);
AssumptionEntry check_terminal_consistency(const SwitchingModel& model,
                                           std::span<const std::vector<double>> x_samples);
AssumptionEntry check_costs_nonnegative(const SwitchingModel& model,
                                        std::span<const StatePoint> samples);
/// Informational: some off-diagonal g_ij(T, x) equals zero at a sample.
AssumptionEntry check_zero_terminal_costs(const SwitchingModel& model,
                                          std::span<const std::vector<double>> x_samples);

MonotonicityReport classify_monotonicity(const SwitchingModel& model, const ProbeBox& box,
                                         int n_samples, std::uint64_t seed);

struct AuditConfig {
    std::vector<std::pair<double, double>> state_box;  // per x dimension
    double value_bound = 10.0;     // y probed in [-value_bound, value_bound]
    double gradient_bound = 10.0;  // zvar probed in [-gradient_bound, gradient_bound]
    int n_states = 64;
    int n_probe = 2000;
    std::uint64_t seed = 20100601;
};

struct AssumptionReport {
    std::vector<AssumptionEntry> entries;
    MonotonicityReport monotonicity;

    bool refuted() const;
    const AssumptionEntry* find(const std::string& check) const;
};

/// Deterministic sample states: corners, center and seeded uniform points.
std::vector<StatePoint> sample_states(const SwitchingModel& model, const AuditConfig& cfg);
ProbeBox probe_box_for(const SwitchingModel& model, const AuditConfig& cfg);

/// Runs every sampled check on the model.
AssumptionReport audit_model(const SwitchingModel& model, const AuditConfig& cfg);

}  // namespace oswitch
