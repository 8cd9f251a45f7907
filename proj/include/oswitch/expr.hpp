#pragma once

// Arithmetic expressions over the variables of a switching model.
//
// Variables are t, x1..xk (state), y1..ym (mode values) and zvar1..zvard
// (the sigma^T D_x v argument of the drivers). Every expression is parsed
// against a fixed Dims, which also fixes the "slot" layout used by the fast
// evaluation path:
//
//   slot 0            t
//   slot 1..k         x1..xk
//   slot k+1..k+m     y1..ym
//   slot k+m+1..      zvar1..zvard
//
// Grammar (EBNF):
//
//   expr    = term { ("+" | "-") term } ;
//   term    = unary { ("*" | "/") unary } ;
//   unary   = "-" unary | power ;
//   power   = primary [ "^" unary ] ;          (* right associative *)
//   primary = number | ident | ident "(" expr { "," expr } ")" | "(" expr ")" ;
//   number  = digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ] ;
//
// Functions: exp, log, abs, sqrt (one argument), min, max (two or more).

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oswitch {

struct Dims {
    int k = 1;  // state dimension
    int m = 1;  // number of modes
    int d = 1;  // Brownian dimension

    int slot_count() const { return 1 + k + m + d; }
    int t_slot() const { return 0; }
    int x_slot(int q) const { return 1 + q; }
    int y_slot(int j) const { return 1 + k + j; }
    int z_slot(int r) const { return 1 + k + m + r; }

    std::string slot_name(int slot) const;
    std::optional<int> slot_of(std::string_view name) const;

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Which variable families an expression may mention.
enum class VarScope : unsigned {
    Time = 1u,
    State = 2u,
    Values = 4u,
    Gradient = 8u,
    TimeState = 3u,
    All = 15u,
};

constexpr VarScope operator|(VarScope a, VarScope b) {
    return static_cast<VarScope>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}
constexpr bool allows(VarScope scope, VarScope family) {
    return (static_cast<unsigned>(scope) & static_cast<unsigned>(family)) != 0u;
}

namespace detail {
struct ExprNode;
}

/// Immutable expression tree. Cheap to copy (shared structure); safe to
/// evaluate concurrently.
class Expression {
public:
    Expression();  // the literal 0

    static Expression literal(double value, const Dims& dims);
    static Expression variable(int slot, const Dims& dims);

    /// Evaluate with one value per slot (`slots.size() == dims().slot_count()`).
    /// Throws DomainError if any sub-expression leaves the finite reals.
    double evaluate(std::span<const double> slots) const;

    bool depends_on(int slot) const;
    /// True when the tree is a literal zero.
    bool is_zero_literal() const;
    /// True when no variable occurs in the tree.
    bool is_constant() const;

    /// Canonical, fully parenthesized form. Re-parsing yields an equivalent tree.
    std::string to_string() const;

    const Dims& dims() const { return dims_; }

    /// Replaces every variable for which `replacement(slot)` returns a value.
    template <class F>
    Expression substitute(F&& replacement) const;

    friend Expression operator+(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a, const Expression& b);
    friend Expression operator*(const Expression& a, const Expression& b);
    friend Expression exp(const Expression& a);

    // Internal access.
    explicit Expression(std::shared_ptr<const detail::ExprNode> root, Dims dims)
        : root_(std::move(root)), dims_(dims) {}
    const std::shared_ptr<const detail::ExprNode>& root() const { return root_; }

private:
    Expression substitute_impl(
        const std::vector<std::optional<std::shared_ptr<const detail::ExprNode>>>& table) const;

    std::shared_ptr<const detail::ExprNode> root_;
    Dims dims_;
};

template <class F>
Expression Expression::substitute(F&& replacement) const {
    std::vector<std::optional<std::shared_ptr<const detail::ExprNode>>> table(
        static_cast<std::size_t>(dims_.slot_count()));
    for (int s = 0; s < dims_.slot_count(); ++s) {
        std::optional<Expression> r = replacement(s);
        if (r) table[static_cast<std::size_t>(s)] = r->root();
    }
    return substitute_impl(table);
}

/// Parses `text` against `dims`. Throws ParseError (syntax error, unknown
/// identifier, arity mismatch, variable outside `scope`).
Expression parse_expression(std::string_view text, const Dims& dims,
                            VarScope scope = VarScope::All);

/// Name-based evaluation. Throws ConfigError when a used variable is unbound.
double evaluate(const Expression& expr, const std::map<std::string, double>& bindings);

/// Per-slot sampling box for the probing routines. Unset slots default to [0, 0].
class ProbeBox {
public:
    explicit ProbeBox(const Dims& dims);

    ProbeBox& set(std::string_view name, double lo, double hi);
    ProbeBox& set_slot(int slot, double lo, double hi);

    const Dims& dims() const { return dims_; }
    std::pair<double, double> slot(int s) const { return bounds_[static_cast<std::size_t>(s)]; }

private:
    Dims dims_;
    std::vector<std::pair<double, double>> bounds_;
};

struct SlopeRange {
    double min_slope = 0.0;
    double max_slope = 0.0;
    double max_abs() const;
};

/// Signed secant slopes in `slot`, from `n_samples` random secant pairs drawn
/// inside `box` (all other slots drawn once per pair). Deterministic in `seed`.
SlopeRange probe_slopes(const Expression& expr, int slot, const ProbeBox& box, int n_samples,
                        std::uint64_t seed);

/// max |d expr / d var| over random secant pairs. A refutation certificate
/// for a claimed Lipschitz bound, never a proof of one.
double probe_lipschitz(const Expression& expr, std::string_view var, const ProbeBox& box,
                       int n_samples, std::uint64_t seed);

}  // namespace oswitch
