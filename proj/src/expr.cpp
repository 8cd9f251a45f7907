#include "oswitch/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>

#include "oswitch/error.hpp"

namespace oswitch {

namespace detail {

enum class NodeKind { Literal, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Exp, Log, Abs, Sqrt, Min, Max };

struct ExprNode {
    NodeKind kind = NodeKind::Literal;
    double value = 0.0;
    int slot = -1;
    Func func = Func::Exp;
    std::vector<std::shared_ptr<const ExprNode>> kids;
};

}  // namespace detail

using detail::ExprNode;
using detail::Func;
using detail::NodeKind;
using NodePtr = std::shared_ptr<const ExprNode>;

namespace {

NodePtr make_literal(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::Literal;
    n->value = v;
    return n;
}

NodePtr make_variable(int slot) {
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::Variable;
    n->slot = slot;
    return n;
}

NodePtr make_node(NodeKind kind, std::vector<NodePtr> kids, Func f = Func::Exp) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->func = f;
    n->kids = std::move(kids);
    return n;
}

const char* func_name(Func f) {
    switch (f) {
        case Func::Exp: return "exp";
        case Func::Log: return "log";
        case Func::Abs: return "abs";
        case Func::Sqrt: return "sqrt";
        case Func::Min: return "min";
        case Func::Max: return "max";
    }
    return "?";
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    if (v < 0.0 || (v == 0.0 && std::signbit(v))) return "(" + s + ")";
    return s;
}

void print(const ExprNode& n, const Dims& dims, std::string& out) {
    switch (n.kind) {
        case NodeKind::Literal: out += format_number(n.value); return;
        case NodeKind::Variable: out += dims.slot_name(n.slot); return;
        case NodeKind::Negate:
            out += "(-";
            print(*n.kids[0], dims, out);
            out += ")";
            return;
        case NodeKind::Call:
            out += func_name(n.func);
            out += "(";
            for (std::size_t i = 0; i < n.kids.size(); ++i) {
                if (i) out += ", ";
                print(*n.kids[i], dims, out);
            }
            out += ")";
            return;
        default: break;
    }
    const char* op = " ? ";
    switch (n.kind) {
        case NodeKind::Add: op = " + "; break;
        case NodeKind::Sub: op = " - "; break;
        case NodeKind::Mul: op = " * "; break;
        case NodeKind::Div: op = " / "; break;
        case NodeKind::Pow: op = " ^ "; break;
        default: break;
    }
    out += "(";
    print(*n.kids[0], dims, out);
    out += op;
    print(*n.kids[1], dims, out);
    out += ")";
}

std::string node_text(const ExprNode& n, const Dims& dims) {
    std::string s;
    print(n, dims, s);
    return s;
}

double checked(double v, const ExprNode& n, const Dims& dims, const char* what) {
    if (!std::isfinite(v)) throw DomainError(what, node_text(n, dims));
    return v;
}

double eval_node(const ExprNode& n, std::span<const double> slots, const Dims& dims) {
    switch (n.kind) {
        case NodeKind::Literal: return n.value;
        case NodeKind::Variable: return slots[static_cast<std::size_t>(n.slot)];
        case NodeKind::Negate: return -eval_node(*n.kids[0], slots, dims);
        case NodeKind::Add:
            return checked(eval_node(*n.kids[0], slots, dims) + eval_node(*n.kids[1], slots, dims),
                           n, dims, "overflow");
        case NodeKind::Sub:
            return checked(eval_node(*n.kids[0], slots, dims) - eval_node(*n.kids[1], slots, dims),
                           n, dims, "overflow");
        case NodeKind::Mul:
            return checked(eval_node(*n.kids[0], slots, dims) * eval_node(*n.kids[1], slots, dims),
                           n, dims, "overflow");
        case NodeKind::Div: {
            const double a = eval_node(*n.kids[0], slots, dims);
            const double b = eval_node(*n.kids[1], slots, dims);
            if (b == 0.0) throw DomainError("division by zero", node_text(n, dims));
            return checked(a / b, n, dims, "overflow");
        }
        case NodeKind::Pow: {
            const double a = eval_node(*n.kids[0], slots, dims);
            const double b = eval_node(*n.kids[1], slots, dims);
            return checked(std::pow(a, b), n, dims, "power outside the reals");
        }
        case NodeKind::Call: break;
    }
    switch (n.func) {
        case Func::Exp:
            return checked(std::exp(eval_node(*n.kids[0], slots, dims)), n, dims, "overflow");
        case Func::Log: {
            const double a = eval_node(*n.kids[0], slots, dims);
            if (!(a > 0.0)) throw DomainError("log of non-positive value", node_text(n, dims));
            return std::log(a);
        }
        case Func::Abs: return std::abs(eval_node(*n.kids[0], slots, dims));
        case Func::Sqrt: {
            const double a = eval_node(*n.kids[0], slots, dims);
            if (a < 0.0) throw DomainError("sqrt of negative value", node_text(n, dims));
            return std::sqrt(a);
        }
        case Func::Min:
        case Func::Max: {
            double acc = eval_node(*n.kids[0], slots, dims);
            for (std::size_t i = 1; i < n.kids.size(); ++i) {
                const double v = eval_node(*n.kids[i], slots, dims);
                acc = n.func == Func::Min ? std::min(acc, v) : std::max(acc, v);
            }
            return acc;
        }
    }
    return 0.0;
}

bool node_depends_on(const ExprNode& n, int slot) {
    if (n.kind == NodeKind::Variable) return slot < 0 || n.slot == slot;
    return std::any_of(n.kids.begin(), n.kids.end(),
                       [slot](const NodePtr& k) { return node_depends_on(*k, slot); });
}

NodePtr substitute_node(
    const NodePtr& n, const std::vector<std::optional<NodePtr>>& table) {
    if (n->kind == NodeKind::Variable) {
        const auto& r = table[static_cast<std::size_t>(n->slot)];
        return r ? *r : n;
    }
    if (n->kids.empty()) return n;
    std::vector<NodePtr> kids;
    kids.reserve(n->kids.size());
    bool changed = false;
    for (const auto& k : n->kids) {
        kids.push_back(substitute_node(k, table));
        changed = changed || kids.back() != k;
    }
    if (!changed) return n;
    auto copy = std::make_shared<ExprNode>(*n);
    copy->kids = std::move(kids);
    return copy;
}

// Recursive-descent parser for the grammar documented in expr.hpp.
class Parser {
public:
    Parser(std::string_view text, const Dims& dims, VarScope scope)
        : text_(text), dims_(dims), scope_(scope) {}

    NodePtr parse() {
        skip_ws();
        if (pos_ >= text_.size()) fail("empty expression", 0);
        NodePtr root = parse_expr();
        skip_ws();
        if (pos_ < text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg, std::size_t offset) const {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < offset && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(msg, offset, line, col);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            skip_ws();
            fail(std::string("expected '") + c + "'", pos_);
        }
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = make_node(NodeKind::Add, {lhs, parse_term()});
            } else if (accept('-')) {
                lhs = make_node(NodeKind::Sub, {lhs, parse_term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = make_node(NodeKind::Mul, {lhs, parse_unary()});
            } else if (accept('/')) {
                lhs = make_node(NodeKind::Div, {lhs, parse_unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make_node(NodeKind::Negate, {parse_unary()});
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (accept('^')) return make_node(NodeKind::Pow, {base, parse_unary()});
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression", pos_);
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        fail("unexpected character '" + std::string(1, c) + "'", pos_);
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t n = digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            n += digits();
        }
        if (n == 0) fail("malformed number", start);
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            const std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (digits() == 0) {
                pos_ = save;
                fail("malformed exponent", save);
            }
        }
        double value = 0.0;
        const std::string token(text_.substr(start, pos_ - start));
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
            fail("malformed number", start);
        }
        return make_literal(value);
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string name(text_.substr(start, pos_ - start));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            ++pos_;
            return parse_call(name, start);
        }
        const std::optional<int> slot = dims_.slot_of(name);
        if (!slot) fail("unknown identifier '" + name + "'", start);
        const VarScope family = family_of(*slot);
        if (!allows(scope_, family)) fail("variable '" + name + "' is not allowed here", start);
        return make_variable(*slot);
    }

    VarScope family_of(int slot) const {
        if (slot == dims_.t_slot()) return VarScope::Time;
        if (slot <= dims_.k) return VarScope::State;
        if (slot <= dims_.k + dims_.m) return VarScope::Values;
        return VarScope::Gradient;
    }

    NodePtr parse_call(const std::string& name, std::size_t start) {
        Func f{};
        bool variadic = false;
        if (name == "exp") f = Func::Exp;
        else if (name == "log") f = Func::Log;
        else if (name == "abs") f = Func::Abs;
        else if (name == "sqrt") f = Func::Sqrt;
        else if (name == "min") { f = Func::Min; variadic = true; }
        else if (name == "max") { f = Func::Max; variadic = true; }
        else fail("unknown function '" + name + "'", start);

        std::vector<NodePtr> args;
        if (!accept(')')) {
            args.push_back(parse_expr());
            while (accept(',')) args.push_back(parse_expr());
            expect(')');
        }
        if (variadic ? args.size() < 2 : args.size() != 1) {
            fail("arity mismatch: " + name + (variadic ? " takes at least 2 arguments"
                                                      : " takes exactly 1 argument"),
                 start);
        }
        return make_node(NodeKind::Call, std::move(args), f);
    }

    std::string_view text_;
    const Dims& dims_;
    VarScope scope_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string Dims::slot_name(int slot) const {
    if (slot == t_slot()) return "t";
    if (slot >= 1 && slot <= k) return "x" + std::to_string(slot);
    if (slot > k && slot <= k + m) return "y" + std::to_string(slot - k);
    if (slot > k + m && slot < slot_count()) return "zvar" + std::to_string(slot - k - m);
    return "?";
}

std::optional<int> Dims::slot_of(std::string_view name) const {
    if (name == "t") return t_slot();
    auto indexed = [&](std::string_view prefix, int count) -> std::optional<int> {
        if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) return std::nullopt;
        const std::string_view digits = name.substr(prefix.size());
        if (digits[0] == '0') return std::nullopt;
        int idx = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
        if (idx < 1 || idx > count) return std::nullopt;
        return idx - 1;
    };
    if (auto q = indexed("zvar", d)) return z_slot(*q);
    if (auto q = indexed("x", k)) return x_slot(*q);
    if (auto j = indexed("y", m)) return y_slot(*j);
    return std::nullopt;
}

Expression::Expression() : root_(make_literal(0.0)), dims_{} {}

Expression Expression::literal(double value, const Dims& dims) {
    return Expression(make_literal(value), dims);
}

Expression Expression::variable(int slot, const Dims& dims) {
    if (slot < 0 || slot >= dims.slot_count()) throw ConfigError("variable slot out of range");
    return Expression(make_variable(slot), dims);
}

double Expression::evaluate(std::span<const double> slots) const {
    if (slots.size() < static_cast<std::size_t>(dims_.slot_count())) {
        throw ConfigError("evaluate: expected " + std::to_string(dims_.slot_count()) + " slots");
    }
    return eval_node(*root_, slots, dims_);
}

bool Expression::depends_on(int slot) const { return node_depends_on(*root_, slot); }

bool Expression::is_zero_literal() const {
    return root_->kind == NodeKind::Literal && root_->value == 0.0;
}

bool Expression::is_constant() const { return !node_depends_on(*root_, -1); }

std::string Expression::to_string() const { return node_text(*root_, dims_); }

Expression Expression::substitute_impl(const std::vector<std::optional<NodePtr>>& table) const {
    return Expression(substitute_node(root_, table), dims_);
}

Expression operator+(const Expression& a, const Expression& b) {
    return Expression(make_node(NodeKind::Add, {a.root(), b.root()}), a.dims());
}
Expression operator-(const Expression& a, const Expression& b) {
    return Expression(make_node(NodeKind::Sub, {a.root(), b.root()}), a.dims());
}
Expression operator*(const Expression& a, const Expression& b) {
    return Expression(make_node(NodeKind::Mul, {a.root(), b.root()}), a.dims());
}
Expression exp(const Expression& a) {
    return Expression(make_node(NodeKind::Call, {a.root()}, Func::Exp), a.dims());
}

Expression parse_expression(std::string_view text, const Dims& dims, VarScope scope) {
    if (dims.k < 1 || dims.m < 1 || dims.d < 1) throw ConfigError("dimensions must be positive");
    Parser parser(text, dims, scope);
    return Expression(parser.parse(), dims);
}

double evaluate(const Expression& expr, const std::map<std::string, double>& bindings) {
    const Dims& dims = expr.dims();
    std::vector<double> slots(static_cast<std::size_t>(dims.slot_count()), 0.0);
    for (int s = 0; s < dims.slot_count(); ++s) {
        if (!expr.depends_on(s)) continue;
        const auto it = bindings.find(dims.slot_name(s));
        if (it == bindings.end()) throw ConfigError("missing binding for '" + dims.slot_name(s) + "'");
        slots[static_cast<std::size_t>(s)] = it->second;
    }
    return expr.evaluate(slots);
}

ProbeBox::ProbeBox(const Dims& dims)
    : dims_(dims), bounds_(static_cast<std::size_t>(dims.slot_count()), {0.0, 0.0}) {}

ProbeBox& ProbeBox::set(std::string_view name, double lo, double hi) {
    const auto slot = dims_.slot_of(name);
    if (!slot) throw ConfigError("probe box: unknown variable '" + std::string(name) + "'");
    return set_slot(*slot, lo, hi);
}

ProbeBox& ProbeBox::set_slot(int slot, double lo, double hi) {
    if (slot < 0 || slot >= dims_.slot_count()) throw ConfigError("probe box: slot out of range");
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw ConfigError("probe box: bounds must be finite with lo <= hi");
    }
    bounds_[static_cast<std::size_t>(slot)] = {lo, hi};
    return *this;
}

double SlopeRange::max_abs() const { return std::max(std::abs(min_slope), std::abs(max_slope)); }

SlopeRange probe_slopes(const Expression& expr, int slot, const ProbeBox& box, int n_samples,
                        std::uint64_t seed) {
    if (n_samples < 2) throw ConfigError("probe: n_samples must be at least 2");
    if (!(box.dims() == expr.dims())) throw ConfigError("probe: box dimensions differ from expression");
    SlopeRange range;
    const auto [vlo, vhi] = box.slot(slot);
    if (!expr.depends_on(slot) || vlo == vhi) return range;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n_slots = expr.dims().slot_count();
    std::vector<double> point(static_cast<std::size_t>(n_slots), 0.0);
    bool first = true;
    for (int s = 0; s < n_samples; ++s) {
        for (int q = 0; q < n_slots; ++q) {
            const auto [lo, hi] = box.slot(q);
            point[static_cast<std::size_t>(q)] = lo + (hi - lo) * unit(rng);
        }
        const double a = vlo + (vhi - vlo) * unit(rng);
        const double b = vlo + (vhi - vlo) * unit(rng);
        if (a == b) continue;
        double fa = 0.0, fb = 0.0;
        try {
            point[static_cast<std::size_t>(slot)] = a;
            fa = expr.evaluate(point);
            point[static_cast<std::size_t>(slot)] = b;
            fb = expr.evaluate(point);
        } catch (const DomainError& e) {
            std::string where;
            for (int q = 0; q < n_slots; ++q) {
                if (!where.empty()) where += ", ";
                where += expr.dims().slot_name(q) + "=" + std::to_string(point[static_cast<std::size_t>(q)]);
            }
            throw DomainError(std::string("probe sample (") + where + "): " + e.what(), e.subexpression());
        }
        const double slope = (fa - fb) / (a - b);
        if (first) {
            range.min_slope = range.max_slope = slope;
            first = false;
        } else {
            range.min_slope = std::min(range.min_slope, slope);
            range.max_slope = std::max(range.max_slope, slope);
        }
    }
    return range;
}

double probe_lipschitz(const Expression& expr, std::string_view var, const ProbeBox& box,
                       int n_samples, std::uint64_t seed) {
    const auto slot = expr.dims().slot_of(var);
    if (!slot) throw ConfigError("probe: unknown variable '" + std::string(var) + "'");
    return probe_slopes(expr, *slot, box, n_samples, seed).max_abs();
}

}  // namespace oswitch
