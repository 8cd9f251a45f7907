#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oswitch/error.hpp"
#include "oswitch/model.hpp"

using namespace oswitch;

namespace {

ModelSource source(std::vector<std::string> profit, std::vector<std::vector<std::string>> costs,
                   std::vector<std::string> terminal) {
    ModelSource s;
    s.name = "test";
    s.horizon = 1.0;
    s.k = 1;
    s.d = 1;
    s.drift = {"0"};
    s.sigma = {{"1"}};
    s.profit = std::move(profit);
    s.costs = std::move(costs);
    s.terminal = std::move(terminal);
    return s;
}

SwitchingModel two_mode(const std::string& g12, const std::string& g21, const std::string& h1 = "0",
                        const std::string& h2 = "0") {
    return SwitchingModel::from_source(source({"0", "0"}, {{"0", g12}, {g21, "0"}}, {h1, h2}));
}

std::vector<StatePoint> grid_samples(double lo, double hi, int n) {
    std::vector<StatePoint> pts;
    for (double t : {0.0, 0.5, 1.0})
        for (int a = 0; a < n; ++a) pts.push_back({t, {lo + (hi - lo) * a / (n - 1)}});
    return pts;
}

std::vector<std::vector<double>> x_only(const std::vector<StatePoint>& pts) {
    std::vector<std::vector<double>> xs;
    for (const auto& p : pts) xs.push_back(p.x);
    return xs;
}

// Every simple cycle through distinct modes, as 0-based index lists without the closing repeat.
void all_cycles(int m, std::vector<int>& path, std::vector<bool>& used, std::vector<std::vector<int>>& out) {
    if (path.size() >= 2) out.push_back(path);
    for (int j = path.front() + 1; j < m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        used[static_cast<std::size_t>(j)] = true;
        path.push_back(j);
        all_cycles(m, path, used, out);
        path.pop_back();
        used[static_cast<std::size_t>(j)] = false;
    }
}

}  // namespace

TEST_CASE("model construction validates its parts") {
    CHECK_NOTHROW(two_mode("1", "1"));
    CHECK_THROWS_AS(SwitchingModel::from_source(source({"0", "0"}, {{"1", "1"}, {"1", "0"}}, {"0", "0"})), ConfigError);
    CHECK_THROWS_AS(SwitchingModel::from_source(source({"0"}, {{"0"}}, {"0"})), ConfigError);
    CHECK_THROWS_AS(SwitchingModel::from_source(source({"0", "0"}, {{"0", "1"}}, {"0", "0"})), ConfigError);
    // costs may not depend on values, terminals may not depend on time
    CHECK_THROWS_AS(SwitchingModel::from_source(source({"0", "0"}, {{"0", "y1"}, {"1", "0"}}, {"0", "0"})), ParseError);
    CHECK_THROWS_AS(SwitchingModel::from_source(source({"0", "0"}, {{"0", "1"}, {"1", "0"}}, {"t", "0"})), ParseError);
    try {
        SwitchingModel::from_source(source({"x1 +", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"}));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).rfind("f_1", 0) == 0);
    }
    ModelSource bad = source({"0", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"});
    bad.horizon = 0.0;
    CHECK_THROWS_AS(SwitchingModel::from_source(bad), ConfigError);
}

TEST_CASE("no-free-loop: positive two-cycle is certified") {
    const auto pts = grid_samples(-1, 1, 5);
    CHECK(check_no_free_loop(two_mode("1", "1"), pts).verdict == Verdict::Certified);
}

TEST_CASE("no-free-loop: zero-cost loop is refuted with its cycle") {
    const auto pts = grid_samples(-1, 1, 5);
    const auto e = check_no_free_loop(two_mode("0", "0"), pts);
    REQUIRE(e.verdict == Verdict::Refuted);
    REQUIRE(e.witness.has_value());
    CHECK(e.witness->cycle == std::vector<int>{1, 2, 1});
    CHECK(e.witness->value == 0.0);
}

TEST_CASE("no-free-loop: three-mode zero cycle") {
    // g_12 = g_23 = 1, g_31 = -2, all others 1
    const auto model = SwitchingModel::from_source(
        source({"0", "0", "0"}, {{"0", "1", "1"}, {"1", "0", "1"}, {"-2", "1", "0"}}, {"0", "0", "0"}));
    const auto pts = grid_samples(-1, 1, 3);
    const auto e = check_no_free_loop(model, pts);
    REQUIRE(e.verdict == Verdict::Refuted);
    REQUIRE(e.witness.has_value());
    CHECK(e.witness->cycle == std::vector<int>{1, 2, 3, 1});
    CHECK(e.witness->value == 0.0);

    // Brute force: the hand-enumerated cycle sums, in lexicographic order.
    const double g[3][3] = {{0, 1, 1}, {1, 0, 1}, {-2, 1, 0}};
    std::vector<std::vector<int>> cycles;
    for (int start = 0; start < 3; ++start) {
        std::vector<int> path{start};
        std::vector<bool> used(3, false);
        used[static_cast<std::size_t>(start)] = true;
        all_cycles(3, path, used, cycles);
    }
    auto sum = [&](const std::vector<int>& c) {
        double s = 0.0;
        for (std::size_t a = 0; a < c.size(); ++a) s += g[c[a]][c[(a + 1) % c.size()]];
        return s;
    };
    const auto first = std::find_if(cycles.begin(), cycles.end(), [&](const auto& c) { return sum(c) <= 0.0; });
    REQUIRE(first != cycles.end());
    CHECK(*first == std::vector<int>{0, 1, 2});
    CHECK(sum(*first) == e.witness->value);
}

TEST_CASE("no-free-loop: positive costs always certify") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::vector<std::string>> g(4, std::vector<std::string>(4, "0"));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::to_string(u(rng)) + " + 0.1*x1^2";
        const auto model = SwitchingModel::from_source(source({"0", "0", "0", "0"}, g, {"0", "0", "0", "0"}));
        CHECK(check_no_free_loop(model, grid_samples(-2, 2, 7)).verdict == Verdict::Certified);
    }
}

TEST_CASE("no-free-loop: the cycle enumeration is capped") {
    const int m = 9;
    std::vector<std::vector<std::string>> g(m, std::vector<std::string>(m, "1"));
    for (int i = 0; i < m; ++i) g[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = "0";
    const auto model = SwitchingModel::from_source(source(std::vector<std::string>(m, "0"), g, std::vector<std::string>(m, "0")));
    CHECK_THROWS_AS(check_no_free_loop(model, grid_samples(0, 1, 2)), CapExceeded);
}

TEST_CASE("terminal consistency: zero terminals, unit costs") {
    const auto xs = x_only(grid_samples(-1, 1, 5));
    CHECK(check_terminal_consistency(two_mode("1", "1"), xs).verdict == Verdict::Certified);
}

TEST_CASE("terminal consistency: a profitable terminal switch is refuted") {
    const auto xs = x_only(grid_samples(-1, 1, 5));
    const auto e = check_terminal_consistency(two_mode("1", "1", "0", "2"), xs);
    REQUIRE(e.verdict == Verdict::Refuted);
    REQUIRE(e.witness.has_value());
    CHECK(e.witness->i == 1);
    CHECK(e.witness->j == 2);
    CHECK(e.witness->x.size() == 1);
}

TEST_CASE("terminal consistency: h_i = i x on [0, 1]") {
    const auto xs = x_only(grid_samples(0, 1, 11));
    const auto e = check_terminal_consistency(two_mode("1", "1", "x1", "2*x1"), xs);
    // direct evaluation: h_1 - (h_2 - 1) = 1 - x, h_2 - (h_1 - 1) = 1 + x
    double worst = -1e300;
    for (const auto& x : xs) worst = std::max({worst, x[0] - 1.0, -x[0] - 1.0});
    CHECK(worst <= 0.0);
    CHECK(e.verdict == Verdict::Certified);
    // widening the box past x = 1 must refute
    CHECK(check_terminal_consistency(two_mode("1", "1", "x1", "2*x1"), x_only(grid_samples(0, 2, 11))).verdict ==
          Verdict::Refuted);
}

TEST_CASE("monotonicity classification") {
    const Dims dims{1, 2, 1};
    ProbeBox box(dims);
    box.set("x1", -1, 1).set("y1", -1, 1).set("y2", -1, 1).set("t", 0, 1);
    SUBCASE("increasing") {
        const auto m = SwitchingModel::from_source(source({"x1 + y2", "y1"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"}));
        const auto r = classify_monotonicity(m, box, 500, 1);
        CHECK(r.at(0, 1) == Direction::Nondecreasing);
        CHECK(r.at(1, 0) == Direction::Nondecreasing);
        CHECK(r.model_class == ModelClass::Increasing);
        CHECK(r.admits_increasing());
        CHECK_FALSE(r.admits_decreasing());
    }
    SUBCASE("decreasing") {
        const auto m = SwitchingModel::from_source(source({"-y2", "-y1"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"}));
        const auto r = classify_monotonicity(m, box, 500, 1);
        CHECK(r.at(0, 1) == Direction::Nonincreasing);
        CHECK(r.model_class == ModelClass::Decreasing);
    }
    SUBCASE("mixed") {
        const auto m = SwitchingModel::from_source(source({"y2^2", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"}));
        const auto r = classify_monotonicity(m, box, 500, 1);
        CHECK(r.at(0, 1) == Direction::Mixed);
        CHECK(r.at(1, 0) == Direction::Constant);
        CHECK(r.model_class == ModelClass::General);
        // brute force over secant pairs of y^2 on [-1, 1]: slope a + b takes both signs
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        bool neg = false, pos = false;
        for (int p = 0; p < 500; ++p) {
            const double a = u(rng), b = u(rng);
            (a + b < 0 ? neg : pos) = true;
        }
        CHECK((neg && pos));
    }
    SUBCASE("drivers without values") {
        const auto m = SwitchingModel::from_source(source({"x1", "t*x1"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"}));
        const auto r = classify_monotonicity(m, box, 200, 1);
        CHECK(r.at(0, 1) == Direction::Constant);
        CHECK(r.at(1, 0) == Direction::Constant);
        CHECK(r.model_class == ModelClass::Uncoupled);
        CHECK(r.lipschitz_y == 0.0);
    }
    CHECK_THROWS_AS(classify_monotonicity(SwitchingModel::from_source(source({"0", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"})),
                                          box, 1, 1),
                    ConfigError);
}

TEST_CASE("cost sign and zero-terminal-cost flags") {
    const auto pts = grid_samples(-1, 1, 5);
    const auto neg = check_costs_nonnegative(two_mode("x1", "1"), pts);
    CHECK(neg.verdict == Verdict::Refuted);
    REQUIRE(neg.witness.has_value());
    CHECK(neg.witness->x[0] < 0.0);
    const auto flag = check_zero_terminal_costs(two_mode("1 - t", "1"), x_only(pts));
    CHECK(flag.verdict == Verdict::Info);
    CHECK(flag.witness.has_value());
    CHECK_FALSE(check_zero_terminal_costs(two_mode("1", "1"), x_only(pts)).witness.has_value());
}

TEST_CASE("audit is deterministic and refuses only on refutation") {
    AuditConfig cfg;
    cfg.state_box = {{-1.0, 1.0}};
    const auto m = SwitchingModel::from_source(source({"x1 + 0.5*y2", "0.1*y1"}, {{"0", "0.2"}, {"0.3", "0"}}, {"0", "0"}));
    const auto a = audit_model(m, cfg);
    const auto b = audit_model(m, cfg);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t e = 0; e < a.entries.size(); ++e) {
        CHECK(a.entries[e].check == b.entries[e].check);
        CHECK(a.entries[e].verdict == b.entries[e].verdict);
        CHECK(a.entries[e].detail == b.entries[e].detail);
    }
    CHECK_FALSE(a.refuted());
    CHECK(a.monotonicity.model_class == ModelClass::Increasing);
    CHECK(std::abs(a.monotonicity.lipschitz_y - 0.5) < 1e-9);
    REQUIRE(a.find("polynomial growth") != nullptr);
    CHECK(a.find("polynomial growth")->verdict == Verdict::Skipped);

    const auto loop = audit_model(two_mode("0", "0"), cfg);
    CHECK(loop.refuted());
    const auto* e = loop.find("no-free-loop");
    REQUIRE(e != nullptr);
    CHECK(e->verdict == Verdict::Refuted);
    for (const auto& entry : loop.entries)
        if (entry.verdict == Verdict::Refuted) CHECK(entry.witness.has_value());
}

TEST_CASE("sample states cover the box corners and centre") {
    AuditConfig cfg;
    cfg.state_box = {{-2.0, 3.0}};
    cfg.n_states = 10;
    const auto pts = sample_states(two_mode("1", "1"), cfg);
    auto has = [&](double t, double x) {
        return std::any_of(pts.begin(), pts.end(), [&](const StatePoint& p) { return p.t == t && p.x[0] == x; });
    };
    CHECK(has(0.0, -2.0));
    CHECK(has(1.0, 3.0));
    CHECK(has(0.5, 0.5));
    for (const auto& p : pts) {
        CHECK(p.x[0] >= -2.0);
        CHECK(p.x[0] <= 3.0);
        CHECK(p.t >= 0.0);
        CHECK(p.t <= 1.0);
    }
}
