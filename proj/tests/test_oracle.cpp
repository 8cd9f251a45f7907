#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <json.hpp>

#include "oswitch/error.hpp"
#include "oswitch/oracle.hpp"
#include "oswitch/solver.hpp"

using namespace oswitch;

namespace {

ModelSource base(std::vector<std::string> profit, std::vector<std::vector<std::string>> costs,
                 std::vector<std::string> terminal, const std::string& drift = "0", const std::string& sigma = "0") {
    ModelSource s;
    s.name = "t";
    s.horizon = 1.0;
    s.drift = {drift};
    s.sigma = {{sigma}};
    s.profit = std::move(profit);
    s.costs = std::move(costs);
    s.terminal = std::move(terminal);
    return s;
}

SwitchingModel make(const ModelSource& s) { return SwitchingModel::from_source(s); }

GridSpec grid1(double lo, double hi, int n, int n_time) {
    GridSpec g;
    g.box = {{lo, hi}};
    g.nodes = {n};
    g.n_time = n_time;
    return g;
}

std::vector<double> mul(const ChainMatrix& p, const std::vector<double>& v) {
    std::vector<double> out(v.size(), 0.0);
    for (int r = 0; r < p.outerSize(); ++r)
        for (ChainMatrix::InnerIterator it(p, r); it; ++it)
            out[static_cast<std::size_t>(r)] += it.value() * v[static_cast<std::size_t>(it.col())];
    return out;
}

}  // namespace

TEST_CASE("chain without dynamics is the identity") {
    const auto chain = build_chain(make(base({"1", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"})).diffusion(),
                                   grid1(0, 1, 7, 10), 1.0);
    const auto& p = chain.at(0);
    CHECK(p.nonZeros() == 7);
    for (int r = 0; r < 7; ++r) CHECK(p.coeff(r, r) == 1.0);
}

TEST_CASE("unit diffusion chain") {
    const GridSpec g = grid1(-1, 1, 21, 100);
    const auto chain = build_chain(make(base({"0", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"}, "0", "1")).diffusion(), g, 1.0);
    const double dt = 0.01, dx = 0.1;
    const auto& p = chain.at(0);
    CHECK(p.coeff(10, 9) == doctest::Approx(dt / (2 * dx * dx)).epsilon(1e-12));
    CHECK(p.coeff(10, 11) == doctest::Approx(dt / (2 * dx * dx)).epsilon(1e-12));
    CHECK(p.coeff(10, 10) == doctest::Approx(1.0 - dt / (dx * dx)).epsilon(1e-12));
    for (int r = 0; r < p.outerSize(); ++r) {
        double s = 0.0;
        for (ChainMatrix::InnerIterator it(p, r); it; ++it) {
            CHECK(it.value() >= 0.0);
            s += it.value();
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    // second moment straight from the row
    double m1 = 0.0, m2 = 0.0;
    for (ChainMatrix::InnerIterator it(p, 10); it; ++it) {
        const double dxr = (it.col() - 10) * dx;
        m1 += it.value() * dxr;
        m2 += it.value() * dxr * dxr;
    }
    CHECK(std::abs(m2 - m1 * m1 - dt) <= 0.05 * dt);
    const auto mom = chain_moments(chain, 0, 10);
    CHECK(std::abs(mom.covariance[0] - (m2 - m1 * m1)) <= 1e-15);
    CHECK(std::abs(mom.mean[0]) <= 1e-15);
}

TEST_CASE("chain moments are locally consistent with drift and covariance") {
    GridSpec g;
    g.box = {{-1.0, 1.0}, {-1.0, 1.0}};
    g.nodes = {21, 21};
    g.n_time = 200;
    ModelSource s = base({"0", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"});
    s.k = 2;
    s.d = 2;
    s.drift = {"0.5", "-0.25"};
    s.sigma = {{"0.4", "0"}, {"0.1", "0.3"}};
    const auto chain = build_chain(make(s).diffusion(), g, 1.0);
    const double dt = 1.0 / 200;
    const auto mom = chain_moments(chain, 0, 10 + 10 * 21);
    CHECK(std::abs(mom.mean[0] - 0.5 * dt) <= 1e-12);
    CHECK(std::abs(mom.mean[1] + 0.25 * dt) <= 1e-12);
    // a = sigma sigma^T = [[0.16, 0.04], [0.04, 0.10]]; upwind drift adds O(dx) * dt to the diagonal
    CHECK(std::abs(mom.covariance[0] - 0.16 * dt) <= 0.5 * 0.1 * dt);
    CHECK(std::abs(mom.covariance[1] - 0.04 * dt) <= 1e-3 * dt);
    CHECK(std::abs(mom.covariance[3] - 0.10 * dt) <= 0.5 * 0.1 * dt);
}

TEST_CASE("chain preconditions") {
    SUBCASE("time step above the stability limit") {
        const auto d = make(base({"0", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"}, "0", "1")).diffusion();
        CHECK_THROWS_AS(build_chain(d, grid1(-1, 1, 41, 10), 1.0), NumericalError);
    }
    SUBCASE("negative stencil coefficient") {
        GridSpec g;
        g.box = {{-1.0, 1.0}, {-1.0, 1.0}};
        g.nodes = {11, 11};
        g.n_time = 1000;
        ModelSource s = base({"0", "0"}, {{"0", "1"}, {"1", "0"}}, {"0", "0"});
        s.k = 2;
        s.d = 2;
        s.drift = {"0", "0"};
        s.sigma = {{"1", "0"}, {"1.5", "0.1"}};  // covariance 1.5 exceeds the first variance
        CHECK_THROWS_AS(build_chain(make(s).diffusion(), g, 1.0), NumericalError);
    }
}

TEST_CASE("dynamic programming on the deterministic instance") {
    const auto model = make(base({"1", "0"}, {{"0", "0.5"}, {"0.5", "0"}}, {"0", "0"}));
    const GridSpec g = grid1(0, 1, 11, 200);
    const auto f = dp_solve(model, build_chain(model.diffusion(), g, 1.0));
    for (std::size_t n = 0; n < 11; ++n) {
        CHECK(std::abs(f.value(0, 0, n) - 1.0) <= 2e-2);
        CHECK(std::abs(f.value(0, 1, n) - 0.5) <= 2e-2);
    }
    CHECK(obstacle_infeasibility(f, model) <= 0.0);
}

TEST_CASE("zero drivers and prohibitive costs propagate the terminal expectation") {
    const auto model = make(base({"0", "0"}, {{"0", "1e6"}, {"1e6", "0"}}, {"x1^2", "1 - x1"}, "0.2*x1", "0.5"));
    const GridSpec g = grid1(-2, 2, 21, 20);
    const auto chain = build_chain(model.diffusion(), g, 1.0);
    const auto f = dp_solve(model, chain);
    const Lattice lat(g);
    std::vector<double> h1(lat.size()), h2(lat.size());
    for (std::size_t n = 0; n < lat.size(); ++n) {
        const double x = lat.coord(n, 0);
        h1[n] = x * x;
        h2[n] = 1.0 - x;
    }
    for (int k = g.n_time - 1; k >= 0; --k) {
        h1 = mul(chain.at(k), h1);
        h2 = mul(chain.at(k), h2);
    }
    for (std::size_t n = 0; n < lat.size(); ++n) {
        CHECK(std::abs(f.value(0, 0, n) - h1[n]) <= 1e-12);
        CHECK(std::abs(f.value(0, 1, n) - h2[n]) <= 1e-12);
    }
}

TEST_CASE("dynamic programming equals brute-force enumeration") {
    SUBCASE("two modes, three steps, five nodes") {
        const auto model = make(base({"x1", "0.2 - x1^2"}, {{"0", "0.1"}, {"0.15", "0"}}, {"0", "0.5*x1"}, "-x1", "0.5"));
        const GridSpec g = grid1(-1, 1, 5, 3);
        const auto chain = build_chain(model.diffusion(), g, 1.0);
        const auto f = dp_solve(model, chain);
        for (std::size_t node = 0; node < 5; ++node)
            for (int i0 = 1; i0 <= 2; ++i0) {
                const auto e = enumerate_strategies(model, chain, node, i0);
                CHECK(e.value == f.value(0, i0 - 1, node));
            }
    }
    SUBCASE("three modes, six steps, nine nodes") {
        const auto model = make(base({"x1", "-x1", "0.1"}, {{"0", "0.3", "0.2"}, {"0.25", "0", "0.15"}, {"0.1", "0.35", "0"}},
                                     {"0", "0.1*x1", "0"}, "0", "0.4"));
        const GridSpec g = grid1(-1, 1, 9, 6);
        const auto chain = build_chain(model.diffusion(), g, 1.0);
        const auto f = dp_solve(model, chain);
        for (int i0 = 1; i0 <= 3; ++i0) {
            const auto e = enumerate_strategies(model, chain, 4, i0);
            CHECK(e.value == f.value(0, i0 - 1, 4));
            CHECK(e.mode_path.size() == 6);
            CHECK(e.mode_path.front() >= 1);
        }
    }
    SUBCASE("time-dependent data") {
        const auto model = make(base({"t*x1", "0.1"}, {{"0", "0.05 + 0.1*t"}, {"0.1", "0"}}, {"0", "0"}, "0.3*t", "0.3"));
        const GridSpec g = grid1(-1, 1, 7, 5);
        const auto chain = build_chain(model.diffusion(), g, 1.0);
        REQUIRE(chain.time_dependent);
        const auto f = dp_solve(model, chain);
        for (int i0 = 1; i0 <= 2; ++i0) CHECK(enumerate_strategies(model, chain, 3, i0).value == f.value(0, i0 - 1, 3));
    }
}

TEST_CASE("enumeration on the deterministic instance") {
    const auto model = make(base({"1", "0"}, {{"0", "0.5"}, {"0.5", "0"}}, {"0", "0"}));
    const GridSpec g = grid1(0, 1, 5, 4);
    const auto chain = build_chain(model.diffusion(), g, 1.0);
    const auto e = enumerate_strategies(model, chain, 2, 2);
    CHECK(std::abs(e.value - 0.5) <= 0.25);
    CHECK(e.value == 0.5);  // left-endpoint sums are exact for a constant rate
    CHECK(e.mode_path == std::vector<int>{1, 1, 1, 1});
    const auto j = nlohmann::json::parse(e.to_json());
    CHECK(j["value"].get<double>() == 0.5);
    CHECK(j["mode_path"].size() == 4);
}

TEST_CASE("enumeration with prohibitive costs never switches") {
    const auto model = make(base({"x1", "0.3"}, {{"0", "1e6"}, {"1e6", "0"}}, {"x1", "0"}, "0", "0.5"));
    const GridSpec g = grid1(-1, 1, 5, 4);
    const auto chain = build_chain(model.diffusion(), g, 1.0);
    // oracle: mode 1 held throughout, E sum dt x + E h(X_T)
    std::vector<double> v(5);
    const Lattice lat(g);
    for (std::size_t n = 0; n < 5; ++n) v[n] = lat.coord(n, 0);
    for (int k = 3; k >= 0; --k) {
        v = mul(chain.at(k), v);
        for (std::size_t n = 0; n < 5; ++n) v[n] += 0.25 * lat.coord(n, 0);
    }
    const auto e = enumerate_strategies(model, chain, 3, 1);
    CHECK(std::abs(e.value - v[3]) <= 1e-12);
    for (int mode : e.mode_path) CHECK(mode == 1);
}

TEST_CASE("enumeration is symmetric in identical modes") {
    const auto model = make(base({"x1", "x1"}, {{"0", "0.2"}, {"0.2", "0"}}, {"x1^2", "x1^2"}, "0", "0.5"));
    const GridSpec g = grid1(-1, 1, 5, 4);
    const auto chain = build_chain(model.diffusion(), g, 1.0);
    CHECK(enumerate_strategies(model, chain, 1, 1).value == enumerate_strategies(model, chain, 1, 2).value);
}

TEST_CASE("enumeration caps") {
    const auto m2 = make(base({"1", "0"}, {{"0", "0.5"}, {"0.5", "0"}}, {"0", "0"}));
    CHECK_THROWS_AS(enumerate_strategies(m2, build_chain(m2.diffusion(), grid1(0, 1, 5, 7), 1.0), 0, 1), CapExceeded);
    CHECK_THROWS_AS(enumerate_strategies(m2, build_chain(m2.diffusion(), grid1(0, 1, 10, 6), 1.0), 0, 1), CapExceeded);
    const auto m4 = make(base({"0", "0", "0", "0"},
                              {{"0", "1", "1", "1"}, {"1", "0", "1", "1"}, {"1", "1", "0", "1"}, {"1", "1", "1", "0"}},
                              {"0", "0", "0", "0"}));
    CHECK_THROWS_AS(enumerate_strategies(m4, build_chain(m4.diffusion(), grid1(0, 1, 5, 3), 1.0), 0, 1), CapExceeded);
    EnumerationCaps tight;
    tight.max_evaluations = 10;
    CHECK_THROWS_AS(enumerate_strategies(m2, build_chain(m2.diffusion(), grid1(0, 1, 5, 6), 1.0), 0, 1, tight), CapExceeded);
}

TEST_CASE("coupled drivers: the enumerator ignores values, within the recorded gap") {
    const auto model = make(base({"x1 + 0.1*y2", "0.1*y1 - 0.05"}, {{"0", "0.2"}, {"0.2", "0"}}, {"0", "0"}, "-x1", "0.5"));
    const GridSpec g = grid1(-1, 1, 5, 4);
    const auto chain = build_chain(model.diffusion(), g, 1.0);
    const auto f = dp_solve(model, chain);
    for (int i0 = 1; i0 <= 2; ++i0) {
        const double v = f.value(0, i0 - 1, 2);
        const double e = enumerate_strategies(model, chain, 2, i0).value;
        CHECK(std::abs(v - e) <= 2e-2 * (1.0 + std::abs(v)));
    }
}
