#include "oswitch/catalog.hpp"

#include <initializer_list>

namespace oswitch {

using nlohmann::json;

namespace {

// Explicit arrays: a braced list of two-string lists would otherwise become a JSON object.
json matrix(std::initializer_list<std::initializer_list<const char*>> rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json row = json::array();
        for (const char* e : r) row.push_back(e);
        out.push_back(row);
    }
    return out;
}

json list(std::initializer_list<const char*> items) {
    json out = json::array();
    for (const char* e : items) out.push_back(e);
    return out;
}

json two_mode_ou(const char* name, const char* f1, const char* f2, int n_time = 100) {
    return {
        {"name", name},
        {"horizon", 1.0},
        {"diffusion", {{"k", 1}, {"d", 1}, {"drift", list({"-x1"})}, {"sigma", matrix({{"0.5"}})}}},
        {"modes", {{"m", 2}, {"profit", list({f1, f2})}}},
        {"costs", matrix({{"0", "0.2"}, {"0.2", "0"}})},
        {"terminal", list({"0", "0"})},
        {"grid", {{"box", {{-3.0, 3.0}}}, {"nodes", {61}}, {"n_time", n_time}, {"boundary", "linear-extrapolation"}, {"theta", 1.0}}},
        {"initial", {{"t0", 0.0}, {"x0", {0.2}}, {"mode", 2}}},
    };
}

}  // namespace

std::vector<std::string> catalog_names() {
    return {"m2", "martingale", "ou_profit", "triangle", "coupled_increasing", "coupled_decreasing"};
}

json catalog_document(const std::string& name) {
    if (name == "m2") {
        return {
            {"name", "m2"},
            {"horizon", 1.0},
            {"diffusion", {{"k", 1}, {"d", 1}, {"drift", list({"0"})}, {"sigma", matrix({{"0"}})}}},
            {"modes", {{"m", 2}, {"profit", list({"1", "0"})}}},
            {"costs", matrix({{"0", "0.5"}, {"0.5", "0"}})},
            {"terminal", list({"0", "0"})},
            {"grid", {{"box", {{0.0, 1.0}}}, {"nodes", {11}}, {"n_time", 200}, {"boundary", "linear-extrapolation"}, {"theta", 1.0}}},
            {"initial", {{"t0", 0.0}, {"x0", {0.5}}, {"mode", 2}}},
        };
    }
    if (name == "martingale") {
        return {
            {"name", "martingale"},
            {"horizon", 1.0},
            {"diffusion", {{"k", 1}, {"d", 1}, {"drift", list({"0"})}, {"sigma", matrix({{"1"}})}}},
            {"modes", {{"m", 2}, {"profit", list({"0", "0"})}}},
            {"costs", matrix({{"0", "1e6"}, {"1e6", "0"}})},
            {"terminal", list({"x1", "x1"})},
            {"grid", {{"box", {{-10.0, 10.0}}}, {"nodes", {201}}, {"n_time", 100}, {"boundary", "linear-extrapolation"}, {"theta", 1.0}}},
            {"initial", {{"t0", 0.0}, {"x0", {1.0}}, {"mode", 1}}},
        };
    }
    if (name == "ou_profit") return two_mode_ou("ou_profit", "x1 - 0.1", "0");
    if (name == "triangle") {
        return {
            {"name", "triangle"},
            {"horizon", 1.0},
            {"diffusion", {{"k", 1}, {"d", 1}, {"drift", list({"0"})}, {"sigma", matrix({{"0.4"}})}}},
            {"modes", {{"m", 3}, {"profit", list({"x1", "-x1", "0.1"})}}},
            {"costs", matrix({{"0", "0.3", "0.2"}, {"0.25", "0", "0.15"}, {"0.1", "0.35", "0"}})},
            {"terminal", list({"0", "0", "0"})},
            {"grid", {{"box", {{-3.0, 3.0}}}, {"nodes", {61}}, {"n_time", 100}, {"boundary", "linear-extrapolation"}, {"theta", 1.0}}},
            {"initial", {{"t0", 0.0}, {"x0", {0.0}}, {"mode", 3}}},
        };
    }
    if (name == "coupled_increasing") return two_mode_ou("coupled_increasing", "x1 + 0.3*y2", "0.2*y1 - 0.1", 200);
    if (name == "coupled_decreasing") return two_mode_ou("coupled_decreasing", "x1 - 0.3*y2", "0.2 - 0.3*y1", 200);
    throw ConfigError("unknown catalog instance '" + name + "'");
}

Problem catalog_problem(const std::string& name) { return problem_from_json(catalog_document(name)); }

}  // namespace oswitch
