#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "oswitch/problem.hpp"

namespace oswitch {

/// Built-in instances, usable without a problem file.
///
///   m2                  deterministic two-mode closed form: v_1(0) = 1, v_2(0) = 0.5
///   martingale          h(x) = x under Brownian motion, prohibitive costs: v(t, x) = x
///   ou_profit           two modes, mean-reverting price, profit x1 - 0.1 in mode 1
///   triangle            three modes on Brownian motion with asymmetric costs
///   coupled_increasing  drivers nondecreasing in the other mode's value
///   coupled_decreasing  drivers nonincreasing in the other mode's value
std::vector<std::string> catalog_names();
nlohmann::json catalog_document(const std::string& name);  // ConfigError for unknown names
Problem catalog_problem(const std::string& name);

}  // namespace oswitch
