#pragma once

// Problem files are JSON with string-valued expressions:
//
// {
//   "name": "m2",
//   "horizon": 1.0,
//   "diffusion": { "k": 1, "d": 1, "drift": ["0"], "sigma": [["0"]] },
//   "modes": { "m": 2, "profit": ["1", "0"] },
//   "costs": [["0", "0.5"], ["0.5", "0"]],
//   "terminal": ["0", "0"],
//   "grid": { "box": [[0, 1]], "nodes": [11], "n_time": 200,
//             "boundary": "linear-extrapolation", "theta": 1.0 },
//   "initial": { "t0": 0.0, "x0": [0.5], "mode": 2 }
// }
//
// "grid" and "initial" are optional. Numbers may be given where an expression
// is expected.

#include <string>
#include <vector>

#include <json.hpp>

#include "oswitch/error.hpp"
#include "oswitch/grid.hpp"
#include "oswitch/model.hpp"

namespace oswitch {

/// Structurally invalid problem document (missing key, wrong type).
class ProblemError : public Error {
public:
    using Error::Error;
};

struct InitialState {
    double t0 = 0.0;
    std::vector<double> x0;
    int mode = 1;  // 1-based
};

struct Problem {
    nlohmann::json document;
    SwitchingModel model;
    GridSpec grid;
    InitialState initial;
};

/// Throws ParseError (JSON syntax or expression, with line/column) or ProblemError.
Problem parse_problem(const std::string& text);
/// JSON syntax only; ParseError carries line/column.
nlohmann::json parse_problem_document(const std::string& text);
Problem problem_from_json(const nlohmann::json& doc);
/// Throws IoError when the file cannot be read.
Problem load_problem_file(const std::string& path);

}  // namespace oswitch
