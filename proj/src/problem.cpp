#include "oswitch/problem.hpp"

#include <fstream>
#include <sstream>

namespace oswitch {

namespace {

using nlohmann::json;

const json& need(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw ProblemError("problem: missing key '" + std::string(key) + "' in " + where);
    return obj.at(key);
}

std::string expr_text(const json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        return os.str();
    }
    throw ProblemError("problem: " + where + " must be a string expression or a number");
}

std::vector<std::string> expr_list(const json& v, const std::string& where) {
    if (!v.is_array()) throw ProblemError("problem: " + where + " must be an array");
    std::vector<std::string> out;
    for (std::size_t e = 0; e < v.size(); ++e) out.push_back(expr_text(v[e], where + "[" + std::to_string(e) + "]"));
    return out;
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ProblemError("problem: " + where + " must be a number");
    return v.get<double>();
}

int integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ProblemError("problem: " + where + " must be an integer");
    return v.get<int>();
}

}  // namespace

Problem problem_from_json(const json& doc) {
    if (!doc.is_object()) throw ProblemError("problem: document must be a JSON object");
    ModelSource src;
    src.name = doc.contains("name") && doc["name"].is_string() ? doc["name"].get<std::string>() : "unnamed";
    src.horizon = number(need(doc, "horizon", "document"), "horizon");
    const json& diff = need(doc, "diffusion", "document");
    src.k = integer(need(diff, "k", "diffusion"), "diffusion.k");
    src.d = integer(need(diff, "d", "diffusion"), "diffusion.d");
    src.drift = expr_list(need(diff, "drift", "diffusion"), "diffusion.drift");
    const json& sig = need(diff, "sigma", "diffusion");
    if (!sig.is_array()) throw ProblemError("problem: diffusion.sigma must be an array of rows");
    for (std::size_t q = 0; q < sig.size(); ++q) src.sigma.push_back(expr_list(sig[q], "diffusion.sigma[" + std::to_string(q) + "]"));
    const json& modes = need(doc, "modes", "document");
    const int m = integer(need(modes, "m", "modes"), "modes.m");
    src.profit = expr_list(need(modes, "profit", "modes"), "modes.profit");
    if (static_cast<int>(src.profit.size()) != m) throw ProblemError("problem: modes.profit needs m entries");
    const json& costs = need(doc, "costs", "document");
    if (!costs.is_array()) throw ProblemError("problem: costs must be an m x m array");
    for (std::size_t i = 0; i < costs.size(); ++i) src.costs.push_back(expr_list(costs[i], "costs[" + std::to_string(i) + "]"));
    src.terminal = expr_list(need(doc, "terminal", "document"), "terminal");

    Problem p;
    p.document = doc;
    p.model = SwitchingModel::from_source(src);

    const int k = src.k;
    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        const json& box = need(g, "box", "grid");
        if (!box.is_array()) throw ProblemError("problem: grid.box must be an array of [lo, hi]");
        for (std::size_t q = 0; q < box.size(); ++q) {
            if (!box[q].is_array() || box[q].size() != 2) throw ProblemError("problem: grid.box entries must be [lo, hi]");
            p.grid.box.emplace_back(number(box[q][0], "grid.box"), number(box[q][1], "grid.box"));
        }
        const json& nodes = need(g, "nodes", "grid");
        if (!nodes.is_array()) throw ProblemError("problem: grid.nodes must be an array");
        for (const auto& n : nodes) p.grid.nodes.push_back(integer(n, "grid.nodes"));
        if (g.contains("n_time")) p.grid.n_time = integer(g["n_time"], "grid.n_time");
        if (g.contains("theta")) p.grid.theta = number(g["theta"], "grid.theta");
        if (g.contains("boundary")) {
            const std::string b = g["boundary"].is_string() ? g["boundary"].get<std::string>() : "";
            if (b == "linear-extrapolation") p.grid.boundary = BoundaryPolicy::LinearExtrapolation;
            else if (b == "zero-second-derivative") p.grid.boundary = BoundaryPolicy::ZeroSecondDerivative;
            else throw ProblemError("problem: grid.boundary must be linear-extrapolation or zero-second-derivative");
        }
    } else {
        p.grid.box.assign(static_cast<std::size_t>(k), {-5.0, 5.0});
        p.grid.nodes.assign(static_cast<std::size_t>(k), 101);
    }
    p.grid.validate(k);

    p.initial.x0.resize(static_cast<std::size_t>(k));
    for (int q = 0; q < k; ++q)
        p.initial.x0[static_cast<std::size_t>(q)] = 0.5 * (p.grid.box[static_cast<std::size_t>(q)].first + p.grid.box[static_cast<std::size_t>(q)].second);
    if (doc.contains("initial")) {
        const json& in = doc["initial"];
        if (in.contains("t0")) p.initial.t0 = number(in["t0"], "initial.t0");
        if (in.contains("mode")) p.initial.mode = integer(in["mode"], "initial.mode");
        if (in.contains("x0")) {
            if (!in["x0"].is_array() || static_cast<int>(in["x0"].size()) != k) throw ProblemError("problem: initial.x0 needs k numbers");
            for (int q = 0; q < k; ++q) p.initial.x0[static_cast<std::size_t>(q)] = number(in["x0"][static_cast<std::size_t>(q)], "initial.x0");
        }
    }
    if (p.initial.mode < 1 || p.initial.mode > m) throw ProblemError("problem: initial.mode outside 1..m");
    if (!(p.initial.t0 >= 0.0 && p.initial.t0 < src.horizon)) throw ProblemError("problem: initial.t0 outside [0, T)");
    return p;
}

json parse_problem_document(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t off = e.byte == 0 ? 0 : e.byte - 1;
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < off && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError("problem file is not valid JSON", off, line, col);
    }
    return doc;
}

Problem parse_problem(const std::string& text) { return problem_from_json(parse_problem_document(text)); }

Problem load_problem_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read problem file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_problem(os.str());
}

}  // namespace oswitch
