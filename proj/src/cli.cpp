#include "oswitch/cli.hpp"

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "oswitch/catalog.hpp"
#include "oswitch/error.hpp"
#include "oswitch/fields_io.hpp"
#include "oswitch/montecarlo.hpp"
#include "oswitch/oracle.hpp"
#include "oswitch/problem.hpp"
#include "oswitch/solver.hpp"

namespace oswitch {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
    std::string problem;
    std::string instance;
    std::string grid;
    std::string box;
    std::string scheme = "picard";
    double tol = 1e-6;
    std::optional<double> lambda;
    int max_iter = 200;
    int paths = 10'000;
    int steps = 0;  // 0: the grid's n_time
    std::uint64_t seed = 20100601;
    std::string out;
    std::string format = "json";
    std::string fields;
    double budget_scale = 1.0;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) parts.push_back(cur);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

double to_double(const std::string& s, const char* what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError(std::string("cannot read ") + what + " from '" + s + "'");
    return v;
}

void apply_overrides(json& doc, const Options& o) {
    if (!o.grid.empty()) {
        const auto parts = split(o.grid, ';');
        if (parts.size() != 2) throw ConfigError("--grid expects \"nx,...;nt\"");
        if (!doc.contains("grid")) {
            const int k = doc["diffusion"]["k"].get<int>();
            doc["grid"] = {{"box", json::array()}, {"nodes", json::array()}};
            for (int q = 0; q < k; ++q) {
                doc["grid"]["box"].push_back({-5.0, 5.0});
                doc["grid"]["nodes"].push_back(101);
            }
        }
        if (!parts[0].empty()) {
            json nodes = json::array();
            for (const auto& n : split(parts[0], ',')) nodes.push_back(static_cast<int>(to_double(n, "--grid")));
            doc["grid"]["nodes"] = nodes;
        }
        if (!parts[1].empty()) doc["grid"]["n_time"] = static_cast<int>(to_double(parts[1], "--grid"));
    }
    if (!o.box.empty()) {
        json box = json::array();
        for (const auto& iv : split(o.box, ',')) {
            const auto ends = split(iv, ':');
            if (ends.size() != 2) throw ConfigError("--box expects \"lo:hi,...\"");
            box.push_back({to_double(ends[0], "--box"), to_double(ends[1], "--box")});
        }
        if (!doc.contains("grid")) {
            doc["grid"] = {{"nodes", json::array()}};
            for (std::size_t q = 0; q < box.size(); ++q) doc["grid"]["nodes"].push_back(101);
        }
        doc["grid"]["box"] = box;
    }
}

struct Session {
    Problem problem;
    json config;
    std::uint64_t hash = 0;
    SolverOptions solver;
    Scheme scheme = Scheme::Picard;
};

Session open_session(const Options& o, const std::string& command) {
    if (o.problem.empty() == o.instance.empty()) throw IoError("give exactly one of --problem PATH or --instance NAME");
    json doc;
    if (!o.instance.empty()) {
        doc = catalog_document(o.instance);
    } else {
        std::ifstream in(o.problem, std::ios::binary);
        if (!in) throw IoError("cannot read problem file '" + o.problem + "'");
        std::ostringstream os;
        os << in.rdbuf();
        doc = parse_problem_document(os.str());
    }
    apply_overrides(doc, o);
    Session s;
    s.problem = problem_from_json(doc);
    const auto scheme = scheme_from_string(o.scheme);
    if (!scheme) throw ConfigError("unknown scheme '" + o.scheme + "' (picard, increasing, decreasing)");
    s.scheme = *scheme;
    if (!(o.tol > 0.0) || o.max_iter < 1 || o.paths < 1 || o.steps < 0 || o.budget_scale < 0.0)
        throw ConfigError("numeric options must be positive");
    s.solver.tol = o.tol;
    s.solver.max_iter = o.max_iter;
    s.config = {{"command", command}, {"problem", doc}, {"scheme", o.scheme}, {"tol", o.tol},
                {"max_iter", o.max_iter}, {"paths", o.paths}, {"steps", o.steps}, {"seed", o.seed},
                {"budget_scale", o.budget_scale}, {"lambda", o.lambda ? json(*o.lambda) : json(nullptr)}};
    s.hash = fnv1a64(s.config.dump());
    return s;
}

json header(const Session& s) {
    return {{"tool", kToolVersion}, {"config_hash", hash_hex(s.hash)}};
}

json witness_json(const Witness& w) {
    json j = {{"t", w.t}, {"x", w.x}, {"value", w.value}};
    if (!w.cycle.empty()) j["cycle"] = w.cycle;
    if (w.i > 0) j["i"] = w.i;
    if (w.j > 0) j["j"] = w.j;
    return j;
}

json audit_json(const AssumptionReport& rep) {
    json entries = json::array();
    for (const auto& e : rep.entries) {
        json j = {{"check", e.check}, {"verdict", to_string(e.verdict)}, {"detail", e.detail}};
        if (e.witness) j["witness"] = witness_json(*e.witness);
        entries.push_back(j);
    }
    json dirs = json::array();
    const int m = rep.monotonicity.m;
    for (int i = 0; i < m; ++i) {
        json row = json::array();
        for (int j = 0; j < m; ++j) row.push_back(i == j ? "-" : to_string(rep.monotonicity.at(i, j)));
        dirs.push_back(row);
    }
    return {{"entries", entries}, {"model_class", to_string(rep.monotonicity.model_class)}, {"directions", dirs},
            {"refuted", rep.refuted()}};
}

json iterations_json(const IterationReport& r) {
    json rows = json::array();
    for (const auto& it : r.iterations) {
        rows.push_back({{"n", it.n}, {"delta", it.delta}, {"ratio", it.ratio ? json(*it.ratio) : json(nullptr)},
                        {"violations", it.violations}, {"wall_ms", it.wall_ms}});
    }
    return {{"scheme", r.scheme}, {"converged", r.converged}, {"lambda", r.lambda},
            {"rho", r.rho ? json(*r.rho) : json(nullptr)}, {"violations", r.violations}, {"iterations", rows}};
}

AssumptionReport audit(const Session& s) {
    AuditConfig cfg;
    cfg.state_box = s.problem.grid.box;
    return audit_model(s.problem.model, cfg);
}

fs::path out_dir(const Options& o) {
    const fs::path dir = o.out.empty() ? fs::path("oswitch_out") : fs::path(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << text;
}

void write_fields(const fs::path& dir, const std::string& stem, const ValueFields& fields, const Session& s,
                  const Options& o) {
    const FieldsHeader h{kToolVersion, s.hash};
    {
        std::ofstream f(dir / (stem + ".bin"), std::ios::binary);
        if (!f) throw IoError("cannot write fields file");
        write_fields_binary(f, fields, h);
    }
    if (o.format == "csv") {
        std::ofstream f(dir / (stem + ".csv"));
        if (!f) throw IoError("cannot write fields file");
        write_fields_csv(f, fields, h);
    }
}

double value_at_initial(const ValueFields& fields, const Session& s) {
    const auto& in = s.problem.initial;
    return interpolate(fields, in.mode - 1, in.t0, in.x0).value;
}

ValueFields load_fields(const std::string& path, const Session& s) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read fields file '" + path + "'");
    ValueFields v = read_fields_binary(f);
    if (v.m != s.problem.model.modes() || v.grid.k() != s.problem.model.dims().k)
        throw FormatError("fields file does not match the problem dimensions");
    return v;
}

// Solved PDE fields, from --fields or a fresh solve. Returns the exit status of the solve.
int pde_fields(const Session& s, const Options& o, ValueFields& fields, json& info) {
    if (!o.fields.empty()) {
        fields = load_fields(o.fields, s);
        info = {{"source", o.fields}};
        return kExitOk;
    }
    const SolveResult res = solve(s.problem.model, s.problem.grid, s.scheme, s.solver, o.lambda);
    fields = res.fields;
    info = {{"source", "solve"}, {"iterations", iterations_json(res.report)}};
    return res.report.converged ? kExitOk : kExitNoConverge;
}

McConfig mc_config(const Session& s, const Options& o) {
    McConfig mc;
    mc.n_paths = o.paths;
    mc.n_steps = o.steps > 0 ? o.steps : s.problem.grid.n_time;
    mc.seed = o.seed;
    mc.tol_obstacle = s.solver.tol_obstacle;
    mc.budget_scale *= o.budget_scale;
    return mc;
}

json mc_json(const ComparisonRecord& r) {
    auto summary = [](const PayoffSummary& p) { return json{{"mean", p.mean}, {"se", p.se}, {"n", p.n}}; };
    return {{"pde_value", r.pde_value}, {"mc", summary(r.extracted)}, {"never_switch", summary(r.never_switch)},
            {"midpoint_switch", summary(r.midpoint_switch)}, {"budget", r.budget}, {"valid_paths", r.valid_paths},
            {"invalid_paths", r.invalid_paths}, {"chattering_paths", r.chattering_paths},
            {"clamped_paths", r.clamped_paths}, {"mean_switches", r.mean_switches}, {"verdict", r.verdict},
            {"pass", r.pass}, {"reason", r.reason}};
}

int cmd_check(const Options& o, std::ostream& out) {
    const Session s = open_session(o, "check");
    const AssumptionReport rep = audit(s);
    json j = audit_json(rep);
    j["header"] = header(s);
    j["instance"] = s.problem.model.name();
    out << j.dump(2) << "\n";
    if (!o.out.empty()) write_text(out_dir(o) / "check.json", j.dump(2) + "\n");
    return rep.refuted() ? kExitRefused : kExitOk;
}

int cmd_solve(const Options& o, std::ostream& out, std::ostream& err) {
    const Session s = open_session(o, "solve");
    const AssumptionReport rep = audit(s);
    if (rep.refuted()) {
        json j = audit_json(rep);
        j["header"] = header(s);
        out << j.dump(2) << "\n";
        err << "solve refused: an assumption is refuted at a sample\n";
        return kExitRefused;
    }
    const SolveResult res = solve(s.problem.model, s.problem.grid, s.scheme, s.solver, o.lambda);
    const ResidualReport resid = residual_report(res.fields, s.problem.model, s.problem.grid);
    const fs::path dir = out_dir(o);
    write_fields(dir, "fields", res.fields, s, o);
    json j = {{"header", header(s)},
              {"instance", s.problem.model.name()},
              {"model_class", to_string(rep.monotonicity.model_class)},
              {"converged", res.report.converged},
              {"value", value_at_initial(res.fields, s)},
              {"initial", {{"t0", s.problem.initial.t0}, {"x0", s.problem.initial.x0}, {"mode", s.problem.initial.mode}}},
              {"report", iterations_json(res.report)},
              {"residual", {{"min_slack", resid.min_slack}, {"max_abs_min_form", resid.max_abs_min_form},
                            {"max_defect", resid.max_defect}, {"max_scaled_defect", resid.max_scaled_defect},
                            {"flagged", resid.flagged}, {"checked", resid.checked}}},
              {"obstacle_infeasibility", obstacle_infeasibility(res.fields, s.problem.model)}};
    if (res.sandwich) j["sandwich"] = {{"total", res.sandwich->total}, {"per_iterate", res.sandwich->violations}};
    if (!res.report.converged) j["flag"] = "non-converged: fields are the last iterate";
    write_text(dir / "report.json", j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    if (!res.report.converged) {
        err << "solve did not converge in " << s.solver.max_iter << " iterations\n";
        return kExitNoConverge;
    }
    return kExitOk;
}

int cmd_dp(const Options& o, std::ostream& out) {
    const Session s = open_session(o, "dp");
    const auto& m = s.problem.model;
    const ChainKernel chain = build_chain(m.diffusion(), s.problem.grid, m.horizon());
    const ValueFields fields = dp_solve(m, chain);
    const fs::path dir = out_dir(o);
    write_fields(dir, "dp_fields", fields, s, o);
    json j = {{"header", header(s)}, {"instance", m.name()}, {"value", value_at_initial(fields, s)}};
    const Lattice lat(s.problem.grid);
    try {
        const auto e = enumerate_strategies(m, chain, lat.nearest(s.problem.initial.x0), s.problem.initial.mode);
        j["enumeration"] = json::parse(e.to_json());
    } catch (const CapExceeded&) {
        j["enumeration"] = nullptr;
    }
    write_text(dir / "dp.json", j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
    const Session s = open_session(o, "simulate");
    ValueFields fields;
    json info;
    const int status = pde_fields(s, o, fields, info);
    if (status != kExitOk) return status;
    const auto& in = s.problem.initial;
    const ComparisonRecord rec = validate_representation(fields, s.problem.model, in.t0, in.x0, in.mode, mc_config(s, o));
    json j = mc_json(rec);
    j["header"] = header(s);
    j["fields"] = info;
    if (!o.out.empty()) write_text(out_dir(o) / "simulate.json", j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return rec.pass ? kExitOk : kExitCompare;
}

int cmd_compare(const Options& o, std::ostream& out) {
    const Session s = open_session(o, "compare");
    const auto& model = s.problem.model;
    const auto& in = s.problem.initial;
    ValueFields pde;
    json info;
    const int status = pde_fields(s, o, pde, info);
    if (status != kExitOk) return status;
    const ChainKernel chain = build_chain(model.diffusion(), pde.grid, model.horizon());
    const ValueFields dp = dp_solve(model, chain);
    const ComparisonRecord rec = validate_representation(pde, model, in.t0, in.x0, in.mode, mc_config(s, o));
    const double v_pde = value_at_initial(pde, s);
    const double v_dp = value_at_initial(dp, s);
    const double dp_budget = o.budget_scale * std::max(1e-2 * std::abs(v_dp), 1e-3);
    const double gap_pde_dp = std::abs(v_pde - v_dp);
    const double gap_pde_mc = std::abs(v_pde - rec.extracted.mean);
    const double gap_dp_mc = std::abs(v_dp - rec.extracted.mean);
    const double mc_margin = 2.0 * rec.extracted.se + rec.budget;
    const bool ok = gap_pde_dp <= dp_budget && rec.pass && gap_dp_mc <= mc_margin + dp_budget;
    json j = {{"header", header(s)},
              {"instance", model.name()},
              {"table", {{"pde", v_pde}, {"dp", v_dp}, {"mc", rec.extracted.mean}, {"mc_se", rec.extracted.se}}},
              {"gaps", {{"pde_dp", gap_pde_dp}, {"pde_mc", gap_pde_mc}, {"dp_mc", gap_dp_mc}}},
              {"budgets", {{"pde_dp", dp_budget}, {"pde_mc", mc_margin}, {"dp_mc", mc_margin + dp_budget}}},
              {"mc", mc_json(rec)},
              {"fields", info},
              {"pass", ok}};
    if (!o.out.empty()) write_text(out_dir(o) / "compare.json", j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return ok ? kExitOk : kExitCompare;
}

int cmd_catalog(const Options& o, std::ostream& out) {
    if (!o.instance.empty()) {
        out << catalog_document(o.instance).dump(2) << "\n";
        return kExitOk;
    }
    for (const auto& n : catalog_names()) out << n << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Optimal m-modes switching: assumption checks, solvers, oracles and Monte Carlo validation", "oswitch"};
    app.require_subcommand(1);
    auto common = [&](CLI::App* c) {
        c->add_option("--problem", o.problem, "problem file (JSON)");
        c->add_option("--instance", o.instance, "built-in catalog instance");
        c->add_option("--grid", o.grid, "\"nx,...;nt\" node counts and time steps");
        c->add_option("--box", o.box, "\"lo:hi,...\" truncated state box");
        c->add_option("--scheme", o.scheme, "picard | increasing | decreasing");
        c->add_option("--tol", o.tol, "sup-norm stopping tolerance");
        c->add_option("--lambda", o.lambda, "exponential transform exponent");
        c->add_option("--max-iter", o.max_iter, "iteration cap");
        c->add_option("--paths", o.paths, "Monte Carlo paths");
        c->add_option("--steps", o.steps, "Monte Carlo time steps (default: grid n_time)");
        c->add_option("--seed", o.seed, "Monte Carlo seed");
        c->add_option("--out", o.out, "output directory");
        c->add_option("--format", o.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
        c->add_option("--fields", o.fields, "solved fields file (binary) to reuse");
        c->add_option("--budget-scale", o.budget_scale, "multiplier on every comparison budget");
    };
    CLI::App* check = app.add_subcommand("check", "audit the standing assumptions at sampled states");
    CLI::App* solvec = app.add_subcommand("solve", "solve the obstacle system on the grid");
    CLI::App* dp = app.add_subcommand("dp", "dynamic programming on the Markov-chain approximation");
    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo validation of the solved value");
    CLI::App* cmp = app.add_subcommand("compare", "PDE, DP and Monte Carlo values side by side");
    CLI::App* cat = app.add_subcommand("catalog", "list built-in instances or print one");
    for (CLI::App* c : {check, solvec, dp, sim, cmp, cat}) common(c);

    std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "oswitch: " << e.what() << "\n";
        return kExitIo;
    }

    try {
        if (check->parsed()) return cmd_check(o, out);
        if (solvec->parsed()) return cmd_solve(o, out, err);
        if (dp->parsed()) return cmd_dp(o, out);
        if (sim->parsed()) return cmd_simulate(o, out);
        if (cmp->parsed()) return cmd_compare(o, out);
        if (cat->parsed()) return cmd_catalog(o, out);
    } catch (const ParseError& e) {
        err << "oswitch: parse error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ProblemError& e) {
        err << "oswitch: " << e.what() << "\n";
        return kExitIo;
    } catch (const IoError& e) {
        err << "oswitch: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        err << "oswitch: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        err << "oswitch: refused: " << e.what() << "\n";
        return kExitRefused;
    }
    return kExitIo;
}

}  // namespace oswitch
