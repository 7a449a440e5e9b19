#include "orbitshift/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>

#include "orbitshift/acceptance.hpp"
#include "orbitshift/io.hpp"
#include "orbitshift/oracle.hpp"
#include "vendor_json.hpp"

namespace orbitshift::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// configuration schema (strict: unknown keys are rejected)
// ---------------------------------------------------------------------------

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key \"" + it.key() + "\" in " + where, it.key());
}

double get_finite(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + " must be finite");
    return x;
}

int get_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
    return v.get<int>();
}

Vec get_vec(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ConfigError(where + " must be a non-empty array");
    Vec out(v.size());
    for (size_t i = 0; i < v.size(); ++i)
        out[static_cast<int>(i)] = get_finite(v[i], where + "[" + std::to_string(i) + "]");
    return out;
}

std::map<std::string, double> get_params(const json& obj, const std::string& where) {
    std::map<std::string, double> out;
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        out[it.key()] = get_finite(it.value(), where + "." + it.key());
    return out;
}

struct SystemSpec {
    std::string id;
    std::map<std::string, double> params;
    DerivativeMode mode = DerivativeMode::Analytic;
};

struct PerturbationSpec {
    std::string id;
    std::map<std::string, double> params;
    double k = 1.0;
    std::vector<double> k_list;
};

struct TraceSpec {
    Vec x0;
    double t0 = 0, t1 = 1;
    int order = 0;
    int samples = 200;
    std::optional<double> tol_rel, tol_abs;
};

struct PoincareSpec {
    std::vector<Vec> seeds;
    int turns = 100;
    double section_angle = 0;
};

struct CycleSpec {
    Vec guess;
    int m = 1;
    double newton_tol = 1e-10;
    int max_iter = 50;
    int sections = 8;
    double section_angle = 0;
};

struct VerifySpec {
    std::vector<int> criteria;
};

struct OutputSpec {
    std::string dir = "out";
    bool csv = true;
    bool json_out = true;
};

struct RunConfig {
    std::optional<SystemSpec> system;
    std::optional<PerturbationSpec> pert;
    std::optional<TraceSpec> trace;
    std::optional<PoincareSpec> poincare;
    std::optional<CycleSpec> cycle;
    bool has_shift = false;
    bool has_jacobian_shift = false;
    std::optional<VerifySpec> verify;
    OutputSpec output;
    json echo;  // normalized configuration for the manifest
};

RunConfig parse_config(const json& root) {
    require_keys(root, "config",
                 {"system", "perturbation", "trace", "poincare", "cycle", "shift",
                  "jacobian_shift", "verify", "output"});
    RunConfig cfg;
    json echo;

    if (root.contains("system")) {
        const json& s = root["system"];
        require_keys(s, "system", {"id", "params", "derivative_mode"});
        if (!s.contains("id") || !s["id"].is_string())
            throw ConfigError("system.id must be a string", "id");
        SystemSpec spec;
        spec.id = s["id"].get<std::string>();
        if (s.contains("params")) spec.params = get_params(s["params"], "system.params");
        if (s.contains("derivative_mode")) {
            const std::string m = s["derivative_mode"].get<std::string>();
            if (m == "analytic") spec.mode = DerivativeMode::Analytic;
            else if (m == "finite_difference") spec.mode = DerivativeMode::FiniteDifference;
            else throw ConfigError("system.derivative_mode must be \"analytic\" or "
                                   "\"finite_difference\"", "derivative_mode");
        }
        cfg.system = spec;
        echo["system"] = {{"id", spec.id}, {"params", spec.params},
                          {"derivative_mode", spec.mode == DerivativeMode::Analytic
                                                  ? "analytic" : "finite_difference"}};
    }

    if (root.contains("perturbation")) {
        const json& p = root["perturbation"];
        require_keys(p, "perturbation", {"id", "params", "k", "k_list"});
        if (!p.contains("id") || !p["id"].is_string())
            throw ConfigError("perturbation.id must be a string", "id");
        PerturbationSpec spec;
        spec.id = p["id"].get<std::string>();
        if (p.contains("params")) spec.params = get_params(p["params"], "perturbation.params");
        if (p.contains("k")) spec.k = get_finite(p["k"], "perturbation.k");
        if (p.contains("k_list")) {
            for (const auto& v : p["k_list"])
                spec.k_list.push_back(get_finite(v, "perturbation.k_list[]"));
            if (spec.k_list.size() < 3)
                throw ConfigError("perturbation.k_list needs at least 3 entries", "k_list");
            for (size_t i = 1; i < spec.k_list.size(); ++i)
                if (!(spec.k_list[i] < spec.k_list[i - 1]) || !(spec.k_list[i] > 0))
                    throw ConfigError("perturbation.k_list must be positive and strictly "
                                      "decreasing", "k_list");
            if (!(spec.k_list.front() / spec.k_list.back() >= 100.0))
                throw ConfigError("perturbation.k_list must span at least two decades",
                                  "k_list");
        }
        cfg.pert = spec;
        echo["perturbation"] = {{"id", spec.id}, {"params", spec.params}, {"k", spec.k},
                                {"k_list", spec.k_list}};
    }

    if (root.contains("trace")) {
        const json& t = root["trace"];
        require_keys(t, "trace", {"x0", "t0", "t1", "order", "samples", "tol_rel", "tol_abs"});
        TraceSpec spec;
        if (!t.contains("x0")) throw ConfigError("trace.x0 is required", "x0");
        spec.x0 = get_vec(t["x0"], "trace.x0");
        if (t.contains("t0")) spec.t0 = get_finite(t["t0"], "trace.t0");
        if (t.contains("t1")) spec.t1 = get_finite(t["t1"], "trace.t1");
        if (t.contains("order")) spec.order = get_int(t["order"], "trace.order");
        if (spec.order < 0 || spec.order > 3)
            throw ConfigError("trace.order must be in 0..3", "order");
        if (t.contains("samples")) spec.samples = get_int(t["samples"], "trace.samples");
        if (spec.samples < 2) throw ConfigError("trace.samples must be >= 2", "samples");
        if (t.contains("tol_rel")) spec.tol_rel = get_finite(t["tol_rel"], "trace.tol_rel");
        if (t.contains("tol_abs")) spec.tol_abs = get_finite(t["tol_abs"], "trace.tol_abs");
        cfg.trace = spec;
        echo["trace"] = {{"x0", std::vector<double>(spec.x0.data(), spec.x0.data() + spec.x0.size())},
                         {"t0", spec.t0}, {"t1", spec.t1}, {"order", spec.order},
                         {"samples", spec.samples}};
        if (spec.tol_rel) echo["trace"]["tol_rel"] = *spec.tol_rel;
        if (spec.tol_abs) echo["trace"]["tol_abs"] = *spec.tol_abs;
    }

    if (root.contains("poincare")) {
        const json& p = root["poincare"];
        require_keys(p, "poincare", {"seeds", "turns", "section_angle"});
        PoincareSpec spec;
        if (!p.contains("seeds") || !p["seeds"].is_array() || p["seeds"].empty())
            throw ConfigError("poincare.seeds must be a non-empty array", "seeds");
        for (const auto& s : p["seeds"]) spec.seeds.push_back(get_vec(s, "poincare.seeds[]"));
        if (p.contains("turns")) spec.turns = get_int(p["turns"], "poincare.turns");
        if (spec.turns < 1) throw ConfigError("poincare.turns must be >= 1", "turns");
        if (p.contains("section_angle"))
            spec.section_angle = get_finite(p["section_angle"], "poincare.section_angle");
        cfg.poincare = spec;
        json seeds = json::array();
        for (const auto& s : spec.seeds)
            seeds.push_back(std::vector<double>(s.data(), s.data() + s.size()));
        echo["poincare"] = {{"seeds", seeds}, {"turns", spec.turns},
                            {"section_angle", spec.section_angle}};
    }

    if (root.contains("cycle")) {
        const json& c = root["cycle"];
        require_keys(c, "cycle",
                     {"guess", "m", "newton_tol", "max_iter", "sections", "section_angle"});
        CycleSpec spec;
        if (!c.contains("guess")) throw ConfigError("cycle.guess is required", "guess");
        spec.guess = get_vec(c["guess"], "cycle.guess");
        if (c.contains("m")) spec.m = get_int(c["m"], "cycle.m");
        if (spec.m < 1) throw ConfigError("cycle.m must be >= 1", "m");
        if (c.contains("newton_tol"))
            spec.newton_tol = get_finite(c["newton_tol"], "cycle.newton_tol");
        if (c.contains("max_iter")) spec.max_iter = get_int(c["max_iter"], "cycle.max_iter");
        if (c.contains("sections")) spec.sections = get_int(c["sections"], "cycle.sections");
        if (spec.sections < 1) throw ConfigError("cycle.sections must be >= 1", "sections");
        if (c.contains("section_angle"))
            spec.section_angle = get_finite(c["section_angle"], "cycle.section_angle");
        cfg.cycle = spec;
        echo["cycle"] = {{"guess", std::vector<double>(spec.guess.data(),
                                                       spec.guess.data() + spec.guess.size())},
                         {"m", spec.m}, {"newton_tol", spec.newton_tol},
                         {"max_iter", spec.max_iter}, {"sections", spec.sections},
                         {"section_angle", spec.section_angle}};
    }

    if (root.contains("shift")) {
        require_keys(root["shift"], "shift", {});
        cfg.has_shift = true;
        echo["shift"] = json::object();
    }
    if (root.contains("jacobian_shift")) {
        require_keys(root["jacobian_shift"], "jacobian_shift", {});
        cfg.has_jacobian_shift = true;
        echo["jacobian_shift"] = json::object();
    }

    if (root.contains("verify")) {
        const json& v = root["verify"];
        require_keys(v, "verify", {"criteria"});
        VerifySpec spec;
        if (v.contains("criteria"))
            for (const auto& c : v["criteria"]) spec.criteria.push_back(get_int(c, "verify.criteria[]"));
        cfg.verify = spec;
        echo["verify"] = {{"criteria", spec.criteria}};
    }

    if (root.contains("output")) {
        const json& o = root["output"];
        require_keys(o, "output", {"dir", "csv", "json"});
        if (o.contains("dir")) cfg.output.dir = o["dir"].get<std::string>();
        if (o.contains("csv")) cfg.output.csv = o["csv"].get<bool>();
        if (o.contains("json")) cfg.output.json_out = o["json"].get<bool>();
    }
    // the output location is deliberately not part of the echo: the manifest
    // hash fingerprints the computation, so identical runs into different
    // directories stay byte-identical
    cfg.echo = echo;
    return cfg;
}

// ---------------------------------------------------------------------------
// run context: output directory, manifest, effective tolerances
// ---------------------------------------------------------------------------

struct Overrides {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<double> tol_rel, tol_abs;
    int threads = 1;
};

struct RunContext {
    RunConfig cfg;
    std::string command;
    fs::path out;
    std::string hash;
    Tolerances tol{1e-10, 1e-12};
    int threads = 1;
    json manifest;

    void emit_manifest() {
        manifest["manifest_hash"] = hash;
        io::write_text((out / "manifest.json").string(), manifest.dump(2) + "\n");
    }
    void write_csv(const std::string& name, const io::Csv& table) const {
        if (cfg.output.csv) io::write_text((out / name).string(), io::csv_string(table, hash));
    }
    void write_json(const std::string& name, json j) const {
        if (!cfg.output.json_out) return;
        j["manifest_hash"] = hash;
        io::write_text((out / name).string(), j.dump(2) + "\n");
    }
};

RunContext make_context(const std::string& command, const Overrides& ov) {
    RunContext ctx;
    ctx.command = command;
    json root = json::object();
    if (!ov.config_path.empty()) {
        std::string text;
        try {
            text = io::read_text(ov.config_path);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("cannot read config: ") + e.what());
        }
        try {
            root = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
    }
    ctx.cfg = parse_config(root);
    if (ov.out_dir) ctx.cfg.output.dir = *ov.out_dir;

    if (ctx.cfg.trace && ctx.cfg.trace->tol_rel) ctx.tol.rel = *ctx.cfg.trace->tol_rel;
    if (ctx.cfg.trace && ctx.cfg.trace->tol_abs) ctx.tol.abs = *ctx.cfg.trace->tol_abs;
    if (ov.tol_rel) ctx.tol.rel = *ov.tol_rel;
    if (ov.tol_abs) ctx.tol.abs = *ov.tol_abs;
    ctx.threads = ov.threads;

    ctx.manifest = {{"command", command},
                    {"config", ctx.cfg.echo},
                    {"version", kVersion},
                    {"tolerances", {{"rel", ctx.tol.rel}, {"abs", ctx.tol.abs}}}};
    ctx.hash = io::fnv1a64_hex(ctx.manifest.dump());

    ctx.out = ctx.cfg.output.dir;
    fs::create_directories(ctx.out);
    return ctx;
}

FieldSystem make_cfg_system(const RunConfig& cfg) {
    if (!cfg.system) throw ConfigError("a \"system\" block is required for this command");
    return make_system(cfg.system->id, cfg.system->params, cfg.system->mode);
}

Perturbation make_cfg_pert(const RunConfig& cfg, const FieldSystem& sys) {
    if (!cfg.pert) throw ConfigError("a \"perturbation\" block is required for this command");
    return make_perturbation(sys, cfg.pert->id, cfg.pert->params, cfg.pert->k);
}

NewtonOptions make_newton_opts(const CycleSpec& c) {
    NewtonOptions n;
    n.tol = c.newton_tol;
    n.max_iter = c.max_iter;
    n.n_sections = c.sections;
    n.section_angle = c.section_angle;
    return n;
}

std::vector<std::string> coord_names(const FieldSystem& sys) {
    if (sys.kind() == SystemKind::FlowToroidal) return {"R", "Z"};
    std::vector<std::string> out;
    for (int i = 0; i < sys.dim(); ++i) out.push_back("x" + std::to_string(i));
    return out;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_trace(RunContext& ctx) {
    if (!ctx.cfg.trace) throw ConfigError("a \"trace\" block is required");
    const FieldSystem sys = make_cfg_system(ctx.cfg);
    const TraceSpec& t = *ctx.cfg.trace;
    Perturbation pert;
    if (t.order >= 1) pert = make_cfg_pert(ctx.cfg, sys);

    VariationBundle bundle;
    std::vector<double> grid;
    if (sys.kind() == SystemKind::Map) {
        const long n = std::lround(t.t1);
        if (n < 0 || std::abs(t.t1 - n) > 1e-9)
            throw ConfigError("trace.t1 must be a non-negative iterate count for maps", "t1");
        bundle = iterate_map(sys, t.x0, n, pert, t.order);
        grid = bundle.grid();
    } else {
        IntegratorOptions io;
        io.tol = ctx.tol;
        bundle = integrate_variations(sys, t.x0, t.t0, t.t1, pert, t.order, io);
        for (int i = 0; i < t.samples; ++i)
            grid.push_back(t.t0 + (t.t1 - t.t0) * i / (t.samples - 1));
    }

    const int n = sys.dim();
    io::Csv csv;
    const std::string tname = sys.kind() == SystemKind::FlowToroidal ? "phi"
                              : sys.kind() == SystemKind::Map        ? "n"
                                                                     : "t";
    csv.header.push_back(tname);
    for (const auto& c : coord_names(sys)) csv.header.push_back(c);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            csv.header.push_back("J" + std::to_string(r) + std::to_string(c));
    for (int j = 1; j <= t.order; ++j)
        for (int i = 0; i < n; ++i)
            csv.header.push_back("d" + std::to_string(j) + "x" + std::to_string(i));

    for (double tv : grid) {
        std::vector<double> row{tv};
        const Vec x = bundle.state(tv);
        for (int i = 0; i < n; ++i) row.push_back(x[i]);
        const Mat J = bundle.jacobian(tv);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) row.push_back(J(r, c));
        for (int j = 1; j <= t.order; ++j) {
            const Vec v = bundle.variation(j, tv);
            for (int i = 0; i < n; ++i) row.push_back(v[i]);
        }
        csv.rows.push_back(std::move(row));
    }
    ctx.write_csv("trace.csv", csv);
    ctx.emit_manifest();
    return kExitOk;
}

int cmd_poincare(RunContext& ctx) {
    if (!ctx.cfg.poincare) throw ConfigError("a \"poincare\" block is required");
    const FieldSystem sys = make_cfg_system(ctx.cfg);
    if (sys.kind() == SystemKind::FlowAutonomous)
        throw ConfigError("poincare: general flows have no fixed-angle section; "
                          "use a toroidal system or a map");
    const PoincareSpec& p = *ctx.cfg.poincare;

    io::Csv csv;
    csv.header = {"seed", "turn"};
    for (const auto& c : coord_names(sys)) csv.header.push_back(c);
    csv.header.push_back("ok");

    IntegratorOptions io;
    io.tol = ctx.tol;
    for (size_t s = 0; s < p.seeds.size(); ++s) {
        Vec x = p.seeds[s];
        if (x.size() != sys.dim())
            throw ConfigError("poincare.seeds[" + std::to_string(s) + "] has wrong dimension",
                              "seeds");
        for (int turn = 1; turn <= p.turns; ++turn) {
            std::vector<double> row{static_cast<double>(s), static_cast<double>(turn)};
            bool ok = true;
            try {
                if (sys.kind() == SystemKind::Map) {
                    x = sys.eval(x);
                } else {
                    const double a = p.section_angle + kTwoPi * (turn - 1);
                    x = integrate_flow(sys, x, a, a + kTwoPi, io).at(a + kTwoPi);
                }
            } catch (const std::exception&) {
                ok = false;
            }
            for (int i = 0; i < sys.dim(); ++i)
                row.push_back(ok ? x[i] : std::numeric_limits<double>::quiet_NaN());
            row.push_back(ok ? 1.0 : 0.0);
            csv.rows.push_back(std::move(row));
            if (!ok) break;  // this seed left the domain; others continue
        }
    }
    ctx.write_csv("poincare.csv", csv);
    ctx.emit_manifest();
    return kExitOk;
}

Cycle find_cfg_cycle(const RunContext& ctx, const FieldSystem& sys) {
    if (!ctx.cfg.cycle) throw ConfigError("a \"cycle\" block is required");
    const CycleSpec& c = *ctx.cfg.cycle;
    if (c.guess.size() != sys.dim()) throw ConfigError("cycle.guess has wrong dimension", "guess");
    return find_cycle(sys, c.guess, c.m, make_newton_opts(c));
}

io::Csv ribbon_table(const Cycle& cyc) {
    const int n = cyc.dim();
    io::Csv csv;
    csv.header = {"angle", "time"};
    for (const auto& c : coord_names(cyc.system)) csv.header.push_back(c);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            csv.header.push_back("J" + std::to_string(r) + std::to_string(c));
    for (int i = 0; i < n; ++i) {
        const std::string li = "lam" + std::to_string(i + 1);
        csv.header.push_back(li + "_re");
        csv.header.push_back(li + "_im");
        for (int r = 0; r < n; ++r) {
            csv.header.push_back("v" + std::to_string(i + 1) + "_" + std::to_string(r) + "_re");
            csv.header.push_back("v" + std::to_string(i + 1) + "_" + std::to_string(r) + "_im");
        }
    }
    for (const auto& s : cyc.sections) {
        std::vector<double> row{s.angle, s.time};
        for (int i = 0; i < n; ++i) row.push_back(s.point[i]);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) row.push_back(s.jac_full(r, c));
        for (int i = 0; i < n; ++i) {
            row.push_back(s.eig.values[i].real());
            row.push_back(s.eig.values[i].imag());
            for (int r = 0; r < n; ++r) {
                row.push_back(s.eig.vectors(r, i).real());
                row.push_back(s.eig.vectors(r, i).imag());
            }
        }
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

int cmd_cycle(RunContext& ctx) {
    const FieldSystem sys = make_cfg_system(ctx.cfg);
    const Cycle cyc = find_cfg_cycle(ctx, sys);
    ctx.write_json("cycle.json", json::parse(cycle_to_json(cyc)));
    ctx.write_csv("sections.csv", ribbon_table(cyc));
    ctx.emit_manifest();
    return kExitOk;
}

int cmd_shift(RunContext& ctx) {
    const FieldSystem sys = make_cfg_system(ctx.cfg);
    const Perturbation pert = make_cfg_pert(ctx.cfg, sys);
    const Cycle cyc = find_cfg_cycle(ctx, sys);
    const CycleShift shift = compute_cycle_shift(cyc, pert);

    const int n = cyc.dim();
    io::Csv csv;
    csv.header = {"angle"};
    const auto names = coord_names(sys);
    for (int i = 0; i < n; ++i) csv.header.push_back("dxcyc_" + names[i]);
    for (int i = 0; i < n; ++i) csv.header.push_back("dreturn_" + names[i]);
    for (size_t j = 0; j < shift.angles.size(); ++j) {
        std::vector<double> row{shift.angles[j]};
        for (int i = 0; i < n; ++i) row.push_back(shift.delta_xcyc[j][i]);
        for (int i = 0; i < n; ++i) row.push_back(shift.delta_return[j][i]);
        csv.rows.push_back(std::move(row));
    }
    ctx.write_csv("shift.csv", csv);

    json j;
    j["system"] = sys.id();
    j["perturbation"] = pert.direction.id();
    j["class"] = to_string(cyc.cls);
    j["note"] = "shift vectors are per unit perturbation scale";

    if (!ctx.cfg.pert->k_list.empty()) {
        const ShiftReport rep =
            shift_convergence_report(cyc, pert, ctx.cfg.pert->k_list, 1.8, 2.2, ctx.threads);
        io::Csv res;
        res.header = {"k", "residual", "ok"};
        for (size_t i = 0; i < rep.k_list.size(); ++i)
            res.rows.push_back({rep.k_list[i], rep.residuals[i],
                                rep.status[i] == "ok" ? 1.0 : 0.0});
        ctx.write_csv("residuals.csv", res);
        j["convergence"] = {{"case_id", rep.case_id},
                            {"k_list", rep.k_list},
                            {"fitted_order", rep.order.slope},
                            {"half_width", rep.order.half_width},
                            {"n_used", rep.order.n_used},
                            {"slope_window", {rep.slope_lo, rep.slope_hi}},
                            {"pass", rep.pass},
                            {"status", rep.status}};
    }
    ctx.write_json("shift_report.json", j);
    ctx.emit_manifest();
    return kExitOk;
}

int cmd_jacobian_shift(RunContext& ctx) {
    const FieldSystem sys = make_cfg_system(ctx.cfg);
    const Perturbation pert = make_cfg_pert(ctx.cfg, sys);
    const Cycle cyc = find_cfg_cycle(ctx, sys);
    const JacobianDerivative jd = jacobian_total_derivative(cyc, pert);

    const int n = cyc.dim();
    io::Csv csv;
    csv.header = {"angle"};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            csv.header.push_back("dDP" + std::to_string(r) + std::to_string(c));
    for (int i = 0; i < n; ++i) {
        csv.header.push_back("dlam" + std::to_string(i + 1) + "_re");
        csv.header.push_back("dlam" + std::to_string(i + 1) + "_im");
    }
    for (size_t j = 0; j < jd.angles.size(); ++j) {
        std::vector<double> row{jd.angles[j]};
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) row.push_back(jd.ddp[j](r, c));
        for (int i = 0; i < n; ++i) {
            row.push_back(jd.eig_derivs[j][i].real());
            row.push_back(jd.eig_derivs[j][i].imag());
        }
        csv.rows.push_back(std::move(row));
    }
    ctx.write_csv("jacobian_shift.csv", csv);

    json j;
    j["system"] = sys.id();
    j["perturbation"] = pert.direction.id();
    j["note"] = "total derivative with respect to the perturbation scale, including the "
                "induced cycle-point motion";
    json lam = json::array();
    for (const auto& s : cyc.sections) {
        json e = json::array();
        for (int i = 0; i < n; ++i)
            e.push_back({{"re", s.eig.values[i].real()}, {"im", s.eig.values[i].imag()}});
        lam.push_back(e);
    }
    j["eigenvalues"] = lam;
    ctx.write_json("jacobian_shift.json", j);
    ctx.emit_manifest();
    return kExitOk;
}

int cmd_verify(RunContext& ctx) {
    std::vector<int> criteria;
    if (ctx.cfg.verify) criteria = ctx.cfg.verify->criteria;
    const auto suite = acceptance::run_criteria(criteria, ctx.threads);
    for (const auto& r : suite.results) std::cout << acceptance::console_line(r) << "\n";
    ctx.write_json("verify_report.json", json::parse(acceptance::report_json(suite)));
    ctx.emit_manifest();
    return suite.all_pass ? kExitOk : kExitVerify;
}

int cmd_list_fields() {
    json j;
    json systems = json::array();
    for (const auto& e : field_catalog()) {
        systems.push_back({{"id", e.id},
                           {"kind", e.kind == SystemKind::Map           ? "map"
                                    : e.kind == SystemKind::FlowToroidal ? "flow_toroidal"
                                                                          : "flow_autonomous"},
                           {"dim", e.dim},
                           {"defaults", e.defaults},
                           {"summary", e.summary}});
    }
    j["systems"] = systems;
    json perts = json::array();
    for (const auto& e : perturbation_catalog())
        perts.push_back({{"id", e.id}, {"applies_to", e.applies_to},
                         {"defaults", e.defaults}, {"summary", e.summary}});
    j["perturbations"] = perts;
    j["version"] = kVersion;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

json error_json(const std::string& kind, const std::string& message, const std::string& key) {
    json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    if (!key.empty()) j["error"]["key"] = key;
    return j;
}

}  // namespace

int run(const std::vector<std::string>& args, std::string* error_out) {
    CLI::App app{"orbit and cycle shifts under field perturbations"};
    app.require_subcommand(1);

    Overrides ov;
    std::string command;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", ov.config_path, "JSON run configuration");
        if (config_required) opt->required();
        sub->add_option("--out", [&ov](const std::vector<std::string>& v) {
            ov.out_dir = v.front();
            return true;
        }, "output directory (overrides output.dir)");
        sub->add_option("--threads", ov.threads, "worker threads for parameter ladders");
        sub->add_option("--tol-rel", [&ov](const std::vector<std::string>& v) {
            ov.tol_rel = std::stod(v.front());
            return true;
        }, "relative integration tolerance override");
        sub->add_option("--tol-abs", [&ov](const std::vector<std::string>& v) {
            ov.tol_abs = std::stod(v.front());
            return true;
        }, "absolute integration tolerance override");
        sub->callback([&command, sub] { command = sub->get_name(); });
    };

    add_common(app.add_subcommand("trace", "integrate an orbit with its variations"), true);
    add_common(app.add_subcommand("poincare", "section return map of seeds"), true);
    add_common(app.add_subcommand("find-cycle", "Newton shooting for a cycle"), true);
    add_common(app.add_subcommand("shift", "first-order cycle shift under a perturbation"), true);
    add_common(app.add_subcommand("jacobian-shift",
                                  "total derivative of the full-period Jacobian"), true);
    add_common(app.add_subcommand("verify", "run the verification suite"), false);
    app.add_subcommand("list-fields", "print the system and perturbation catalog")
        ->callback([&command] { command = "list-fields"; });

    std::vector<std::string> argv_like = args;
    std::reverse(argv_like.begin(), argv_like.end());
    try {
        app.parse(argv_like);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        const json j = error_json("usage", e.what(), "");
        if (error_out) *error_out = j.dump();
        std::cerr << j.dump() << "\n";
        return kExitConfig;
    }

    try {
        if (command == "list-fields") return cmd_list_fields();
        RunContext ctx = make_context(command, ov);
        if (command == "trace") return cmd_trace(ctx);
        if (command == "poincare") return cmd_poincare(ctx);
        if (command == "find-cycle") return cmd_cycle(ctx);
        if (command == "shift") return cmd_shift(ctx);
        if (command == "jacobian-shift") return cmd_jacobian_shift(ctx);
        if (command == "verify") return cmd_verify(ctx);
        throw std::runtime_error("unknown command " + command);
    } catch (const ConfigError& e) {
        const json j = error_json("config", e.what(), e.key());
        if (error_out) *error_out = j.dump();
        std::cerr << j.dump() << "\n";
        return kExitConfig;
    } catch (const DegenerateCycleError& e) {
        const json j = error_json("degenerate-cycle", e.what(), "");
        if (error_out) *error_out = j.dump();
        std::cerr << j.dump() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        const json j = error_json("runtime", e.what(), "");
        if (error_out) *error_out = j.dump();
        std::cerr << j.dump() << "\n";
        return kExitRuntime;
    }
}

}  // namespace orbitshift::cli
