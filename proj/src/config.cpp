#include "collapse/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "collapse/error.hpp"
#include "collapse/pairing.hpp"

namespace collapse {

const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names = {"simulate-spatial", "lindblad-spatial", "simulate-temporal",
                                                   "lindblad-temporal", "pairing-check",   "scaling-probe",
                                                   "collapse",          "hartree-fock",    "covariance-diag"};
    return names;
}

namespace {

json experiment_defaults(const std::string& e)
{
    if (e == "simulate-spatial")
        return {{"compare_lindblad", true}, {"threshold", 0.02}, {"no_collapse", false}};
    if (e == "lindblad-spatial") return {{"tolerance", 1e-6}};
    if (e == "simulate-temporal")
        return {{"use_commutator_ip", true}, {"compare_lindblad", true}, {"threshold", 0.03},
                {"control_variate", false},  {"ell_halving", false},      {"conservation", false},
                {"conservation_seeds", 100}};
    if (e == "lindblad-temporal")
        return {{"include_H", true},
                {"gamma_tolerance", 1e-8},
                {"hamiltonian_times", json::array()},
                {"correction_tolerance", 1e-10}};
    if (e == "pairing-check") {
        json ids = json::array();
        for (auto id : all_pairing_ids()) ids.push_back(to_string(id));
        return {{"identities", ids}, {"t", nullptr}};
    }
    if (e == "scaling-probe") return {{"lags_per_ell", 10}, {"control_variate", true}};
    if (e == "collapse")
        return {{"threshold", 0.95},
                {"variance_ratio_max", 0.1},
                {"variance_rate_times", json::array()},
                {"composite_time", nullptr}};
    if (e == "hartree-fock") return {{"q", {1, 2, 4}}, {"threshold", 0.95}};
    if (e == "covariance-diag") return {{"samples", 1000}, {"tolerance", 1e-10}};
    return json::object();
}

[[noreturn]] void schema(const std::string& where, const std::string& what)
{
    fail("schema-error", where + ": " + what);
}

const json& need(const json& obj, const std::string& key, const std::string& where)
{
    if (!obj.contains(key)) schema(where + "." + key, "missing");
    return obj.at(key);
}

double num(const json& j, const std::string& where)
{
    if (!j.is_number()) schema(where, "expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) schema(where, "must be finite");
    return v;
}

long long integer(const json& j, const std::string& where)
{
    if (!j.is_number_integer() && !j.is_number_unsigned()) schema(where, "expected an integer");
    return j.get<long long>();
}

bool boolean(const json& j, const std::string& where)
{
    if (!j.is_boolean()) schema(where, "expected true or false");
    return j.get<bool>();
}

std::string str(const json& j, const std::string& where)
{
    if (!j.is_string()) schema(where, "expected a string");
    return j.get<std::string>();
}

void only_keys(const json& obj, const std::set<std::string>& keys, const std::string& where)
{
    if (!obj.is_object()) schema(where, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!keys.count(it.key())) schema(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
}

cplx entry(const json& e, const std::string& where)
{
    if (e.is_number()) return num(e, where);
    if (e.is_array() && e.size() == 2) return {num(e[0], where + "[0]"), num(e[1], where + "[1]")};
    schema(where, "expected a number or a [re, im] pair");
}

// Fills missing keys of obj from defaults, recursively for objects.
void merge_defaults(json& obj, const json& defaults)
{
    for (auto it = defaults.begin(); it != defaults.end(); ++it)
        if (!obj.contains(it.key())) obj[it.key()] = it.value();
}

HermitianOperator hermitian(const json& j, int dim, const std::string& where)
{
    GeneralOperator m = parse_matrix(j, dim, where);
    double r = hermiticity_residual(m);
    if (r > kConstructTol) {
        std::ostringstream os;
        os << where << " is not Hermitian (residual " << r << ")";
        fail("hermiticity-error", os.str());
    }
    return HermitianOperator(m, where.c_str());
}

}  // namespace

GeneralOperator parse_matrix(const json& j, int dim, const std::string& where)
{
    if (!j.is_array() || static_cast<int>(j.size()) != dim) {
        std::ostringstream os;
        os << "expected " << dim << " rows";
        schema(where, os.str());
    }
    GeneralOperator m(dim, dim);
    for (int r = 0; r < dim; ++r) {
        std::string wr = where + "[" + std::to_string(r) + "]";
        if (!j[r].is_array() || static_cast<int>(j[r].size()) != dim) {
            std::ostringstream os;
            os << "expected " << dim << " entries";
            schema(wr, os.str());
        }
        for (int c = 0; c < dim; ++c) m(r, c) = entry(j[r][c], wr + "[" + std::to_string(c) + "]");
    }
    return m;
}

StateVector parse_vector(const json& j, int dim, const std::string& where)
{
    if (!j.is_array() || static_cast<int>(j.size()) != dim) {
        std::ostringstream os;
        os << "expected " << dim << " entries";
        schema(where, os.str());
    }
    StateVector v(dim);
    for (int r = 0; r < dim; ++r) v(r) = entry(j[r], where + "[" + std::to_string(r) + "]");
    return v;
}

json matrix_to_json(const GeneralOperator& m)
{
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

std::string fnv1a_hex(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SpatialModelSpec RunConfig::spatial() const
{
    SpatialModelSpec s;
    s.dim = dim;
    s.M = M;
    s.H0 = H0;
    s.validate();
    return s;
}

TemporalModelSpec RunConfig::temporal() const
{
    TemporalModelSpec s = make_temporal_spec(dim, channels, grid.t0, grid.t1, window);
    s.H0 = H0;
    return s;
}

bool RunConfig::wants(const std::string& format) const
{
    for (const auto& f : formats)
        if (f == format) return true;
    return false;
}

RunConfig parse_config_json(json doc, const Overrides& ov)
{
    if (!doc.is_object()) schema("(root)", "expected an object");
    RunConfig rc;
    if (ov.experiment) {
        if (doc.contains("experiment") && str(doc["experiment"], "experiment") != *ov.experiment)
            schema("experiment", "config is for '" + doc["experiment"].get<std::string>() + "', not '" +
                                     *ov.experiment + "'");
        doc["experiment"] = *ov.experiment;
    }
    rc.experiment = str(need(doc, "experiment", "(root)"), "experiment");
    bool known = false;
    for (const auto& e : experiment_names()) known = known || e == rc.experiment;
    if (!known) schema("experiment", "unknown experiment '" + rc.experiment + "'");
    only_keys(doc, {"experiment", "model", "grid", "ensemble", "solver", "output", rc.experiment}, "");

    // model
    json& model = doc["model"];
    if (model.is_null()) schema("model", "missing");
    only_keys(model, {"dim", "M", "H0", "channels", "window", "observable", "psi0"}, "model");
    rc.dim = static_cast<int>(integer(need(model, "dim", "model"), "model.dim"));
    if (rc.dim < 1 || rc.dim > kMaxDim) schema("model.dim", "must lie in 1..256");
    if (!model.contains("M")) model["M"] = json::array();
    if (!model["M"].is_array()) schema("model.M", "expected a list of matrices");
    for (std::size_t k = 0; k < model["M"].size(); ++k)
        rc.M.push_back(hermitian(model["M"][k], rc.dim, "model.M[" + std::to_string(k) + "]"));
    if (model.contains("H0") && !model["H0"].is_null()) rc.H0 = hermitian(model["H0"], rc.dim, "model.H0");
    if (!model.contains("channels")) model["channels"] = json::array();
    if (!model["channels"].is_array()) schema("model.channels", "expected a list");
    for (std::size_t c = 0; c < model["channels"].size(); ++c) {
        std::string w = "model.channels[" + std::to_string(c) + "]";
        json& ch = model["channels"][c];
        only_keys(ch, {"N", "kernel"}, w);
        Channel out;
        out.N = hermitian(need(ch, "N", w), rc.dim, w + ".N");
        json& k = ch["kernel"];
        if (k.is_null()) schema(w + ".kernel", "missing");
        only_keys(k, {"form", "ell", "g", "omega", "base"}, w + ".kernel");
        merge_defaults(k, {{"form", "box"}, {"omega", 0.0}, {"base", "box"}});
        try {
            out.kernel.form = kernel_form_from(str(k["form"], w + ".kernel.form"));
            out.kernel.base = kernel_form_from(str(k["base"], w + ".kernel.base"));
        } catch (const Error& e) {
            schema(w + ".kernel", e.detail());
        }
        out.kernel.ell = num(need(k, "ell", w + ".kernel"), w + ".kernel.ell");
        out.kernel.g = num(need(k, "g", w + ".kernel"), w + ".kernel.g");
        out.kernel.omega = num(k["omega"], w + ".kernel.omega");
        try {
            out.kernel.validate();
        } catch (const Error& e) {
            schema(w + ".kernel", e.detail());
        }
        rc.channels.push_back(out);
    }
    if (!model.contains("window")) model["window"] = true;
    rc.window = boolean(model["window"], "model.window");
    if (model.contains("observable") && !model["observable"].is_null())
        rc.observable = hermitian(model["observable"], rc.dim, "model.observable");
    if (rc.experiment != "covariance-diag" || model.contains("psi0")) {
        rc.psi0 = parse_vector(need(model, "psi0", "model"), rc.dim, "model.psi0");
        if (std::abs(rc.psi0.norm() - 1.0) > 1e-8) schema("model.psi0", "must have unit norm");
    }

    // grid
    json& grid = doc["grid"];
    if (grid.is_null()) schema("grid", "missing");
    only_keys(grid, {"t0", "t1", "h"}, "grid");
    merge_defaults(grid, {{"t0", 0.0}});
    try {
        rc.grid = TimeGrid::make(num(grid["t0"], "grid.t0"), num(need(grid, "t1", "grid"), "grid.t1"),
                                 num(need(grid, "h", "grid"), "grid.h"));
    } catch (const Error& e) {
        schema("grid", e.detail());
    }

    // ensemble
    json& ens = doc["ensemble"];
    if (ens.is_null()) ens = json::object();
    only_keys(ens, {"realizations", "base_seed"}, "ensemble");
    merge_defaults(ens, {{"realizations", 1000}, {"base_seed", 1}});
    if (ov.realizations) ens["realizations"] = *ov.realizations;
    if (ov.seed) ens["base_seed"] = *ov.seed;
    long long R = integer(ens["realizations"], "ensemble.realizations");
    if (R < 1 || R > 100000000) schema("ensemble.realizations", "must lie in 1..1e8");
    rc.R = static_cast<int>(R);
    if (!ens["base_seed"].is_number_unsigned() && !ens["base_seed"].is_number_integer())
        schema("ensemble.base_seed", "expected a non-negative integer");
    if (ens["base_seed"].is_number_integer() && ens["base_seed"].get<long long>() < 0)
        schema("ensemble.base_seed", "expected a non-negative integer");
    rc.base_seed = ens["base_seed"].get<std::uint64_t>();

    // solver
    json& sol = doc["solver"];
    if (sol.is_null()) sol = json::object();
    only_keys(sol, {"stepper", "dyson", "tol", "max_iter"}, "solver");
    merge_defaults(sol, {{"stepper", "unitary"}, {"dyson", "windowed-sweep"}, {"tol", 1e-12}, {"max_iter", 500}});
    std::string st = str(sol["stepper"], "solver.stepper");
    if (st == "unitary") rc.stepper = Stepper::UnitaryExp;
    else if (st == "euler-maruyama") rc.stepper = Stepper::EulerMaruyama;
    else schema("solver.stepper", "expected 'unitary' or 'euler-maruyama'");
    std::string dy = str(sol["dyson"], "solver.dyson");
    if (dy == "windowed-sweep") rc.dyson.solver = DysonSolver::WindowedSweep;
    else if (dy == "fixed-point") rc.dyson.solver = DysonSolver::FixedPoint;
    else if (dy == "direct") rc.dyson.solver = DysonSolver::Direct;
    else schema("solver.dyson", "expected 'windowed-sweep', 'fixed-point' or 'direct'");
    rc.dyson.tol = num(sol["tol"], "solver.tol");
    if (!(rc.dyson.tol > 0)) schema("solver.tol", "must be positive");
    rc.dyson.max_iter = static_cast<int>(integer(sol["max_iter"], "solver.max_iter"));
    if (rc.dyson.max_iter < 1) schema("solver.max_iter", "must be positive");

    // output
    json& out = doc["output"];
    if (out.is_null()) out = json::object();
    only_keys(out, {"directory", "formats"}, "output");
    merge_defaults(out, {{"directory", "out/" + rc.experiment}, {"formats", {"csv", "json"}}});
    if (ov.out_dir) out["directory"] = *ov.out_dir;
    rc.out_dir = str(out["directory"], "output.directory");
    if (!out["formats"].is_array()) schema("output.formats", "expected a list");
    for (const auto& f : out["formats"]) {
        std::string s = str(f, "output.formats[]");
        if (s != "csv" && s != "json" && s != "svg") schema("output.formats", "unknown format '" + s + "'");
        rc.formats.push_back(s);
    }

    // experiment section
    json& params = doc[rc.experiment];
    if (params.is_null()) params = json::object();
    if (!params.is_object()) schema(rc.experiment, "expected an object");
    merge_defaults(params, experiment_defaults(rc.experiment));
    rc.params = params;

    bool temporal = rc.experiment == "simulate-temporal" || rc.experiment == "lindblad-temporal" ||
                    rc.experiment == "pairing-check" || rc.experiment == "collapse" || rc.experiment == "hartree-fock";
    if (temporal) {
        if (rc.channels.empty()) schema("model.channels", "temporal experiments need at least one channel");
        TemporalModelSpec s;
        try {
            s = rc.temporal();
        } catch (const Error& e) {
            if (e.code() == "schema-error") schema("model", e.detail());
            throw;
        }
        if (rc.experiment != "lindblad-temporal") s.require_contraction();
    }
    if (rc.experiment == "simulate-spatial" || rc.experiment == "lindblad-spatial") rc.spatial();

    rc.resolved = doc;
    json digest_doc = doc;
    digest_doc.erase("output");
    rc.digest = fnv1a_hex(digest_doc.dump());
    return rc;
}

RunConfig parse_config(const std::string& path, const Overrides& ov)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("schema-error", "cannot read config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail("schema-error", "config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config_json(std::move(doc), ov);
}

}  // namespace collapse
