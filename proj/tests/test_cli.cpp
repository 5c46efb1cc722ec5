#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "collapse/config.hpp"
#include "collapse/output.hpp"
#include "collapse/run.hpp"

using namespace collapse;
using namespace testing;
namespace fs = std::filesystem;

static json spatial_doc()
{
    return json::parse(R"({
      "experiment": "lindblad-spatial",
      "model": {"dim": 2, "M": [[[1, 0], [0, -1]]], "psi0": [0.7071067811865476, 0.7071067811865476]},
      "grid": {"t0": 0, "t1": 0.1, "h": 0.01}
    })");
}

static json temporal_doc(double g)
{
    json d = json::parse(R"({
      "experiment": "simulate-temporal",
      "model": {"dim": 2, "psi0": [1, 0],
                "channels": [{"N": [[1, 0], [0, -1]], "kernel": {"form": "box", "ell": 0.1, "g": 1}}]},
      "grid": {"t0": 0, "t1": 1, "h": 0.01}
    })");
    d["model"]["channels"][0]["kernel"]["g"] = g;
    return d;
}

static std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

static fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("collapse_lab_test_" + name);
    fs::remove_all(p);
    return p;
}

static std::string error_message(auto&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

TEST_CASE("minimal spatial config echoes every default")
{
    RunConfig rc = parse_config_json(spatial_doc());
    CHECK(rc.experiment == "lindblad-spatial");
    CHECK(rc.dim == 2);
    CHECK(rc.M.size() == 1u);
    CHECK(rc.grid.n == 11);
    CHECK(rc.R == 1000);
    CHECK(rc.base_seed == 1u);
    CHECK(rc.out_dir == "out/lindblad-spatial");
    CHECK(rc.wants("csv"));
    CHECK(rc.wants("json"));
    CHECK_FALSE(rc.wants("svg"));
    const json& r = rc.resolved;
    CHECK(r["ensemble"]["realizations"] == 1000);
    CHECK(r["solver"]["dyson"] == "windowed-sweep");
    CHECK(r["solver"]["stepper"] == "unitary");
    CHECK(r["solver"]["tol"] == 1e-12);
    CHECK(r["model"]["window"] == true);
    CHECK(r["lindblad-spatial"]["tolerance"].is_number());
    CHECK(rc.digest.size() == 16u);
}

TEST_CASE("resolved config round trips")
{
    RunConfig a = parse_config_json(temporal_doc(0.45));
    RunConfig b = parse_config_json(a.resolved);
    CHECK(a.resolved == b.resolved);
    CHECK(a.digest == b.digest);
    json moved = a.resolved;
    moved["output"]["directory"] = "elsewhere";
    CHECK(parse_config_json(moved).digest == a.digest);
    json seeded = a.resolved;
    seeded["ensemble"]["base_seed"] = 99;
    CHECK(parse_config_json(seeded).digest != a.digest);
}

TEST_CASE("overrides")
{
    Overrides ov;
    ov.seed = 42;
    ov.realizations = 17;
    ov.out_dir = "x/y";
    RunConfig rc = parse_config_json(spatial_doc(), ov);
    CHECK(rc.base_seed == 42u);
    CHECK(rc.R == 17);
    CHECK(rc.out_dir == "x/y");
    CHECK(rc.resolved["ensemble"]["base_seed"] == 42);

    Overrides other;
    other.experiment = "collapse";
    CHECK(error_code([&] { parse_config_json(spatial_doc(), other); }) == "schema-error");
}

TEST_CASE("config errors")
{
    json bad = spatial_doc();
    bad["model"]["M"][0] = json::parse("[[1, 1], [0, -1]]");
    CHECK(error_code([&] { parse_config_json(bad); }) == "hermiticity-error");
    CHECK(error_message([&] { parse_config_json(bad); }).find("model.M[0]") != std::string::npos);

    json two = temporal_doc(1.0);
    two["model"]["channels"].push_back(two["model"]["channels"][0]);
    two["model"]["channels"][1]["N"] = json::parse("[[0, [0, 1]], [[0, 1], 0]]");
    CHECK(error_code([&] { parse_config_json(two); }) == "hermiticity-error");
    CHECK(error_message([&] { parse_config_json(two); }).find("channels[1]") != std::string::npos);

    CHECK(error_code([] { parse_config_json(temporal_doc(1.0)); }) == "contraction-violated");
    CHECK(error_code([] { parse_config_json(temporal_doc(0.45)); }) == "");

    json extra = spatial_doc();
    extra["grid"]["dt"] = 0.1;
    CHECK(error_code([&] { parse_config_json(extra); }) == "schema-error");
    CHECK(error_message([&] { parse_config_json(extra); }).find("grid.dt") != std::string::npos);

    json top = spatial_doc();
    top["colour"] = "red";
    CHECK(error_code([&] { parse_config_json(top); }) == "schema-error");

    json unknown = spatial_doc();
    unknown["experiment"] = "teleport";
    CHECK(error_code([&] { parse_config_json(unknown); }) == "schema-error");

    json dim = spatial_doc();
    dim["model"]["psi0"] = json::array({1, 0, 0});
    CHECK(error_code([&] { parse_config_json(dim); }) != "");

    json grid = spatial_doc();
    grid["grid"]["h"] = 0.03;
    CHECK(error_code([&] { parse_config_json(grid); }) != "");

    json solver = temporal_doc(0.45);
    solver["solver"] = {{"dyson", "magic"}};
    CHECK(error_code([&] { parse_config_json(solver); }) == "schema-error");

    CHECK(error_code([] { parse_config("/nonexistent/config.json"); }) == "schema-error");
    fs::path p = scratch("broken.json");
    std::ofstream(p) << "{ not json";
    CHECK(error_code([&] { parse_config(p.string()); }) == "schema-error");
}

TEST_CASE("exit codes")
{
    CHECK(exit_code_for("schema-error") == kExitUsage);
    CHECK(exit_code_for("hermiticity-error") == kExitUsage);
    CHECK(exit_code_for("contraction-violated") == kExitUsage);
    CHECK(exit_code_for("dyson-divergence") == kExitRuntime);
    CHECK(exit_code_for("solver-failures") == kExitRuntime);
    CHECK(experiment_module("collapse") != experiment_module("lindblad-spatial"));
    json e = error_report("collapse", "dyson-divergence", "boom");
    CHECK(e["error"]["code"] == "dyson-divergence");
}

TEST_CASE("matrix parsing")
{
    GeneralOperator m = parse_matrix(json::parse("[[1, [0, -1]], [[0, 1], 2]]"), 2, "m");
    CHECK(m(0, 1) == cplx(0, -1));
    CHECK(m(1, 0) == cplx(0, 1));
    CHECK(m(1, 1) == cplx(2, 0));
    CHECK(parse_matrix(matrix_to_json(m), 2, "m") == m);
    CHECK(error_code([] { parse_matrix(json::parse("[[1, 2]]"), 2, "m"); }) == "schema-error");
    CHECK(error_code([] { parse_matrix(json::parse("[[1, [0, 1, 2]], [0, 1]]"), 2, "m"); }) == "schema-error");
    StateVector v = parse_vector(json::parse("[[0.6, 0], [0, 0.8]]"), 2, "v");
    CHECK(v(1) == cplx(0, 0.8));
}

TEST_CASE("number and csv formatting")
{
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(-2.5e-300) == "-2.5e-300");
    CHECK(format_number(1.0 / 3.0) == "0.33333333333333331");
    CHECK(std::stod(format_number(M_PI)) == M_PI);
    CHECK(format_number(INFINITY) == "inf");
    CHECK(format_number(NAN) == "nan");

    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");

    Series empty({"t", "value"});
    CHECK(series_csv(empty) == "t,value\r\n");
    Series s({"t", "x,y"});
    s.add({0.0, 0.5});
    s.add({0.1, -1.0});
    CHECK(series_csv(s) == "t,\"x,y\"\r\n0,0.5\r\n0.10000000000000001,-1\r\n");
    CHECK(error_code([&] { s.add({1.0}); }) != "");

    std::vector<std::string> cols = density_columns(2);
    CHECK(cols.size() == 9u);
    CHECK(cols[0] == "t");
    CHECK(cols[3] == "re_s01");
    CHECK(cols[8] == "im_s11");
}

TEST_CASE("report json is sorted and versioned")
{
    json r = {{"zeta", 1.5}, {"alpha", {{"b", NAN}, {"a", INFINITY}}}, {"list", {1, 2}}};
    std::string text = report_json(r);
    json back = json::parse(text);
    CHECK(back["spec_version"] == kSpecVersion);
    CHECK(back["zeta"] == 1.5);
    CHECK(back["alpha"]["a"].is_null());
    CHECK(back["alpha"]["b"].is_null());
    CHECK(text.find("\"alpha\"") < text.find("\"zeta\""));
    CHECK(report_json(back) == text);
}

TEST_CASE("runs write artifacts and rerun byte-identically")
{
    fs::path dir = scratch("run");
    Overrides ov;
    ov.out_dir = dir.string();
    json doc = spatial_doc();
    doc["output"] = {{"formats", {"csv", "json", "svg"}}};
    RunConfig rc = parse_config_json(doc, ov);
    RunOutcome first = run(rc, true);
    CHECK(first.pass);
    CHECK(first.report["experiment"] == "lindblad-spatial");
    CHECK(first.report["config_digest"] == rc.digest);
    REQUIRE(fs::exists(dir / "report.json"));
    REQUIRE(fs::exists(dir / "resolved_config.json"));
    bool has_svg = false;
    std::vector<std::string> bytes;
    for (const auto& f : first.files) {
        REQUIRE(fs::exists(dir / f));
        has_svg = has_svg || fs::path(f).extension() == ".svg";
        bytes.push_back(slurp(dir / f));
    }
    CHECK(has_svg);
    json rep = json::parse(slurp(dir / "report.json"));
    CHECK(rep["spec_version"] == kSpecVersion);
    CHECK(rep["pass"] == true);

    RunConfig again = parse_config_json(json::parse(slurp(dir / "resolved_config.json")), ov);
    CHECK(again.digest == rc.digest);
    RunOutcome second = run(again, true);
    REQUIRE(second.files == first.files);
    for (std::size_t i = 0; i < first.files.size(); ++i) CHECK(slurp(dir / first.files[i]) == bytes[i]);
    fs::remove_all(dir);
}

TEST_CASE("criteria failures are reported, not thrown")
{
    fs::path dir = scratch("fail");
    json doc = spatial_doc();
    doc["lindblad-spatial"] = {{"tolerance", 1e-30}};
    Overrides ov;
    ov.out_dir = dir.string();
    RunOutcome out = run(parse_config_json(doc, ov), false);
    CHECK_FALSE(out.pass);
    CHECK(out.report["pass"] == false);
    bool any_fail = false;
    for (const auto& c : out.report["criteria"]) any_fail = any_fail || !c["pass"].get<bool>();
    CHECK(any_fail);
    fs::remove_all(dir);
}
