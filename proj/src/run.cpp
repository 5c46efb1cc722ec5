#include "collapse/run.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <regex>
#include <sstream>

#include "collapse/collapse.hpp"
#include "collapse/error.hpp"
#include "collapse/output.hpp"
#include "collapse/pairing.hpp"
#include "collapse/parallel.hpp"
#include "collapse/stats.hpp"

namespace collapse {

namespace fs = std::filesystem;

std::string experiment_module(const std::string& e)
{
    if (e == "simulate-spatial" || e == "lindblad-spatial") return "spatial_model";
    if (e == "simulate-temporal" || e == "lindblad-temporal") return "temporal_model";
    if (e == "pairing-check" || e == "scaling-probe") return "pairing_oracle";
    if (e == "collapse" || e == "hartree-fock") return "collapse_harness";
    if (e == "covariance-diag") return "noise";
    return "cli";
}

json error_report(const std::string& experiment, const std::string& code, const std::string& message)
{
    json e = {{"module", experiment_module(experiment)}, {"code", code}, {"message", message}, {"seed", nullptr}};
    std::smatch m;
    if (std::regex_search(message, m, std::regex("seed ([0-9]+)"))) e["seed"] = std::stoull(m[1].str());
    return {{"experiment", experiment}, {"error", e}, {"pass", false}};
}

std::vector<GeneralOperator> spatial_closed_form(const SpatialModelSpec& spec, const GeneralOperator& sigma0,
                                                 const TimeGrid& grid)
{
    auto diagonal = [](const GeneralOperator& m) {
        return max_abs(m - GeneralOperator(m.diagonal().asDiagonal())) == 0.0;
    };
    for (const auto& m : spec.M)
        if (!diagonal(m.mat())) return {};
    if (spec.H0 && !diagonal(spec.H0->mat())) return {};
    const int d = spec.dim;
    std::vector<GeneralOperator> out;
    for (int i = 0; i < grid.n; ++i) {
        double t = grid.t(i) - grid.t0;
        GeneralOperator s(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double rate = 0.0;
                for (const auto& m : spec.M) rate += 0.5 * std::pow(m.mat()(a, a).real() - m.mat()(b, b).real(), 2);
                double phase = spec.H0 ? (spec.H0->mat()(a, a).real() - spec.H0->mat()(b, b).real()) * t : 0.0;
                s(a, b) = sigma0(a, b) * std::exp(cplx(-rate * t, -phase));
            }
        out.push_back(s);
    }
    return out;
}

std::optional<double> gamma_closed_form(const KernelProfile& k)
{
    if (k.real_even()) return 0.25 * k.g * k.g;
    if (k.form == KernelForm::Modulated && k.base == KernelForm::Box) {
        double x = k.omega * k.ell;
        return 0.25 * k.g * k.g * std::pow(std::sin(x) / x, 2);
    }
    return std::nullopt;
}

std::vector<double> conservation_deviations(const TemporalModelSpec& spec, const StateVector& psi0,
                                            const TimeGrid& grid, int seeds, std::uint64_t base_seed,
                                            const DysonOptions& opts)
{
    const int C = static_cast<int>(spec.channels.size());
    std::vector<double> out(seeds);
    ordered_blocks<double>(
        seeds, 64,
        [&](int r) {
            std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(r));
            NoisePath noise = sample_noise_path(grid, C, seed);
            Potential pot(spec, grid, noise);
            DysonResult res = solve_nonlocal_dyson(pot, psi0, opts);
            double dev = 0.0;
            for (int k = pot.support(); k <= grid.n - 1 - pot.support(); ++k)
                dev = std::max(dev, std::abs(commutator_inner_product(res.traj, res.traj, k, pot) - 1.0));
            return dev;
        },
        [&](int r, double v) { out[r] = v; });
    return out;
}

namespace {

struct Criteria {
    json list = json::array();
    bool all = true;

    void add(const std::string& name, double value, const std::string& relation, double threshold, bool pass)
    {
        list.push_back({{"name", name}, {"value", value}, {"relation", relation}, {"threshold", threshold},
                        {"pass", pass}});
        all = all && pass;
    }
};

struct Writer {
    const RunConfig& cfg;
    bool svg;
    std::vector<std::string> files;

    std::string path(const std::string& name) const { return (fs::path(cfg.out_dir) / name).string(); }
    void csv(const std::string& name, const Series& s)
    {
        if (!cfg.wants("csv")) return;
        emit_series_csv(s, path(name));
        files.push_back(name);
    }
    void text(const std::string& name, const std::string& body)
    {
        write_text(path(name), body);
        files.push_back(name);
    }
    void chart(const std::string& name, const std::string& body)
    {
        if (svg || cfg.wants("svg")) text(name, body);
    }
};

std::vector<double> times(const TimeGrid& g)
{
    std::vector<double> t(g.n);
    for (int i = 0; i < g.n; ++i) t[i] = g.t(i);
    return t;
}

std::vector<double> offdiag_abs(const std::vector<GeneralOperator>& rho)
{
    std::vector<double> out;
    for (const auto& m : rho) out.push_back(m.rows() > 1 ? std::abs(m(0, 1)) : 0.0);
    return out;
}

json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

void lindblad_spatial(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    SpatialModelSpec spec = cfg.spatial();
    GeneralOperator s0 = cfg.psi0 * cfg.psi0.adjoint();
    auto rho = integrate_lindblad_spatial(DensityMatrix(s0), spec, cfg.grid);
    auto t = times(cfg.grid);
    w.csv("density.csv", density_series(t, rho));
    double trace_dev = 0.0;
    for (const auto& m : rho) trace_dev = std::max(trace_dev, std::abs(m.trace() - 1.0));
    details["max_trace_deviation"] = trace_dev;
    auto exact = spatial_closed_form(spec, s0, cfg.grid);
    if (!exact.empty()) {
        double rel = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i)
            for (int a = 0; a < spec.dim; ++a)
                for (int b = 0; b < spec.dim; ++b)
                    if (std::abs(exact[i](a, b)) > 0.0)
                        rel = std::max(rel, std::abs(rho[i](a, b) - exact[i](a, b)) / std::abs(exact[i](a, b)));
        double tol = cfg.params.at("tolerance").get<double>();
        cr.add("closed_form_relative_error", rel, "<=", tol, rel <= tol);
        w.csv("closed_form.csv", density_series(t, exact));
    }
    w.chart("coherence.svg", svg_line_chart("|s01| (Lindblad)", t, {{"lindblad", offdiag_abs(rho)}}));
}

void simulate_spatial(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    SpatialModelSpec spec = cfg.spatial();
    auto t = times(cfg.grid);
    const HermitianOperator* obs = cfg.observable ? &*cfg.observable : nullptr;
    if (cfg.params.at("no_collapse").get<bool>()) {
        if (!obs) fail("schema-error", "model.observable: required for the no-collapse check");
        NoCollapseReport nc = no_collapse_check(spec, *obs, cfg.psi0, cfg.grid, cfg.R, cfg.base_seed, cfg.stepper);
        Series s({"t", "variance", "se"});
        for (int i = 0; i < cfg.grid.n; ++i) s.add({t[i], nc.variance_series[i], nc.se_series[i]});
        w.csv("variance.csv", s);
        details["variance_initial"] = nc.variance_series.front();
        details["max_norm_drift"] = nc.max_drift;
        cr.add("variance_max_z", nc.max_z, "<=", 5.0, nc.pass);
        w.chart("variance.svg", svg_line_chart("ensemble variance of <O>", t, {{"variance", nc.variance_series}}));
    }
    if (!cfg.params.at("compare_lindblad").get<bool>()) return;
    SpatialEnsembleRun run = run_spatial_ensemble(spec, cfg.psi0, cfg.grid, cfg.R, cfg.base_seed, cfg.stepper, obs);
    auto lind = integrate_lindblad_spatial(DensityMatrix::pure(cfg.psi0), spec, cfg.grid);
    Series dist({"t", "trace_distance"});
    double maxd = 0.0;
    std::vector<double> dv;
    for (int i = 0; i < cfg.grid.n; ++i) {
        double d = trace_distance(run.density[i], lind[i]);
        dv.push_back(d);
        maxd = std::max(maxd, d);
        dist.add({t[i], d});
    }
    w.csv("density.csv", density_series(t, run.density));
    w.csv("lindblad.csv", density_series(t, lind));
    w.csv("trace_distance.csv", dist);
    double maxdrift = 0.0;
    for (double x : run.max_norm_drift) maxdrift = std::max(maxdrift, x);
    details["max_norm_drift"] = maxdrift;
    double thr = cfg.params.at("threshold").get<double>();
    cr.add("max_trace_distance", maxd, "<=", thr, maxd <= thr);
    w.chart("trace_distance.svg", svg_line_chart("trace distance to Lindblad", t, {{"distance", dv}}));
}

TemporalModelSpec halved_ell(const RunConfig& cfg)
{
    std::vector<Channel> ch = cfg.channels;
    for (auto& c : ch) c.kernel.ell *= 0.5;
    TemporalModelSpec s = make_temporal_spec(cfg.dim, ch, cfg.grid.t0, cfg.grid.t1, cfg.window);
    s.H0 = cfg.H0;
    return s;
}

void simulate_temporal(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    TemporalModelSpec spec = cfg.temporal();
    auto t = times(cfg.grid);
    const json& p = cfg.params;
    bool cip = p.at("use_commutator_ip").get<bool>();
    bool cv = p.at("control_variate").get<bool>();
    details["contraction_bound"] = spec.contraction_bound();
    if (p.at("compare_lindblad").get<bool>()) {
        TemporalComparison cmp = compare_temporal_ensemble(spec, cfg.psi0, cfg.grid, cfg.R, cfg.base_seed, cv, cip,
                                                           cfg.dyson);
        w.csv("density.csv", density_series(t, cmp.mc));
        w.csv("lindblad.csv", density_series(t, cmp.lindblad));
        Series d({"t", "trace_distance", "floor"});
        for (int i = 0; i < cfg.grid.n; ++i) d.add({t[i], cmp.distance[i], cmp.floor[i]});
        w.csv("trace_distance.csv", d);
        double thr = p.at("threshold").get<double>();
        details["max_trace_distance_t"] = t[cmp.argmax];
        details["statistical_floor"] = cmp.max_floor;
        cr.add("max_trace_distance", cmp.max_distance, "<=", thr, cmp.max_distance <= thr);
        std::vector<Curve> curves = {{"ell", cmp.distance}};
        if (p.at("ell_halving").get<bool>()) {
            TemporalModelSpec half = halved_ell(cfg);
            TemporalComparison c2 =
                compare_temporal_ensemble(half, cfg.psi0, cfg.grid, cfg.R, cfg.base_seed, cv, cip, cfg.dyson);
            Series d2({"t", "trace_distance", "floor"});
            for (int i = 0; i < cfg.grid.n; ++i) d2.add({t[i], c2.distance[i], c2.floor[i]});
            w.csv("trace_distance_half_ell.csv", d2);
            details["half_ell_max_trace_distance"] = c2.max_distance;
            details["half_ell_statistical_floor"] = c2.max_floor;
            cr.add("residual_decreases_with_half_ell", c2.max_distance, "<", cmp.max_distance,
                   c2.max_distance < cmp.max_distance);
            curves.push_back({"ell/2", c2.distance});
        }
        w.chart("trace_distance.svg", svg_line_chart("trace distance to temporal Lindblad", t, curves));
    }
    if (p.at("conservation").get<bool>()) {
        int seeds = p.at("conservation_seeds").get<int>();
        TimeGrid fine = TimeGrid::make(cfg.grid.t0, cfg.grid.t1, 0.5 * cfg.grid.h);
        auto dev_h = conservation_deviations(spec, cfg.psi0, cfg.grid, seeds, cfg.base_seed, cfg.dyson);
        auto dev_h2 = conservation_deviations(spec, cfg.psi0, fine, seeds, cfg.base_seed, cfg.dyson);
        ScalarMoments a, b;
        double ma = 0.0, mb = 0.0;
        Series s({"t", "seed_index", "sup_dev_h", "sup_dev_h_half"});
        for (int r = 0; r < seeds; ++r) {
            a.add(dev_h[r]);
            b.add(dev_h2[r]);
            ma = std::max(ma, dev_h[r]);
            mb = std::max(mb, dev_h2[r]);
            s.add({cfg.grid.t1, static_cast<double>(r), dev_h[r], dev_h2[r]});
        }
        w.csv("conservation.csv", s);
        double tol = cfg.dyson.tol;
        double h = cfg.grid.h;
        double C1 = ma / (h * h + tol), C2 = mb / (0.25 * h * h + tol);
        double ratio = a.mean() / b.mean();
        details["conservation"] = {{"h", h},          {"mean_sup_dev_h", a.mean()}, {"mean_sup_dev_h_half", b.mean()},
                                   {"C_h", C1},       {"C_h_half", C2},            {"max_sup_dev_h", ma},
                                   {"max_sup_dev_h_half", mb}, {"seeds", seeds}};
        cr.add("conservation_refinement_ratio", ratio, "in", 4.0, ratio >= 3.0 && ratio <= 5.0);
    }
}

void lindblad_temporal(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    TemporalModelSpec spec = cfg.temporal();
    const json& p = cfg.params;
    bool incH = p.at("include_H").get<bool>();
    auto t = times(cfg.grid);
    auto rho = integrate_lindblad_temporal(DensityMatrix::pure(cfg.psi0), spec, cfg.grid, incH);
    w.csv("density.csv", density_series(t, rho));
    double gtol = p.at("gamma_tolerance").get<double>();
    json gam = json::array();
    double tmid = cfg.grid.t((cfg.grid.n - 1) / 2);
    for (std::size_t c = 0; c < spec.channels.size(); ++c) {
        const KernelProfile& k = spec.channels[c].kernel;
        RateTable rt = rates_ab(k);
        Series s({"t", "zeta", "a", "b"});
        for (std::size_t i = 0; i < rt.zeta.size(); ++i) s.add({tmid, rt.zeta[i], rt.a[i], rt.b[i]});
        w.csv("rates_channel" + std::to_string(c) + ".csv", s);
        json g = {{"channel", c}, {"gamma_quadrature", rt.gamma}, {"gamma_closed_form", nullptr}};
        if (auto cf = gamma_closed_form(k)) {
            g["gamma_closed_form"] = *cf;
            double err = std::abs(rt.gamma - *cf);
            cr.add("gamma_closed_form_vs_quadrature_ch" + std::to_string(c), err, "<=", gtol * std::max(1.0, *cf),
                   err <= gtol * std::max(1.0, *cf));
        }
        gam.push_back(g);
    }
    details["gamma"] = gam;

    std::vector<double> ht;
    for (const auto& x : p.at("hamiltonian_times")) ht.push_back(x.get<double>());
    if (ht.empty()) ht.push_back(tmid);
    double ctol = p.at("correction_tolerance").get<double>();
    bool real_even = true;
    for (const auto& ch : spec.channels) real_even = real_even && ch.kernel.real_even();
    json hs = json::array();
    double herm = 0.0, corr = 0.0, hn12 = 0.0;
    for (double th : ht) {
        EffectiveHamiltonian eh = effective_hamiltonian(th, spec);
        GeneralOperator c = eh.hn1 + eh.hn2 + eh.hn3;
        herm = std::max(herm, eh.hermiticity_residual);
        corr = std::max(corr, max_abs(c));
        hn12 = std::max({hn12, max_abs(eh.hn1), max_abs(eh.hn2)});
        hs.push_back({{"t", th},
                      {"correction_max_abs", max_abs(c)},
                      {"hn1_max_abs", max_abs(eh.hn1)},
                      {"hn2_max_abs", max_abs(eh.hn2)},
                      {"hn3", matrix_to_json(eh.hn3)},
                      {"hermiticity_residual", eh.hermiticity_residual}});
    }
    details["effective_hamiltonian"] = hs;
    cr.add("effective_H_hermiticity", herm, "<=", ctol, herm <= ctol);
    if (spec.channels.size() == 1) cr.add("hn1_hn2_single_channel", hn12, "<=", ctol, hn12 <= ctol);
    if (real_even) cr.add("real_even_correction", corr, "<=", ctol, corr <= ctol);
    w.chart("coherence.svg", svg_line_chart("|s01| (temporal Lindblad)", t, {{"lindblad", offdiag_abs(rho)}}));
}

void pairing_check(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    PairingConfig pc;
    pc.spec = cfg.temporal();
    pc.psi0 = cfg.psi0;
    pc.grid = cfg.grid;
    pc.R = cfg.R;
    pc.base_seed = cfg.base_seed;
    pc.digest = cfg.digest;
    const json& tj = cfg.params.at("t");
    pc.t = tj.is_null() ? cfg.grid.t((cfg.grid.n - 1) / 2) : tj.get<double>();
    std::vector<PairingId> ids;
    const json& idj = cfg.params.at("identities");
    if (idj.is_string()) ids.push_back(pairing_id_from(idj.get<std::string>()));
    else
        for (const auto& x : idj) ids.push_back(pairing_id_from(x.get<std::string>()));
    json reps = json::array();
    Series s({"t", "identity_index", "z_score", "max_abs_diff", "max_se", "pass"});
    int idx = 0;
    for (PairingId id : ids) {
        OracleReport r = verify_pairing_identity(id, pc);
        json coefs = json::array();
        for (cplx c : r.coefficients) coefs.push_back(cplx_json(c));
        json rj = {{"id", to_string(id)},
                   {"description", r.description},
                   {"pass", r.pass},
                   {"z_score", r.z_score},
                   {"max_abs_diff", r.max_abs_diff},
                   {"standard_error", r.max_se},
                   {"R", r.R},
                   {"seeds", {{"base_seed", r.base_seed}, {"count", r.R}}},
                   {"coefficients", coefs},
                   {"mc_estimate", matrix_to_json(r.mc)},
                   {"analytic", matrix_to_json(r.analytic)},
                   {"config_digest", r.digest}};
        if (!r.theta_scan.empty()) {
            json sc = json::array();
            for (const auto& x : r.theta_scan) sc.push_back({{"theta0", x.theta0}, {"z_score", x.z}, {"pass", x.pass}});
            rj["theta0_scan"] = sc;
        }
        reps.push_back(rj);
        s.add({pc.t, static_cast<double>(idx++), r.z_score, r.max_abs_diff, r.max_se, r.pass ? 1.0 : 0.0});
        cr.add("pairing_" + to_string(id), r.z_score, "<=", 5.0, r.pass);
    }
    ConjugacyCheck cc = conjugate_structure_check(pc.spec, pc.psi0);
    details["conjugate_structure"] = {{"b2_b3_structure_residual", cc.b2_b3_structure_residual},
                                      {"d1_c1_trace_residual", cc.d1_c1_trace_residual},
                                      {"pass", cc.pass}};
    cr.add("conjugate_structure", std::max(cc.b2_b3_structure_residual, cc.d1_c1_trace_residual), "<=", 1e-10,
           cc.pass);
    details["t"] = pc.t;
    details["reports"] = reps;
    w.csv("pairing.csv", s);
}

std::vector<double> doubles(const json& j, const std::string& where)
{
    if (!j.is_array()) fail("schema-error", where + ": expected a list of numbers");
    std::vector<double> v;
    for (const auto& x : j) {
        if (!x.is_number()) fail("schema-error", where + ": expected a list of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

void scaling_probe(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    if (cfg.channels.empty()) fail("schema-error", "model.channels: scaling probe needs one channel");
    const json& p = cfg.params;
    if (!p.contains("ell") || !p.contains("g")) fail("schema-error", "scaling-probe: needs 'ell' and 'g' lists");
    ScalingProbeConfig sc;
    sc.N = cfg.channels.front().N;
    sc.form = cfg.channels.front().kernel.form;
    sc.psi0 = cfg.psi0;
    sc.t0 = cfg.grid.t0;
    sc.t1 = cfg.grid.t1;
    sc.lags_per_ell = p.at("lags_per_ell").get<int>();
    sc.R = cfg.R;
    sc.base_seed = cfg.base_seed;
    sc.control_variate = p.at("control_variate").get<bool>();
    ScalingReport rep = nonadjacent_scaling_probe(doubles(p.at("ell"), "scaling-probe.ell"),
                                                  doubles(p.at("g"), "scaling-probe.g"), sc);
    Series s({"t", "ell", "g", "residual", "floor", "underpowered"});
    json pts = json::array();
    for (const auto& x : rep.points) {
        s.add({cfg.grid.t1, x.ell, x.g, x.residual, x.floor, x.underpowered ? 1.0 : 0.0});
        pts.push_back({{"ell", x.ell}, {"g", x.g}, {"residual", x.residual}, {"floor", x.floor},
                       {"underpowered", x.underpowered}});
    }
    w.csv("scaling.csv", s);
    details["points"] = pts;
    details["slopes"] = rep.slopes;
    details["fit_residuals"] = rep.fit_residuals;
    details["ells"] = rep.ells;
    for (std::size_t a = 0; a < rep.ells.size(); ++a) {
        std::ostringstream name;
        name << "slope_in_g_ell_" << format_number(rep.ells[a]);
        cr.add(name.str(), rep.slopes[a], "in", 2.0, std::abs(rep.slopes[a] - 2.0) <= 0.3);
    }
    cr.add("residual_decreases_with_ell", rep.ell_ordering ? 1.0 : 0.0, "==", 1.0, rep.ell_ordering);
    std::vector<Curve> curves;
    std::vector<double> gx;
    for (const auto& x : rep.points)
        if (x.ell == rep.ells.front()) gx.push_back(x.g);
    for (double ell : rep.ells) {
        Curve c{"ell=" + format_number(ell), {}};
        for (const auto& x : rep.points)
            if (x.ell == ell) c.y.push_back(x.residual);
        curves.push_back(c);
    }
    w.chart("scaling.svg", svg_line_chart("residual vs g", gx, curves, true));
}

CollapseConfig collapse_config(const RunConfig& cfg)
{
    if (!cfg.observable) fail("schema-error", "model.observable: required for collapse experiments");
    CollapseConfig cc;
    cc.spec = cfg.temporal();
    cc.observable = *cfg.observable;
    cc.psi0 = cfg.psi0;
    cc.grid = cfg.grid;
    cc.R = cfg.R;
    cc.base_seed = cfg.base_seed;
    cc.p_c = cfg.params.at("threshold").get<double>();
    cc.dyson = cfg.dyson;
    return cc;
}

void collapse_run(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    CollapseConfig cc = collapse_config(cfg);
    CollapseReport rep = run_collapse_experiment(cc);
    Series s({"t", "c", "martingale_mean", "martingale_se", "variance_mean", "variance_se"});
    for (std::size_t i = 0; i < rep.t.size(); ++i)
        s.add({rep.t[i], rep.c[i], rep.martingale_mean[i], rep.martingale_se[i], rep.variance_mean[i],
               rep.variance_se[i]});
    w.csv("collapse_series.csv", s);
    Series b({"t", "eigenvalue", "predicted", "observed", "ci_lo", "ci_hi", "count"});
    json born = json::array();
    std::vector<std::string> labels;
    std::vector<double> pred, obs;
    for (const auto& r : rep.born_table) {
        b.add({cfg.grid.t1, r.eigenvalue, r.predicted, r.observed, r.ci_lo, r.ci_hi, static_cast<double>(r.count)});
        born.push_back({{"eigenvalue", r.eigenvalue}, {"predicted", r.predicted}, {"observed", r.observed},
                        {"ci99", {r.ci_lo, r.ci_hi}}, {"count", r.count}, {"inside", r.inside}});
        labels.push_back(format_number(r.eigenvalue));
        pred.push_back(r.predicted);
        obs.push_back(r.observed);
    }
    w.csv("born.csv", b);
    details["born_table"] = born;
    details["unresolved_fraction"] = rep.unresolved_fraction;
    details["threshold"] = cc.p_c;
    details["gamma_T"] = rep.gamma_T;
    details["martingale_drift"] = rep.martingale_drift;
    details["endpoint_residual"] = rep.endpoint_residual;
    details["variance_monotone"] = rep.variance_monotone;
    details["failed_trajectories"] = rep.failed;
    double vmax = cfg.params.at("variance_ratio_max").get<double>();
    cr.add("final_over_initial_variance", rep.variance_ratio, "<=", vmax, rep.variance_ratio <= vmax);
    for (const auto& r : rep.born_table)
        if (r.predicted > 0.0)
            cr.add("born_frequency_eigenvalue_" + format_number(r.eigenvalue), r.observed, "ci99_contains",
                   r.predicted, r.inside);
    cr.add("martingale_drift_z", rep.martingale_z, "<=", 5.0, rep.martingale_z <= 5.0);

    std::vector<double> vt;
    for (const auto& x : cfg.params.at("variance_rate_times")) vt.push_back(x.get<double>());
    if (!vt.empty()) {
        VarianceRateReport vr = variance_rate_check(cc, vt);
        Series v({"t", "t_b", "lhs", "lhs_se", "rhs", "rhs_se", "z"});
        json rows = json::array();
        for (const auto& r : vr.rows) {
            v.add({r.t_a, r.t_b, r.lhs, r.lhs_se, r.rhs, r.rhs_se, r.z});
            rows.push_back({{"t_a", r.t_a}, {"t_b", r.t_b}, {"lhs", r.lhs}, {"lhs_se", r.lhs_se}, {"rhs", r.rhs},
                            {"rhs_se", r.rhs_se}, {"z", r.z}, {"non_positive", r.non_positive}});
        }
        w.csv("variance_rate.csv", v);
        details["variance_rate"] = rows;
        cr.add("variance_rate_agreement", vr.pass ? 1.0 : 0.0, "==", 1.0, vr.pass);
    }
    const json& ct = cfg.params.at("composite_time");
    double tc = ct.is_null() ? cfg.grid.t((cfg.grid.n - 1) / 2) : ct.get<double>();
    CompositeReport comp = composite_check(cc.spec, tc);
    details["composite"] = {{"t", tc},
                            {"operator_estimate", matrix_to_json(comp.operator_estimate)},
                            {"deviation_from_scalar", comp.deviation_from_scalar}};
    w.chart("variance.svg", svg_line_chart("ensemble variance", rep.t, {{"variance", rep.variance_mean}}));
    w.chart("martingale.svg", svg_line_chart("<<O>>_res", rep.t, {{"mean", rep.martingale_mean}}));
    w.chart("born.svg", svg_bar_chart("Born frequencies", labels, pred, obs));
}

void hartree_fock(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    CollapseConfig cc = collapse_config(cfg);
    std::vector<int> qs;
    for (const auto& x : cfg.params.at("q")) {
        if (!x.is_number_integer()) fail("schema-error", "hartree-fock.q: expected integers");
        qs.push_back(x.get<int>());
    }
    HartreeFockReport rep = hartree_fock_demo(cc, qs);
    Series s({"t", "q", "ci_lo", "ci_hi", "unresolved"});
    json rows = json::array();
    std::vector<double> qx, med;
    for (const auto& r : rep.rows) {
        s.add({r.median, static_cast<double>(r.q), r.ci_lo, r.ci_hi, static_cast<double>(r.unresolved)});
        rows.push_back({{"q", r.q}, {"median", r.median}, {"ci99", {r.ci_lo, r.ci_hi}}, {"unresolved", r.unresolved}});
        qx.push_back(r.q);
        med.push_back(r.median);
    }
    w.csv("hartree_fock.csv", s);
    details["rows"] = rows;
    details["composites"] = rep.R;
    details["threshold"] = cc.p_c;
    cr.add("median_non_increasing_in_q", rep.monotone ? 1.0 : 0.0, "==", 1.0, rep.monotone);
    w.chart("hartree_fock.svg", svg_line_chart("median collapse time vs q", qx, {{"median", med}}));
}

void covariance_diag(const RunConfig& cfg, Writer& w, Criteria& cr, json& details)
{
    const json& p = cfg.params;
    if (!p.contains("covariance") || !p["covariance"].is_array())
        fail("schema-error", "covariance-diag.covariance: expected a list of d^2 x d^2 matrices");
    CovarianceSpec cs;
    cs.dim = cfg.dim;
    for (std::size_t a = 0; a < p["covariance"].size(); ++a)
        cs.C.push_back(parse_matrix(p["covariance"][a], cfg.dim * cfg.dim,
                                    "covariance-diag.covariance[" + std::to_string(a) + "]"));
    DiagonalizedCovariance dc = diagonalize_covariance(cs);
    double tol = p.at("tolerance").get<double>();
    double resid = 0.0;
    for (std::size_t a = 0; a < cs.C.size(); ++a)
        resid = std::max(resid, max_abs(reconstruct_covariance(dc, cfg.dim, static_cast<int>(a)) - cs.C[a]));
    json modes = json::array();
    Series s({"t", "channel", "lambda"});
    for (const auto& m : dc.modes) {
        modes.push_back({{"channel", m.channel}, {"lambda", m.lambda}, {"phi", matrix_to_json(m.phi.mat())}});
        s.add({cfg.grid.t0, static_cast<double>(m.channel), m.lambda});
    }
    w.csv("modes.csv", s);
    details["modes"] = modes;
    cr.add("reconstruction_residual", resid, "<=", tol, resid <= tol);
    int samples = p.at("samples").get<int>();
    std::vector<NoisePath> paths(samples);
    int C = std::max<int>(1, static_cast<int>(dc.modes.size()));
    for (int r = 0; r < samples; ++r)
        paths[r] = sample_noise_path(cfg.grid, C, derive_seed(cfg.base_seed, static_cast<std::uint64_t>(r)));
    CovarianceCheck ck = empirical_covariance_check(paths);
    details["empirical"] = {{"max_abs_dev", ck.max_abs_dev}, {"max_z", ck.max_z}, {"max_mean_z", ck.max_mean_z}};
    cr.add("empirical_noise_covariance_z", std::max(ck.max_z, ck.max_mean_z), "<=", 5.0, ck.pass);
}

}  // namespace

int exit_code_for(const std::string& code)
{
    if (code == "schema-error" || code == "hermiticity-error" || code == "contraction-violated" ||
        code == "grid-misalignment")
        return kExitUsage;
    return kExitRuntime;
}

RunOutcome run(const RunConfig& cfg, bool svg)
{
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) fail("io-error", "cannot create output directory '" + cfg.out_dir + "': " + ec.message());
    Writer w{cfg, svg, {}};
    w.text("resolved_config.json", cfg.resolved.dump(2) + "\n");
    Criteria cr;
    json details = json::object();
    const std::string& e = cfg.experiment;
    if (e == "lindblad-spatial") lindblad_spatial(cfg, w, cr, details);
    else if (e == "simulate-spatial") simulate_spatial(cfg, w, cr, details);
    else if (e == "simulate-temporal") simulate_temporal(cfg, w, cr, details);
    else if (e == "lindblad-temporal") lindblad_temporal(cfg, w, cr, details);
    else if (e == "pairing-check") pairing_check(cfg, w, cr, details);
    else if (e == "scaling-probe") scaling_probe(cfg, w, cr, details);
    else if (e == "collapse") collapse_run(cfg, w, cr, details);
    else if (e == "hartree-fock") hartree_fock(cfg, w, cr, details);
    else if (e == "covariance-diag") covariance_diag(cfg, w, cr, details);
    else fail("schema-error", "unknown experiment '" + e + "'");

    RunOutcome out;
    out.pass = cr.all;
    out.report = {{"experiment", e},
                  {"config_digest", cfg.digest},
                  {"realizations", cfg.R},
                  {"base_seed", cfg.base_seed},
                  {"pass", cr.all},
                  {"criteria", cr.list},
                  {"details", details}};
    if (cfg.wants("json")) {
        emit_report_json(out.report, w.path("report.json"));
        w.files.push_back("report.json");
    }
    out.files = w.files;
    return out;
}

}  // namespace collapse
