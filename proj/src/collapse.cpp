#include "collapse/collapse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "collapse/error.hpp"
#include "collapse/parallel.hpp"
#include "collapse/stats.hpp"

namespace collapse {

void CollapseConfig::validate() const
{
    spec.validate();
    require_same_dim(observable.dim(), spec.dim, "observable");
    require_same_dim(psi0.size(), spec.dim, "psi0");
    std::vector<HermitianOperator> ns;
    for (const auto& ch : spec.channels) ns.push_back(ch.N);
    require_commuting(observable, ns, "collapse observable");
    for (std::size_t a = 0; a < ns.size(); ++a)
        for (std::size_t b = a + 1; b < ns.size(); ++b)
            if (max_abs(commutator(ns[a].mat(), ns[b].mat())) > 1e-10)
                fail("observable-not-commuting", "channel operators N_k do not commute pairwise");
    if (!(p_c > 0.5 && p_c < 1.0)) fail("schema-error", "classification threshold p_c must lie in (0.5, 1)");
    if (R < 2) fail("insufficient-samples", "collapse experiment needs at least 2 realizations");
    spec.require_contraction();
}

namespace {

const cplx I(0.0, 1.0);

// Raw per-node quantities of one trajectory.
struct Summary {
    std::vector<double> nrm, o1, o2;
    std::vector<std::vector<double>> q;  // per channel (psi|O N psi)(psi|psi) - (psi|O psi)(psi|N psi)
    std::vector<double> weights;         // eigenspace weights of psi~(t1), normalized
    double endpoint = 0.0;               // |psi~ - psi| at t0 and t1
    bool ok = false;
};

Summary summarize(const CollapseConfig& cfg, const std::vector<Eigenspace>& es, int r, bool with_q)
{
    Summary s;
    std::uint64_t seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(r));
    const int C = static_cast<int>(cfg.spec.channels.size());
    NoisePath noise = sample_noise_path(cfg.grid, C, seed);
    Potential pot(cfg.spec, cfg.grid, noise);
    DysonResult res;
    try {
        res = solve_nonlocal_dyson(pot, cfg.psi0, cfg.dyson);
    } catch (const Error& e) {
        warn_once(std::string(e.what()) + " (seed " + std::to_string(seed) + ")");
        return s;
    }
    const auto& st = res.traj.states;
    const int n = cfg.grid.n;
    const GeneralOperator& O = cfg.observable.mat();
    s.nrm.resize(n);
    s.o1.resize(n);
    s.o2.resize(n);
    if (with_q) s.q.assign(C, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        StateVector Op = O * st[i];
        s.nrm[i] = st[i].squaredNorm();
        s.o1[i] = st[i].dot(Op).real();
        s.o2[i] = Op.squaredNorm();
        for (int c = 0; with_q && c < C; ++c) {
            StateVector Np = cfg.spec.channels[c].N.mat() * st[i];
            s.q[c][i] = (Op.dot(Np) * s.nrm[i] - s.o1[i] * st[i].dot(Np)).real();
        }
    }
    SBuilder sb(pot, Propagation::Identity);
    for (int i : {0, n - 1}) {
        GeneralOperator S = sb.raw(i);
        StateVector tilde = st[i];
        if (S.size() && max_abs(S) > 0.0) {
            SOperatorResult so;
            so.S = 0.5 * (S + S.adjoint());
            Eigen::SelfAdjointEigenSolver<GeneralOperator> e(GeneralOperator::Identity(S.rows(), S.cols()) + so.S,
                                                             Eigen::EigenvaluesOnly);
            so.min_eig_of_1_plus_S = e.eigenvalues().minCoeff();
            tilde = transform_state(st[i], so);
        }
        s.endpoint = std::max(s.endpoint, (tilde - st[i]).cwiseAbs().maxCoeff());
        if (i == n - 1) {
            double tot = tilde.squaredNorm();
            for (const auto& e : es) s.weights.push_back(tot > 0 ? (e.projector * tilde).squaredNorm() / tot : 0.0);
        }
    }
    s.ok = true;
    return s;
}

void abort_if_too_many_failures(int failed, int R)
{
    if (failed > 0.01 * R) {
        std::ostringstream os;
        os << failed << " of " << R << " trajectories failed";
        fail("solver-failures", os.str());
    }
}

double total_gamma(const TemporalModelSpec& spec)
{
    double g = 0.0;
    for (const auto& ch : spec.channels) g += lindblad_rate(ch.kernel);
    return g;
}

}  // namespace

CollapseReport run_collapse_experiment(const CollapseConfig& cfg)
{
    cfg.validate();
    const int n = cfg.grid.n;
    std::vector<Eigenspace> es = eigenspaces(cfg.observable);
    CollapseReport rep;
    rep.R = cfg.R;
    rep.gamma_T = total_gamma(cfg.spec) * cfg.grid.span();
    if (rep.gamma_T < 5.0 - 1e-9) {
        std::ostringstream os;
        os << "gamma T = " << rep.gamma_T << " is below 5; Born frequencies may not have settled";
        warn_once(os.str());
    }

    // Pass 1: ensemble norm.
    std::vector<double> nrm_sum(n, 0.0);
    int failed = 0;
    ordered_blocks<Summary>(
        cfg.R, 256, [&](int r) { return summarize(cfg, es, r, false); },
        [&](int, const Summary& s) {
            if (!s.ok) {
                ++failed;
                return;
            }
            for (int i = 0; i < n; ++i) nrm_sum[i] += s.nrm[i];
        });
    abort_if_too_many_failures(failed, cfg.R);
    int good = cfg.R - failed;
    rep.failed = failed;
    for (int i = 0; i < n; ++i) {
        rep.t.push_back(cfg.grid.t(i));
        rep.c.push_back(1.0 / std::sqrt(nrm_sum[i] / good));
    }

    // Pass 2: statistics of the rescaled curve.
    std::vector<ScalarMoments> mart(n), mdiff(n), var(n);
    std::vector<long> counts(es.size(), 0);
    long unresolved = 0;
    ordered_blocks<Summary>(
        cfg.R, 256, [&](int r) { return summarize(cfg, es, r, false); },
        [&](int, const Summary& s) {
            if (!s.ok) return;
            for (int i = 0; i < n; ++i) {
                double c2 = rep.c[i] * rep.c[i];
                double m = c2 * s.o1[i];
                mart[i].add(m);
                mdiff[i].add(m - rep.c[0] * rep.c[0] * s.o1[0]);
                var[i].add(c2 * s.o2[i] - m * m);
            }
            int best = -1;
            for (std::size_t e = 0; e < s.weights.size(); ++e)
                if (s.weights[e] >= cfg.p_c) best = static_cast<int>(e);
            if (best < 0) ++unresolved;
            else ++counts[best];
            rep.endpoint_residual = std::max(rep.endpoint_residual, s.endpoint);
        });
    rep.endpoint_residual = std::max(rep.endpoint_residual, std::abs(rep.c[0] - 1.0));

    for (int i = 0; i < n; ++i) {
        rep.martingale_mean.push_back(mart[i].mean());
        rep.martingale_se.push_back(mart[i].se());
        rep.variance_mean.push_back(var[i].mean());
        rep.variance_se.push_back(var[i].se());
        double d = std::abs(mdiff[i].mean());
        rep.martingale_drift = std::max(rep.martingale_drift, d);
        double se = mdiff[i].se();
        double z = se > 0 ? d / se : (d > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0);
        rep.martingale_z = std::max(rep.martingale_z, z);
    }
    double v0 = rep.variance_mean.front(), v1 = rep.variance_mean.back();
    rep.variance_ratio = v0 > 0 ? v1 / v0 : (v1 > 0 ? std::numeric_limits<double>::infinity() : 0.0);

    // Window-averaged variance over 10 nodes must not rise by more than 5 SE.
    const int win = std::min(10, n);
    std::vector<double> sm, smse;
    for (int i = 0; i + win <= n; ++i) {
        double a = 0.0, b = 0.0;
        for (int j = i; j < i + win; ++j) {
            a += rep.variance_mean[j];
            b += rep.variance_se[j];
        }
        sm.push_back(a / win);
        smse.push_back(b / win);
    }
    rep.variance_monotone = true;
    for (std::size_t i = 1; i < sm.size(); ++i)
        if (sm[i] - sm[i - 1] > 5.0 * std::max(smse[i], smse[i - 1]) + 1e-12) rep.variance_monotone = false;

    double norm0 = cfg.psi0.squaredNorm();
    for (std::size_t e = 0; e < es.size(); ++e) {
        BornRow row;
        row.eigenvalue = es[e].value;
        row.predicted = (es[e].projector * cfg.psi0).squaredNorm() / norm0;
        row.count = counts[e];
        row.observed = static_cast<double>(counts[e]) / good;
        std::tie(row.ci_lo, row.ci_hi) = wilson_interval(counts[e], good, kZ99);
        row.inside = row.predicted >= row.ci_lo && row.predicted <= row.ci_hi;
        rep.born_table.push_back(row);
    }
    rep.unresolved_fraction = static_cast<double>(unresolved) / good;
    return rep;
}

namespace {

// Coefficient of N^2 in the product of the (X - X^dagger) and (Z - Z^dagger) factors.
double variance_kappa(const Channel& ch, const Envelope& env, double t)
{
    const KernelProfile& k = ch.kernel;
    auto f = [&](double z) -> cplx {
        double w = env(t + z);
        cplx x = 2.0 * w * (k.value(2 * z) - std::conj(k.value(2 * z)));
        cplx zi = z_integral(k, z);
        cplx zz = 2.0 * w * (zi - std::conj(zi));
        return x * zz;
    };
    std::vector<double> br = zeta_breaks(k);
    for (double x : env.knots()) br.push_back(x - t);
    return integrate_1d(f, -0.5 * k.ell, 0.5 * k.ell, br).real();
}

}  // namespace

VarianceRateReport variance_rate_check(const CollapseConfig& cfg, const std::vector<double>& sample_times)
{
    cfg.validate();
    if (cfg.R < 100) fail("underpowered", "variance rate check needs at least 100 realizations");
    std::vector<int> nodes;
    for (double t : sample_times) {
        int i = cfg.grid.index_of(t);
        if (i < 0) fail("grid-misalignment", "sample time is not a grid node");
        nodes.push_back(i);
    }
    if (nodes.size() < 2) fail("schema-error", "variance rate check needs at least two sample times");
    std::vector<Eigenspace> es = eigenspaces(cfg.observable);
    const int C = static_cast<int>(cfg.spec.channels.size());
    const int n = cfg.grid.n;
    std::vector<std::vector<double>> kappa(C, std::vector<double>(nodes.size()));
    for (int c = 0; c < C; ++c)
        for (std::size_t s = 0; s < nodes.size(); ++s)
            kappa[c][s] = variance_kappa(cfg.spec.channels[c], cfg.spec.window, cfg.grid.t(nodes[s]));

    std::vector<double> nrm_sum(n, 0.0);
    int failed = 0;
    ordered_blocks<Summary>(
        cfg.R, 256, [&](int r) { return summarize(cfg, es, r, false); },
        [&](int, const Summary& s) {
            if (!s.ok) {
                ++failed;
                return;
            }
            for (int i = 0; i < n; ++i) nrm_sum[i] += s.nrm[i];
        });
    abort_if_too_many_failures(failed, cfg.R);
    std::vector<double> c(n);
    for (int i = 0; i < n; ++i) c[i] = 1.0 / std::sqrt(nrm_sum[i] / (cfg.R - failed));

    const std::size_t P = nodes.size() - 1;
    std::vector<ScalarMoments> lhs(P), rhs(P), diff(P);
    ordered_blocks<Summary>(
        cfg.R, 256, [&](int r) { return summarize(cfg, es, r, true); },
        [&](int, const Summary& s) {
            if (!s.ok) return;
            auto v = [&](int i) {
                double c2 = c[i] * c[i];
                double m = c2 * s.o1[i];
                return c2 * s.o2[i] - m * m;
            };
            auto rate = [&](std::size_t si) {
                int i = nodes[si];
                double c4 = std::pow(c[i], 4);
                double out = 0.0;
                for (int ch = 0; ch < C; ++ch) out += -4.0 * kappa[ch][si] * std::pow(c4 * s.q[ch][i], 2);
                return out;
            };
            for (std::size_t p = 0; p < P; ++p) {
                double dt = cfg.grid.t(nodes[p + 1]) - cfg.grid.t(nodes[p]);
                double l = (v(nodes[p + 1]) - v(nodes[p])) / dt;
                double rr = 0.5 * (rate(p) + rate(p + 1));
                lhs[p].add(l);
                rhs[p].add(rr);
                diff[p].add(l - rr);
            }
        });
    VarianceRateReport rep;
    rep.pass = true;
    for (std::size_t p = 0; p < P; ++p) {
        VarianceRateRow row;
        row.t_a = cfg.grid.t(nodes[p]);
        row.t_b = cfg.grid.t(nodes[p + 1]);
        row.lhs = lhs[p].mean();
        row.lhs_se = lhs[p].se();
        row.rhs = rhs[p].mean();
        row.rhs_se = rhs[p].se();
        double d = std::abs(diff[p].mean()), se = diff[p].se();
        row.z = se > 0 ? d / se : (d > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0);
        row.non_positive = row.lhs <= 5.0 * row.lhs_se + 1e-12;
        rep.pass = rep.pass && row.z <= 5.0 && row.non_positive;
        rep.rows.push_back(row);
    }
    return rep;
}

CompositeReport composite_check(const TemporalModelSpec& spec, double t)
{
    spec.validate();
    CompositeReport rep;
    rep.operator_estimate = GeneralOperator::Zero(spec.dim, spec.dim);
    double scale = 0.0;
    for (const auto& ch : spec.channels) {
        const KernelProfile& k = ch.kernel;
        scale += std::pow(k.max_abs() * k.ell, 2) * (ch.N.mat() * ch.N.mat()).norm();
        auto f = [&](double z) -> cplx {
            double w = spec.window(t + z);
            cplx x = k.value(2 * z), y = y_integral(k, z), zi = z_integral(k, z);
            return 4.0 * w * w * (-x * y - std::conj(y) * std::conj(x) + std::conj(zi) * x + std::conj(x) * zi);
        };
        std::vector<double> br = zeta_breaks(k);
        for (double x : spec.window.knots()) br.push_back(x - t);
        cplx coef = integrate_1d(f, -0.5 * k.ell, 0.5 * k.ell, br);
        rep.operator_estimate += coef * (ch.N.mat() * ch.N.mat());
    }
    double nrm = rep.operator_estimate.norm();
    if (nrm <= 1e-12 * scale) rep.operator_estimate.setZero();
    else {
        cplx tr = rep.operator_estimate.trace() / static_cast<double>(spec.dim);
        GeneralOperator dev = rep.operator_estimate - tr * GeneralOperator::Identity(spec.dim, spec.dim);
        rep.deviation_from_scalar = dev.norm() / nrm;
    }
    return rep;
}

double collapse_time(const std::vector<StateVector>& states, const TimeGrid& grid, const std::vector<Eigenspace>& es,
                     double p_c)
{
    for (std::size_t i = 0; i < states.size(); ++i) {
        double tot = states[i].squaredNorm();
        if (!(tot > 0.0)) continue;
        for (const auto& e : es)
            if ((e.projector * states[i]).squaredNorm() / tot >= p_c) return grid.t(static_cast<int>(i));
    }
    return kUnresolved;
}

HartreeFockReport hartree_fock_demo(const CollapseConfig& cfg, const std::vector<int>& q_list)
{
    cfg.validate();
    if (q_list.empty()) fail("schema-error", "q list is empty");
    for (int q : q_list)
        if (q < 1) fail("schema-error", "q values must be at least 1");
    const int qmax = *std::max_element(q_list.begin(), q_list.end());
    std::vector<Eigenspace> es = eigenspaces(cfg.observable);
    const int C = static_cast<int>(cfg.spec.channels.size());

    // times[r][p]: collapse time of particle p in composite realization r.
    std::vector<std::vector<double>> times(cfg.R);
    int failed = 0;
    ordered_blocks<std::vector<double>>(
        cfg.R, 64,
        [&](int r) {
            std::vector<double> out;
            std::uint64_t comp = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(r));
            for (int p = 0; p < qmax; ++p) {
                std::uint64_t seed = derive_seed(comp, static_cast<std::uint64_t>(p));
                NoisePath noise = sample_noise_path(cfg.grid, C, seed);
                Potential pot(cfg.spec, cfg.grid, noise);
                try {
                    DysonResult res = solve_nonlocal_dyson(pot, cfg.psi0, cfg.dyson);
                    out.push_back(collapse_time(transformed_states(pot, res.traj.states), cfg.grid, es, cfg.p_c));
                } catch (const Error& e) {
                    warn_once(std::string(e.what()) + " (seed " + std::to_string(seed) + ")");
                    out.push_back(std::numeric_limits<double>::quiet_NaN());
                }
            }
            return out;
        },
        [&](int r, const std::vector<double>& v) {
            for (double x : v)
                if (std::isnan(x)) ++failed;
            times[r] = v;
        });
    abort_if_too_many_failures(failed, cfg.R * qmax);

    HartreeFockReport rep;
    rep.R = cfg.R;
    std::vector<int> qs = q_list;
    std::sort(qs.begin(), qs.end());
    qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
    auto order_stat = [](const std::vector<double>& v, long i) {
        i = std::clamp<long>(i, 0, static_cast<long>(v.size()) - 1);
        return v[i];
    };
    for (int q : qs) {
        std::vector<double> comp;
        long unresolved = 0;
        for (const auto& v : times) {
            double m = kUnresolved;
            bool bad = false;
            for (int p = 0; p < q; ++p) {
                if (std::isnan(v[p])) bad = true;
                else m = std::min(m, v[p]);
            }
            if (bad && m == kUnresolved) continue;
            if (m == kUnresolved) ++unresolved;
            comp.push_back(m);
        }
        std::sort(comp.begin(), comp.end());
        const long N = static_cast<long>(comp.size());
        HartreeFockRow row;
        row.q = q;
        row.unresolved = unresolved;
        row.median = order_stat(comp, (N - 1) / 2);
        double half = 0.5 * kZ99 * std::sqrt(static_cast<double>(N));
        row.ci_lo = order_stat(comp, static_cast<long>(std::floor(0.5 * N - half)) - 1);
        row.ci_hi = order_stat(comp, static_cast<long>(std::ceil(0.5 * N + half)));
        rep.rows.push_back(row);
        if (q == 1) rep.single_particle_median = row.median;
    }
    rep.monotone = true;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        if (!std::isfinite(rep.rows[i].median)) rep.monotone = false;
        if (i > 0 && !(rep.rows[i].median <= rep.rows[i - 1].ci_hi)) rep.monotone = false;
    }
    return rep;
}

}  // namespace collapse
