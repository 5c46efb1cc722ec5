#include "collapse/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "collapse/error.hpp"
#include "collapse/parallel.hpp"
#include "collapse/stats.hpp"

namespace collapse {

namespace {

const cplx I(0.0, 1.0);

struct IdName {
    PairingId id;
    const char* name;
    const char* description;
};

const IdName kIds[] = {
    {PairingId::MeanDyson, "MEAN-DYSON", "mean of the second-order Dyson derivative, adjacent pairing"},
    {PairingId::KetBra, "KET-BRA", "pairing of V(t, zeta1) with the bra"},
    {PairingId::A1, "A1", "d/dt S psi, term (a1)"},
    {PairingId::A2Plus, "A2PLUS", "d/dt S psi, terms (a2) + (a22)"},
    {PairingId::A3, "A3", "d/dt S psi, term (a3)"},
    {PairingId::B2, "B2", "|d/dt S psi)(psi|"},
    {PairingId::B3, "B3", "|d/dt psi)(S psi|"},
    {PairingId::D1, "D1", "|d/dt S psi)(S psi|"},
    {PairingId::C1, "C1", "d/dt S^2"},
};

}  // namespace

std::string to_string(PairingId id)
{
    for (const auto& e : kIds)
        if (e.id == id) return e.name;
    return "?";
}

PairingId pairing_id_from(const std::string& s)
{
    for (const auto& e : kIds)
        if (s == e.name) return e.id;
    fail("schema-error", "unknown pairing identity '" + s + "'");
}

const std::vector<PairingId>& all_pairing_ids()
{
    static const std::vector<PairingId> ids = {PairingId::MeanDyson, PairingId::KetBra, PairingId::A1,
                                               PairingId::A2Plus,    PairingId::A3,     PairingId::B2,
                                               PairingId::B3,        PairingId::D1,     PairingId::C1};
    return ids;
}

std::string pairing_description(PairingId id)
{
    for (const auto& e : kIds)
        if (e.id == id) return e.description;
    return "";
}

namespace {

enum class Region { AbsNuAbove, NuBelowZeta, NuBelowMinusZeta, NuBetweenMinusZetaZeta };

// int dzeta int_region dnu f(zeta, nu) over the support |zeta|, |nu| <= ell/2.
// AbsNuAbove carries the sign eps(nu).
cplx double_integral(const KernelProfile& k, Region r, const std::function<cplx(double, double)>& f)
{
    const double L = 0.5 * k.ell;
    auto inner = [&](double z) -> cplx {
        auto g = [&](double nu) { return f(z, nu); };
        switch (r) {
        case Region::AbsNuAbove: {
            double a = std::abs(z);
            return integrate_1d(g, a, L, {}) - integrate_1d(g, -L, -a, {});
        }
        case Region::NuBelowZeta:
            return integrate_1d(g, -L, std::min(z, L), {0.0});
        case Region::NuBelowMinusZeta:
            return integrate_1d(g, -L, std::min(-z, L), {0.0});
        case Region::NuBetweenMinusZetaZeta:
            return integrate_1d(g, -z, z, {0.0});
        }
        return 0.0;
    };
    return integrate_1d_checked(inner, -L, L, zeta_breaks(k));
}

enum class Structure { N2Psi, Sandwich, N2 };

Structure structure_of(PairingId id)
{
    switch (id) {
    case PairingId::KetBra:
    case PairingId::B2:
    case PairingId::B3:
    case PairingId::D1: return Structure::Sandwich;
    case PairingId::C1: return Structure::N2;
    default: return Structure::N2Psi;
    }
}

GeneralOperator structure_matrix(Structure s, const GeneralOperator& N, const StateVector& psi0)
{
    switch (s) {
    case Structure::N2Psi: return N.adjoint() * N * psi0;
    case Structure::Sandwich: {
        StateVector v = N * psi0;
        return v * v.adjoint();
    }
    case Structure::N2: return N.adjoint() * N;
    }
    return {};
}

}  // namespace

cplx pairing_coefficient(PairingId id, const KernelProfile& k)
{
    k.validate();
    auto D = [&](double x) { return k.value(x); };
    switch (id) {
    case PairingId::MeanDyson:
        return -4.0 * double_integral(k, Region::NuBelowZeta, [&](double z, double nu) { return D(2 * z) * D(-2 * nu); });
    case PairingId::KetBra:
        return 4.0 * double_integral(k, Region::NuBelowMinusZeta,
                                     [&](double z, double nu) { return D(2 * z) * std::conj(D(-2 * nu)); });
    case PairingId::A1:
        return -4.0 * double_integral(k, Region::AbsNuAbove,
                                      [&](double z, double nu) { return std::conj(D(2 * z)) * D(-2 * nu); });
    case PairingId::A2Plus:
        return 4.0 * double_integral(k, Region::NuBetweenMinusZetaZeta,
                                     [&](double z, double nu) { return D(2 * z) * D(-2 * nu); });
    case PairingId::A3:
        return 4.0 * double_integral(k, Region::NuBetweenMinusZetaZeta,
                                     [&](double z, double nu) { return D(2 * nu) * D(-2 * z); });
    case PairingId::B2:
        return -4.0 * double_integral(k, Region::NuBelowMinusZeta, [&](double z, double nu) {
            return (D(2 * z) - D(-2 * z)) * std::conj(D(-2 * nu));
        });
    case PairingId::B3:
        return 4.0 * double_integral(k, Region::AbsNuAbove,
                                     [&](double z, double nu) { return D(2 * z) * std::conj(D(-2 * nu)); });
    case PairingId::D1:
        return 4.0 * double_integral(k, Region::AbsNuAbove,
                                     [&](double z, double nu) { return (D(2 * z) - D(-2 * z)) * D(-2 * nu); });
    case PairingId::C1:
        return 4.0 * double_integral(k, Region::AbsNuAbove,
                                     [&](double z, double nu) { return D(-2 * nu) * (D(2 * z) - D(-2 * z)); });
    }
    return 0.0;
}

GeneralOperator pairing_analytic(PairingId id, const TemporalModelSpec& spec, const StateVector& psi0)
{
    Structure s = structure_of(id);
    const int d = spec.dim;
    GeneralOperator out = s == Structure::N2Psi ? GeneralOperator::Zero(d, 1) : GeneralOperator::Zero(d, d);
    for (const auto& ch : spec.channels) {
        cplx c = pairing_coefficient(id, ch.kernel);
        if (c != 0.0) out += c * structure_matrix(s, ch.N.mat(), psi0);
    }
    return out;
}

namespace {

void require_plateau(const PairingConfig& cfg, int k, int K)
{
    if (k < 0) fail("grid-misalignment", "pairing time is not a grid node");
    if (k - K < 0 || k + K > cfg.grid.n - 1) fail("insufficient-window", "pairing time lies within ell of the grid ends");
    double ell = cfg.spec.ell_max();
    for (double s : {cfg.t - ell, cfg.t, cfg.t + ell})
        if (std::abs(cfg.spec.window(s) - 1.0) > 0.0)
            fail("insufficient-window", "envelope is not 1 within ell of the pairing time");
}

// Single-realization value of the requested expression at node k.
GeneralOperator expression_sample(Expression expr, PairingId id, const Potential& pot, const StateVector& psi0, int k,
                                  double theta0, const DysonOptions& opts)
{
    const int d = static_cast<int>(psi0.size());
    const double h = pot.grid().h;
    const int K = pot.support();
    const int n = pot.grid().n;
    if (expr == Expression::MeanState || expr == Expression::Projector) {
        DysonResult r = solve_nonlocal_dyson(pot, psi0, opts);
        const StateVector& p = r.traj.states[k];
        if (expr == Expression::MeanState) return p;
        return p * p.adjoint();
    }
    if (pot.channels() == 0) {
        return structure_of(id) == Structure::N2Psi ? GeneralOperator::Zero(d, 1) : GeneralOperator::Zero(d, d);
    }
    auto V = [&](int i, int j) { return pot.eval(i, j); };
    auto lo = std::max(0, k - K), hi = std::min(n - 1, k + K);
    GeneralOperator X1 = GeneralOperator::Zero(d, d);
    GeneralOperator Sdot = GeneralOperator::Zero(d, d);
    for (int j = lo; j <= hi; ++j) {
        GeneralOperator a = V(k, j);
        X1 += h * a;
        Sdot += h * (a - V(j, k));
    }
    auto F = [&]() { return first_order_dyson(pot, psi0); };
    auto Sraw = [&]() { return (SBuilder(pot, Propagation::Identity, theta0).raw(k) * (-I)).eval(); };
    switch (id) {
    case PairingId::MeanDyson: {
        auto f = F();
        StateVector acc = StateVector::Zero(d);
        for (int j = lo; j <= hi; ++j) acc += h * (V(k, j) * f[j]);
        return -I * acc;
    }
    case PairingId::KetBra: {
        auto f = F();
        StateVector a = -I * (X1 * psi0);
        return a * f[k].adjoint();
    }
    case PairingId::A1:
        return X1.adjoint() * Sraw() * psi0;
    case PairingId::A2Plus: {
        auto f = F();
        StateVector acc = StateVector::Zero(d);
        for (int j = lo; j <= hi; ++j) acc += h * (V(k, j) * f[j] - V(j, k) * f[k]);
        return I * acc;
    }
    case PairingId::A3: {
        int m0 = std::max(0, k - 2 * K), m1 = std::min(n - 1, k + 2 * K);
        std::vector<GeneralOperator> G(m1 - m0 + 1, GeneralOperator::Zero(d, d));
        for (int m = m0; m <= m1; ++m)
            for (int j = std::max(0, m - K); j <= std::min(n - 1, m + K); ++j) G[m - m0] += h * V(m, j).adjoint();
        std::vector<GeneralOperator> C(m1 - m0 + 1, GeneralOperator::Zero(d, d));
        for (int m = k + 1; m <= m1; ++m) C[m - m0] = C[m - 1 - m0] + 0.5 * h * (G[m - 1 - m0] + G[m - m0]);
        for (int m = k - 1; m >= m0; --m) C[m - m0] = C[m + 1 - m0] - 0.5 * h * (G[m - m0] + G[m + 1 - m0]);
        StateVector acc = StateVector::Zero(d);
        for (int j = lo; j <= hi; ++j) acc += h * (C[j - m0] * (V(j, k) * psi0));
        return acc;
    }
    case PairingId::B2: {
        auto f = F();
        StateVector a = I * (Sdot * psi0);
        return a * f[k].adjoint();
    }
    case PairingId::B3: {
        StateVector a = X1 * psi0;
        StateVector b = Sraw() * psi0;
        return -a * b.adjoint();
    }
    case PairingId::D1: {
        StateVector a = Sdot * psi0;
        StateVector b = Sraw() * psi0;
        return a * b.adjoint();
    }
    case PairingId::C1:
        return -Sraw() * Sdot;
    }
    return {};
}

}  // namespace

MCEstimate mc_statistical_mean(Expression expr, const PairingConfig& cfg, PairingId id, double theta0)
{
    cfg.spec.validate();
    require_same_dim(cfg.psi0.size(), cfg.spec.dim, "mc_statistical_mean");
    if (cfg.R < 2) fail("insufficient-samples", "statistical mean needs at least 2 realizations");
    const int k = cfg.grid.index_of(cfg.t);
    const int C = static_cast<int>(cfg.spec.channels.size());
    int K = 0;
    for (const auto& ch : cfg.spec.channels) K = std::max(K, ch.kernel.support_lag(cfg.grid.h));
    if (expr == Expression::Pairing) require_plateau(cfg, k, K);
    else if (k < 0) fail("grid-misalignment", "evaluation time is not a grid node");

    MatrixMoments mom;
    ordered_blocks<GeneralOperator>(
        cfg.R, 256,
        [&](int r) {
            std::uint64_t seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(r));
            try {
                NoisePath noise = sample_noise_path(cfg.grid, C, seed);
                Potential pot(cfg.spec, cfg.grid, noise);
                return expression_sample(expr, id, pot, cfg.psi0, k, theta0, DysonOptions{});
            } catch (const Error& e) {
                std::ostringstream os;
                os << e.what() << " (seed " << seed << ")";
                throw Error(e.code(), os.str());
            }
        },
        [&](int, const GeneralOperator& x) {
            if (mom.count() == 0) mom = MatrixMoments(static_cast<int>(x.rows()), static_cast<int>(x.cols()));
            mom.add(x);
        });
    return {mom.mean(), mom.standard_error(), cfg.R};
}

OracleReport verify_pairing_identity(PairingId id, const PairingConfig& cfg)
{
    OracleReport rep;
    rep.id = id;
    rep.description = pairing_description(id);
    rep.R = cfg.R;
    rep.base_seed = cfg.base_seed;
    rep.digest = cfg.digest;
    for (const auto& ch : cfg.spec.channels) rep.coefficients.push_back(pairing_coefficient(id, ch.kernel));
    rep.analytic = pairing_analytic(id, cfg.spec, cfg.psi0);

    auto judge = [&](const MCEstimate& est, double& z, double& diff, double& se) {
        ZScore zs = entrywise_z(est.mean, est.se, rep.analytic);
        z = zs.z;
        diff = zs.max_abs_diff;
        se = zs.max_se;
        return zs.z <= 5.0;
    };

    MCEstimate est = mc_statistical_mean(Expression::Pairing, cfg, id, kTheta0);
    rep.mc = est.mean;
    rep.se = est.se;
    rep.pass = judge(est, rep.z_score, rep.max_abs_diff, rep.max_se);
    if (id == PairingId::B3) {
        for (double th : {0.0, 0.5, 1.0}) {
            MCEstimate e = th == kTheta0 ? est : mc_statistical_mean(Expression::Pairing, cfg, id, th);
            double z, diff, se;
            bool ok = judge(e, z, diff, se);
            rep.theta_scan.push_back({th, z, ok});
        }
    }
    return rep;
}

ConjugacyCheck conjugate_structure_check(const TemporalModelSpec& spec, const StateVector& psi0)
{
    ConjugacyCheck out;
    for (const auto& ch : spec.channels) {
        GeneralOperator s2 = structure_matrix(structure_of(PairingId::B2), ch.N.mat(), psi0);
        GeneralOperator s3 = structure_matrix(structure_of(PairingId::B3), ch.N.mat(), psi0);
        out.b2_b3_structure_residual =
            std::max({out.b2_b3_structure_residual, max_abs(s2 - s3.adjoint()), hermiticity_residual(s2)});
    }
    GeneralOperator d1 = pairing_analytic(PairingId::D1, spec, psi0);
    GeneralOperator c1 = pairing_analytic(PairingId::C1, spec, psi0);
    cplx lhs = d1.trace();
    cplx rhs = psi0.dot(c1 * psi0);
    out.d1_c1_trace_residual = std::abs(lhs - rhs);
    double scale = std::max(1e-300, std::max(std::abs(lhs), std::abs(rhs)));
    out.pass = out.b2_b3_structure_residual <= 1e-12 && out.d1_c1_trace_residual <= 1e-10 * std::max(1.0, scale);
    return out;
}

namespace {

// Deterministic first-order phase Phi_k = sum_s alpha_{k,s} W_s for one
// diagonal channel, and its two quadratic sums needed for Gaussian means.
struct PhaseSums {
    std::vector<cplx> sum_sq;  // sum_s alpha^2
    std::vector<double> sum_abs;  // sum_s |alpha|^2
};

PhaseSums phase_sums(const KernelProfile& k, const Envelope& env, const TimeGrid& grid)
{
    const int n = grid.n, H = grid.half_count(), K = k.support_lag(grid.h);
    const double h = grid.h;
    std::vector<cplx> kern = k.sample(h);
    std::vector<double> w(H);
    for (int s = 0; s < H; ++s) w[s] = env(grid.half(s));
    auto beta = [&](int m, int s) -> cplx {
        int lag = s - 2 * m;  // j - m with s = m + j
        if (lag < -K || lag > K) return 0.0;
        return h * kern[lag + K] * w[s];
    };
    std::vector<cplx> alpha(H, 0.0);
    PhaseSums ps;
    ps.sum_sq.assign(n, 0.0);
    ps.sum_abs.assign(n, 0.0);
    for (int i = 1; i < n; ++i) {
        for (int s = std::max(0, 2 * (i - 1) - K); s <= std::min(H - 1, 2 * i + K); ++s)
            alpha[s] += 0.5 * h * (beta(i - 1, s) + beta(i, s));
        cplx sq = 0.0;
        double ab = 0.0;
        for (int s = 0; s < H; ++s) {
            sq += alpha[s] * alpha[s];
            ab += std::norm(alpha[s]);
        }
        ps.sum_sq[i] = sq;
        ps.sum_abs[i] = ab;
    }
    return ps;
}

}  // namespace

TemporalComparison compare_temporal_ensemble(const TemporalModelSpec& spec, const StateVector& psi0,
                                             const TimeGrid& grid, int R, std::uint64_t base_seed,
                                             bool control_variate, bool use_commutator_ip,
                                             const DysonOptions& opts)
{
    spec.validate();
    spec.require_contraction();
    require_same_dim(psi0.size(), spec.dim, "compare_temporal_ensemble");
    if (R < 2) fail("insufficient-samples", "ensemble comparison needs at least 2 realizations");
    const int n = grid.n, d = spec.dim, C = static_cast<int>(spec.channels.size());
    bool cv = control_variate;
    std::vector<double> nvals;
    if (cv) {
        const GeneralOperator& N = spec.channels.front().N.mat();
        if (C != 1 || max_abs(N - GeneralOperator(N.diagonal().asDiagonal())) > 0.0) {
            warn_once("control variate needs one channel with diagonal N; running without it");
            cv = false;
        } else {
            for (int a = 0; a < d; ++a) nvals.push_back(N(a, a).real());
        }
    }
    PhaseSums ps;
    if (cv) ps = phase_sums(spec.channels.front().kernel, spec.window, grid);

    // Control-variate density phi phi^dagger with phi_a = psi0_a exp(-i n_a Phi).
    auto cv_density = [&](const std::vector<cplx>& phi, int k) {
        GeneralOperator Y(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                Y(a, b) = psi0(a) * std::conj(psi0(b)) *
                          std::exp(-I * nvals[a] * phi[k] + I * nvals[b] * std::conj(phi[k]));
        return Y;
    };
    auto cv_mean = [&](int k) {
        GeneralOperator Y(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double na = nvals[a], nb = nvals[b];
                cplx e = -na * na * ps.sum_sq[k] + 2.0 * na * nb * ps.sum_abs[k] - nb * nb * std::conj(ps.sum_sq[k]);
                Y(a, b) = psi0(a) * std::conj(psi0(b)) * std::exp(e / grid.h);
            }
        return Y;
    };

    std::vector<MatrixMoments> mom(n, MatrixMoments(d, d));
    ordered_blocks<std::vector<GeneralOperator>>(
        R, 256,
        [&](int r) {
            std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(r));
            try {
                NoisePath noise = sample_noise_path(grid, C, seed);
                Potential pot(spec, grid, noise);
                DysonResult res = solve_nonlocal_dyson(pot, psi0, opts);
                std::vector<StateVector> st =
                    use_commutator_ip ? transformed_states(pot, res.traj.states) : res.traj.states;
                std::vector<GeneralOperator> out(n);
                std::vector<cplx> phi;
                if (cv) {
                    phi.assign(n, 0.0);
                    auto u = [&](int m) {
                        cplx s = 0.0;
                        for (int j = m - pot.support(); j <= m + pot.support(); ++j) s += pot.coeff(0, m, j);
                        return grid.h * s;
                    };
                    cplx prev = u(0);
                    for (int i = 1; i < n; ++i) {
                        cplx cur = u(i);
                        phi[i] = phi[i - 1] + 0.5 * grid.h * (prev + cur);
                        prev = cur;
                    }
                }
                for (int i = 0; i < n; ++i) {
                    out[i] = st[i] * st[i].adjoint();
                    if (cv) out[i] -= cv_density(phi, i);
                }
                return out;
            } catch (const Error& e) {
                std::ostringstream os;
                os << e.what() << " (seed " << seed << ")";
                throw Error(e.code(), os.str());
            }
        },
        [&](int, const std::vector<GeneralOperator>& x) {
            for (int i = 0; i < n; ++i) mom[i].add(x[i]);
        });

    TemporalComparison out;
    out.lindblad = integrate_lindblad_temporal(DensityMatrix::pure(psi0), spec, grid, true);
    for (int i = 0; i < n; ++i) {
        GeneralOperator m = mom[i].mean();
        if (cv) m += cv_mean(i);
        GeneralOperator se = mom[i].standard_error();
        double f = std::sqrt(se.real().squaredNorm() + se.imag().squaredNorm());
        double dist = trace_distance(m, out.lindblad[i]);
        out.mc.push_back(m);
        out.floor.push_back(f);
        out.distance.push_back(dist);
        if (dist > out.max_distance) {
            out.max_distance = dist;
            out.argmax = i;
        }
        out.max_floor = std::max(out.max_floor, f);
    }
    return out;
}

ScalingReport nonadjacent_scaling_probe(const std::vector<double>& ell_list, const std::vector<double>& g_list,
                                        const ScalingProbeConfig& cfg)
{
    if (ell_list.size() < 3 || g_list.size() < 3)
        fail("schema-error", "scaling probe needs at least 3 values each of ell and g");
    auto decade = [](const std::vector<double>& v) {
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *lo > 0.0 && *hi / *lo >= 10.0 - 1e-9;
    };
    if (!decade(g_list)) fail("schema-error", "g values must be positive and span a decade");
    if (*std::min_element(ell_list.begin(), ell_list.end()) <= 0.0) fail("schema-error", "ell values must be positive");

    ScalingReport rep;
    std::vector<double> ells = ell_list;
    std::sort(ells.begin(), ells.end());
    std::vector<double> gs = g_list;
    std::sort(gs.begin(), gs.end());
    rep.ells = ells;
    std::vector<std::vector<double>> table(ells.size(), std::vector<double>(gs.size()));
    long required_R = 0;
    for (std::size_t a = 0; a < ells.size(); ++a) {
        for (std::size_t b = 0; b < gs.size(); ++b) {
            KernelProfile k;
            k.form = cfg.form;
            k.ell = ells[a];
            k.g = gs[b];
            TemporalModelSpec spec = make_temporal_spec(static_cast<int>(cfg.psi0.size()), {{cfg.N, k}}, cfg.t0, cfg.t1);
            TimeGrid grid = TimeGrid::make(cfg.t0, cfg.t1, ells[a] / cfg.lags_per_ell);
            std::uint64_t seed = derive_seed(cfg.base_seed, a * 1000 + b);
            TemporalComparison cmp = compare_temporal_ensemble(spec, cfg.psi0, grid, cfg.R, seed, cfg.control_variate);
            ScalingPoint p{ells[a], gs[b], cmp.max_distance, cmp.max_floor, cmp.max_floor * 5.0 > cmp.max_distance};
            if (p.underpowered) {
                double need = cfg.R * std::pow(5.0 * p.floor / std::max(p.residual, 1e-300), 2);
                required_R = std::max(required_R, static_cast<long>(std::ceil(need)));
            }
            rep.points.push_back(p);
            table[a][b] = p.residual;
        }
    }
    for (const auto& p : rep.points)
        if (p.floor >= p.residual) {
            std::ostringstream os;
            os << "statistical floor " << p.floor << " exceeds residual " << p.residual << " at ell=" << p.ell
               << " g=" << p.g << "; about R=" << required_R << " realizations needed";
            fail("underpowered", os.str());
        }
    bool slopes_ok = true;
    for (std::size_t a = 0; a < ells.size(); ++a) {
        std::vector<double> x, y;
        for (std::size_t b = 0; b < gs.size(); ++b) {
            x.push_back(std::log(gs[b]));
            y.push_back(std::log(table[a][b]));
        }
        auto [slope, icpt] = linear_fit(x, y);
        double rms = 0.0;
        for (std::size_t b = 0; b < x.size(); ++b) rms += std::pow(y[b] - (slope * x[b] + icpt), 2);
        rep.slopes.push_back(slope);
        rep.fit_residuals.push_back(std::sqrt(rms / x.size()));
        slopes_ok = slopes_ok && std::abs(slope - 2.0) <= 0.3;
    }
    rep.ell_ordering = true;
    for (std::size_t b = 0; b < gs.size(); ++b)
        for (std::size_t a = 1; a < ells.size(); ++a)
            if (!(table[a - 1][b] < table[a][b])) rep.ell_ordering = false;
    rep.pass = slopes_ok;
    return rep;
}

}  // namespace collapse
