#include "collapse/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

#include "collapse/error.hpp"

namespace collapse {

namespace {

const cplx I(0.0, 1.0);

double smoothstep(double x)
{
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

bool at_edge(double a, double ell) { return std::abs(a - ell) <= 1e-9 * ell; }

}  // namespace

std::string to_string(KernelForm f)
{
    switch (f) {
    case KernelForm::Box: return "box";
    case KernelForm::Triangle: return "triangle";
    case KernelForm::GaussTruncated: return "gauss-truncated";
    case KernelForm::Modulated: return "modulated";
    }
    return "box";
}

KernelForm kernel_form_from(const std::string& s)
{
    if (s == "box") return KernelForm::Box;
    if (s == "triangle") return KernelForm::Triangle;
    if (s == "gauss-truncated") return KernelForm::GaussTruncated;
    if (s == "modulated") return KernelForm::Modulated;
    fail("schema-error", "unknown kernel form '" + s + "'");
}

void KernelProfile::validate() const
{
    if (!(ell > 0.0) || !std::isfinite(ell)) fail("schema-error", "kernel ell must be positive");
    if (!(g >= 0.0) || !std::isfinite(g)) fail("schema-error", "kernel amplitude g must be non-negative");
    if (!std::isfinite(omega)) fail("schema-error", "kernel omega must be finite");
    if (base == KernelForm::Modulated) fail("schema-error", "modulated kernel needs a non-modulated base");
    // Delta(tau) + Delta(-tau) = 2 base(tau) cos(omega tau) must not change sign on the support.
    if (form == KernelForm::Modulated && std::abs(omega) * ell > M_PI / 2 + 1e-12)
        fail("schema-error", "modulated kernel needs |omega| ell <= pi/2");
}

double KernelProfile::base_value(double tau) const
{
    KernelForm f = form == KernelForm::Modulated ? base : form;
    double a = std::abs(tau);
    if (a > ell && !at_edge(a, ell)) return 0.0;
    switch (f) {
    case KernelForm::Box: {
        double v = g / (2.0 * ell);
        return at_edge(a, ell) ? 0.5 * v : v;
    }
    case KernelForm::Triangle:
        return at_edge(a, ell) ? 0.0 : g * (1.0 - a / ell) / ell;
    case KernelForm::GaussTruncated: {
        double s = ell / 3.0;
        double z = std::sqrt(2.0 * M_PI) * s * std::erf(3.0 / std::sqrt(2.0));
        double v = g * std::exp(-0.5 * a * a / (s * s)) / z;
        return at_edge(a, ell) ? 0.5 * v : v;
    }
    default:
        return 0.0;
    }
}

cplx KernelProfile::value(double tau) const
{
    double b = base_value(tau);
    if (form != KernelForm::Modulated || omega == 0.0) return b;
    return b * std::polar(1.0, omega * tau);
}

double KernelProfile::max_abs() const
{
    KernelForm f = form == KernelForm::Modulated ? base : form;
    switch (f) {
    case KernelForm::Box: return g / (2.0 * ell);
    case KernelForm::Triangle: return g / ell;
    case KernelForm::GaussTruncated: return base_value(0.0);
    default: return 0.0;
    }
}

int KernelProfile::support_lag(double h) const
{
    return static_cast<int>(std::floor(ell / h + 1e-9));
}

std::vector<cplx> KernelProfile::sample(double h) const
{
    int K = support_lag(h);
    std::vector<cplx> out(2 * K + 1);
    for (int m = -K; m <= K; ++m) out[m + K] = value(m * h);
    return out;
}

double Envelope::operator()(double s) const
{
    if (!enabled) return 1.0;
    double r = 2.0 * ell;
    double up = smoothstep((s - (t0 + r)) / r);
    double down = smoothstep(((t1 - r) - s) / r);
    return std::min(up, down);
}

std::vector<double> Envelope::knots() const
{
    if (!enabled) return {};
    double r = 2.0 * ell;
    return {t0 + r, t0 + 2 * r, t1 - 2 * r, t1 - r};
}

void TemporalModelSpec::validate() const
{
    if (dim < 1 || dim > kMaxDim) fail("schema-error", "model dimension out of range");
    for (std::size_t c = 0; c < channels.size(); ++c) {
        require_same_dim(channels[c].N.dim(), dim, "temporal channel");
        channels[c].kernel.validate();
    }
    if (H0) require_same_dim(H0->dim(), dim, "H0");
    if (window.enabled && window.t1 - window.t0 < 8.0 * window.ell - 1e-12)
        fail("schema-error", "time span shorter than the switch-on and switch-off ramps (8 ell)");
}

double TemporalModelSpec::ell_max() const
{
    double e = 0.0;
    for (const auto& c : channels) e = std::max(e, c.kernel.ell);
    return e;
}

double TemporalModelSpec::contraction_bound() const
{
    double v = 0.0;
    for (const auto& c : channels) {
        Eigen::SelfAdjointEigenSolver<GeneralOperator> es(c.N.mat(), Eigen::EigenvaluesOnly);
        v += c.kernel.max_abs() * es.eigenvalues().cwiseAbs().maxCoeff();
    }
    return v * 2.0 * ell_max() * (window.t1 - window.t0);
}

void TemporalModelSpec::require_contraction() const
{
    double b = contraction_bound();
    if (!(b < 0.5)) {
        std::ostringstream os;
        os << "|V| 2 ell T = " << b << " is not below 0.5";
        fail("contraction-violated", os.str());
    }
}

TemporalModelSpec make_temporal_spec(int dim, std::vector<Channel> channels, double t0, double t1, bool windowed)
{
    TemporalModelSpec s;
    s.dim = dim;
    s.channels = std::move(channels);
    s.window.t0 = t0;
    s.window.t1 = t1;
    s.window.ell = s.ell_max();
    s.window.enabled = windowed;
    s.validate();
    return s;
}

Potential::Potential(const TemporalModelSpec& spec, const TimeGrid& grid, const NoisePath& noise)
    : grid_(grid), W_(&noise.W)
{
    if (noise.grid.n != grid.n || std::abs(noise.grid.h - grid.h) > 1e-12 * grid.h ||
        std::abs(noise.grid.t0 - grid.t0) > 1e-12 * std::max(1.0, std::abs(grid.t0)))
        fail("grid-misalignment", "noise path grid does not match the state grid");
    if (noise.channel_count < static_cast<int>(spec.channels.size()))
        fail("dim-mismatch", "noise path has fewer channels than the model");
    for (const auto& ch : spec.channels) {
        N_.push_back(ch.N.mat());
        kern_.push_back(ch.kernel.sample(grid.h));
        Kc_.push_back(ch.kernel.support_lag(grid.h));
        K_ = std::max(K_, Kc_.back());
    }
    wind_.resize(grid.half_count());
    for (int s = 0; s < grid.half_count(); ++s) wind_[s] = spec.window(grid.half(s));
}

GeneralOperator Potential::eval(int i, int j) const
{
    int d = N_.empty() ? 0 : static_cast<int>(N_.front().rows());
    GeneralOperator V = GeneralOperator::Zero(d, d);
    for (int c = 0; c < channels(); ++c) {
        cplx k = coeff(c, i, j);
        if (k != 0.0) V += k * N_[c];
    }
    return V;
}

GeneralOperator eval_potential(const TemporalModelSpec& spec, const NoisePath& noise, double ti, double tj)
{
    const TimeGrid& g = noise.grid;
    int i = g.index_of(ti), j = g.index_of(tj);
    if (i < 0 || j < 0) fail("grid-misalignment", "potential arguments are not grid nodes");
    Potential pot(spec, g, noise);
    return pot.eval(i, j);
}

namespace {

// Per-trajectory tables for the Dyson sweeps: coefficient rows and operator
// products kept in flat arrays because d is tiny and these loops dominate.
struct DysonWork {
    const Potential& pot;
    int n, d, C, K;
    double h;
    std::vector<std::vector<cplx>> coef;  // coef[c][m*(2K+1) + lag+K]
    std::vector<cplx> Nflat;              // N_c row-major, C*d*d

    explicit DysonWork(const Potential& p) : pot(p)
    {
        n = p.grid().n;
        C = p.channels();
        K = p.support();
        h = p.grid().h;
        d = C ? static_cast<int>(p.N(0).rows()) : 0;
        coef.assign(C, std::vector<cplx>(static_cast<std::size_t>(n) * (2 * K + 1)));
        for (int c = 0; c < C; ++c)
            for (int m = 0; m < n; ++m)
                for (int l = -K; l <= K; ++l) coef[c][m * (2 * K + 1) + l + K] = p.coeff(c, m, m + l);
        Nflat.resize(static_cast<std::size_t>(C) * d * d);
        for (int c = 0; c < C; ++c)
            for (int r = 0; r < d; ++r)
                for (int q = 0; q < d; ++q) Nflat[(c * d + r) * d + q] = p.N(c)(r, q);
    }

    // out = h sum_c N_c sum_j coef(c,m,j) psi_j ; psi is d x n column-major.
    void f(const cplx* psi, int m, cplx* out, cplx* acc) const
    {
        std::fill(out, out + d, cplx(0.0));
        int jlo = std::max(0, m - K), jhi = std::min(n - 1, m + K);
        for (int c = 0; c < C; ++c) {
            std::fill(acc, acc + d, cplx(0.0));
            const cplx* row = &coef[c][m * (2 * K + 1) + K];
            for (int j = jlo; j <= jhi; ++j) {
                cplx k = row[j - m];
                if (k == 0.0) continue;
                const cplx* pj = psi + static_cast<std::size_t>(j) * d;
                for (int r = 0; r < d; ++r) acc[r] += k * pj[r];
            }
            const cplx* Nc = &Nflat[static_cast<std::size_t>(c) * d * d];
            for (int r = 0; r < d; ++r) {
                cplx s = 0.0;
                for (int q = 0; q < d; ++q) s += Nc[r * d + q] * acc[q];
                out[r] += h * s;
            }
        }
    }

    // Correction of f_m when only psi_m changed by delta.
    void f_diag(int m, const cplx* delta, cplx* out) const
    {
        for (int c = 0; c < C; ++c) {
            cplx k = coef[c][m * (2 * K + 1) + K];
            if (k == 0.0) continue;
            const cplx* Nc = &Nflat[static_cast<std::size_t>(c) * d * d];
            for (int r = 0; r < d; ++r) {
                cplx s = 0.0;
                for (int q = 0; q < d; ++q) s += Nc[r * d + q] * delta[q];
                out[r] += h * k * s;
            }
        }
    }
};

// Sparse LU of the whole discrete equation: psi_0 fixed, then
// psi_i - psi_{i-1} + i (h/2)(f_{i-1} + f_i) = 0.
void solve_direct(const DysonWork& wk, const StateVector& psi0, Eigen::MatrixXcd& P)
{
    const int n = wk.n, d = wk.d, K = wk.K;
    const cplx ih2(0.0, 0.5 * wk.h);
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(n) * d * (2 + 2 * (2 * K + 2) * d));
    auto add_f = [&](int row, int m, cplx w) {
        for (int c = 0; c < wk.C; ++c) {
            const cplx* Nc = &wk.Nflat[static_cast<std::size_t>(c) * d * d];
            for (int j = std::max(0, m - K); j <= std::min(n - 1, m + K); ++j) {
                cplx k = wk.coef[c][m * (2 * K + 1) + j - m + K];
                if (k == 0.0) continue;
                for (int r = 0; r < d; ++r)
                    for (int q = 0; q < d; ++q)
                        if (Nc[r * d + q] != 0.0) trip.emplace_back(row + r, j * d + q, w * wk.h * k * Nc[r * d + q]);
            }
        }
    };
    for (int r = 0; r < d; ++r) trip.emplace_back(r, r, 1.0);
    for (int i = 1; i < n; ++i) {
        int row = i * d;
        for (int r = 0; r < d; ++r) {
            trip.emplace_back(row + r, row + r, 1.0);
            trip.emplace_back(row + r, row - d + r, -1.0);
        }
        add_f(row, i - 1, ih2);
        add_f(row, i, ih2);
    }
    Eigen::SparseMatrix<cplx> A(n * d, n * d);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) fail("dyson-divergence", "discrete Dyson system is singular");
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n * d);
    rhs.head(d) = psi0;
    Eigen::VectorXcd x = lu.solve(rhs);
    P = Eigen::Map<Eigen::MatrixXcd>(x.data(), d, n);
}

}  // namespace

DysonResult solve_nonlocal_dyson(const Potential& pot, const StateVector& psi0, const DysonOptions& opts)
{
    const int n = pot.grid().n;
    const int d = static_cast<int>(psi0.size());
    if (pot.channels() > 0) require_same_dim(pot.N(0).rows(), d, "solve_nonlocal_dyson");
    DysonResult res;
    res.traj.grid = pot.grid();

    Eigen::MatrixXcd P = psi0.replicate(1, n);
    if (pot.channels() == 0) {
        for (int i = 0; i < n; ++i) {
            res.traj.states.push_back(P.col(i));
            res.traj.norm_series.push_back(P.col(i).squaredNorm());
        }
        return res;
    }

    DysonWork wk(pot);
    const double h = wk.h;
    const int K = wk.K;
    std::vector<cplx> fa(d), fb(d), acc(d), delta(d);
    Eigen::MatrixXcd F(d, n);
    const double scale = std::max(1.0, psi0.cwiseAbs().maxCoeff());

    // Fills F with f_m for all m and returns the max-norm equation residual.
    auto residual = [&]() {
        for (int m = 0; m < n; ++m) wk.f(P.data(), m, F.col(m).data(), acc.data());
        Eigen::VectorXcd cum = Eigen::VectorXcd::Zero(d);
        double r = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i > 0) cum += 0.5 * h * (F.col(i - 1) + F.col(i));
            Eigen::VectorXcd target = psi0 - I * cum;
            r = std::max(r, (P.col(i) - target).cwiseAbs().maxCoeff());
        }
        return r;
    };

    if (opts.solver == DysonSolver::Direct) {
        solve_direct(wk, psi0, P);
        double r = residual();
        res.residuals.push_back(r);
        res.iterations = 1;
        if (!(r <= std::max(opts.tol, 1e-10) * scale)) {
            std::ostringstream os;
            os << "direct solve left residual " << r;
            fail("dyson-no-convergence", os.str());
        }
    }

    int rises = 0;
    for (int it = 1; opts.solver != DysonSolver::Direct && it <= opts.max_iter; ++it) {
        if (opts.solver == DysonSolver::FixedPoint) {
            if (it > 1) {
                Eigen::VectorXcd cum = Eigen::VectorXcd::Zero(d);
                for (int i = 1; i < n; ++i) {
                    cum += 0.5 * h * (F.col(i - 1) + F.col(i));
                    P.col(i) = psi0 - I * cum;
                }
            }
        } else {
            wk.f(P.data(), 0, fa.data(), acc.data());
            for (int i = 1; i < n; ++i) {
                if (it == 1)
                    for (int j = i; j <= std::min(n - 1, i + K); ++j) P.col(j) = P.col(i - 1);
                wk.f(P.data(), i, fb.data(), acc.data());
                for (int r = 0; r < d; ++r) {
                    cplx next = P(r, i - 1) - I * 0.5 * h * (fa[r] + fb[r]);
                    delta[r] = next - P(r, i);
                    P(r, i) = next;
                }
                wk.f_diag(i, delta.data(), fb.data());
                std::swap(fa, fb);
            }
        }
        double r = residual();
        res.residuals.push_back(r);
        res.iterations = it;
        if (!std::isfinite(r)) {
            std::ostringstream os;
            os << "non-finite residual after " << it << " iterations";
            fail("dyson-divergence", os.str());
        }
        if (r <= opts.tol * scale) break;
        if (it > 1 && r > res.residuals[it - 2]) {
            if (++rises >= 3) {
                std::ostringstream os;
                os << "residual grew over 3 successive iterations:";
                for (double x : res.residuals) os << " " << x;
                fail("dyson-divergence", os.str());
            }
        } else {
            rises = 0;
        }
        if (it == opts.max_iter) {
            std::ostringstream os;
            os << "residual " << r << " after " << it << " iterations";
            fail("dyson-no-convergence", os.str());
        }
    }
    res.traj.states.reserve(n);
    for (int i = 0; i < n; ++i) {
        res.traj.states.push_back(P.col(i));
        res.traj.norm_series.push_back(P.col(i).squaredNorm());
    }
    return res;
}

DysonResult solve_nonlocal_dyson(const TemporalModelSpec& spec, const NoisePath& noise, const TimeGrid& grid,
                                 const StateVector& psi0, const DysonOptions& opts)
{
    spec.validate();
    require_same_dim(psi0.size(), spec.dim, "solve_nonlocal_dyson");
    Potential pot(spec, grid, noise);
    DysonResult r = solve_nonlocal_dyson(pot, psi0, opts);
    r.traj.seed = noise.seed;
    return r;
}

std::vector<StateVector> first_order_dyson(const Potential& pot, const StateVector& psi0)
{
    const int n = pot.grid().n;
    const int d = static_cast<int>(psi0.size());
    std::vector<StateVector> out(n, StateVector::Zero(d));
    if (pot.channels() == 0) return out;
    DysonWork wk(pot);
    Eigen::MatrixXcd P = psi0.replicate(1, n);
    Eigen::MatrixXcd F(d, n);
    std::vector<cplx> acc(d);
    for (int m = 0; m < n; ++m) wk.f(P.data(), m, F.col(m).data(), acc.data());
    Eigen::VectorXcd cum = Eigen::VectorXcd::Zero(d);
    for (int i = 1; i < n; ++i) {
        cum += 0.5 * wk.h * (F.col(i - 1) + F.col(i));
        out[i] = -I * cum;
    }
    return out;
}

namespace {

void require_window(const Potential& pot, int node)
{
    int K = pot.support();
    if (node < 0 || node >= pot.grid().n) fail("grid-misalignment", "time is not a grid node");
    if (node < K || node > pot.grid().n - 1 - K)
        fail("insufficient-window", "time lies within ell of the grid ends");
}

double theta(int m, int k, double theta0) { return m == k ? theta0 : 1.0; }

}  // namespace

cplx commutator_inner_product(const TrajectoryRecord& psi, const TrajectoryRecord& phi, int node,
                              const Potential& pot, double theta0)
{
    require_window(pot, node);
    if (static_cast<int>(psi.states.size()) != pot.grid().n || static_cast<int>(phi.states.size()) != pot.grid().n)
        fail("grid-misalignment", "trajectory length differs from the grid");
    const int K = pot.support();
    const double h = pot.grid().h;
    const int C = pot.channels();
    cplx surface = 0.0;
    for (int m = node - K; m <= node; ++m) {
        for (int j = node; j <= m + K; ++j) {
            double wt = theta(m, node, theta0) * theta(j, node, theta0) * h * h;
            cplx a = 0.0;
            for (int c = 0; c < C; ++c) {
                cplx kf = pot.coeff(c, m, j), kb = pot.coeff(c, j, m);
                if (kf != 0.0) a += kf * psi.states[m].dot(pot.N(c) * phi.states[j]);
                if (kb != 0.0) a -= kb * psi.states[j].dot(pot.N(c) * phi.states[m]);
            }
            surface += wt * a;
        }
    }
    return psi.states[node].dot(phi.states[node]) + I * surface;
}

cplx commutator_inner_product(const TrajectoryRecord& psi, const TrajectoryRecord& phi, double t,
                              const TemporalModelSpec& spec, const NoisePath& noise)
{
    Potential pot(spec, psi.grid, noise);
    int node = psi.grid.index_of(t);
    if (node < 0) fail("grid-misalignment", "time is not a grid node");
    return commutator_inner_product(psi, phi, node, pot);
}

SBuilder::SBuilder(const Potential& pot, Propagation prop, double theta0, const DysonOptions& opts)
    : pot_(pot), prop_(prop), theta0_(theta0)
{
    if (prop_ != Propagation::Dyson || pot.channels() == 0) return;
    const int d = static_cast<int>(pot.N(0).rows());
    const int n = pot.grid().n;
    U_.assign(n, GeneralOperator::Zero(d, d));
    for (int b = 0; b < d; ++b) {
        StateVector e = StateVector::Unit(d, b);
        DysonResult r = solve_nonlocal_dyson(pot, e, opts);
        for (int i = 0; i < n; ++i) U_[i].col(b) = r.traj.states[i];
    }
}

GeneralOperator SBuilder::raw(int node) const
{
    const int K = pot_.support();
    const int n = pot_.grid().n;
    const double h = pot_.grid().h;
    const int C = pot_.channels();
    if (C == 0) return GeneralOperator();
    const int d = static_cast<int>(pot_.N(0).rows());
    if (prop_ == Propagation::Identity) {
        GeneralOperator S = GeneralOperator::Zero(d, d);
        for (int c = 0; c < C; ++c) {
            cplx s = 0.0;
            for (int m = std::max(0, node - K); m <= node; ++m)
                for (int j = node; j <= std::min(n - 1, m + K); ++j)
                    s += theta(m, node, theta0_) * theta(j, node, theta0_) * (pot_.coeff(c, m, j) - pot_.coeff(c, j, m));
            if (s != 0.0) S += (I * h * h * s) * pot_.N(c);
        }
        return S;
    }
    GeneralOperator G = GeneralOperator::Zero(d, d);
    for (int m = std::max(0, node - K); m <= node; ++m)
        for (int j = node; j <= std::min(n - 1, m + K); ++j) {
            double wt = theta(m, node, theta0_) * theta(j, node, theta0_);
            G += wt * (U_[m].adjoint() * pot_.eval(m, j) * U_[j] - U_[j].adjoint() * pot_.eval(j, m) * U_[m]);
        }
    GeneralOperator Uinv = U_[node].inverse();
    return (I * h * h) * (Uinv.adjoint() * G * Uinv);
}

SOperatorResult SBuilder::at(int node) const
{
    require_window(pot_, node);
    SOperatorResult r;
    r.t = pot_.grid().t(node);
    r.order = prop_ == Propagation::Identity ? 1 : 2;
    r.S = raw(node);
    if (r.S.size() == 0) return r;
    double herm = hermiticity_residual(r.S);
    if (herm > 1e-8 * std::max(1.0, max_abs(r.S))) {
        std::ostringstream os;
        os << "S operator hermiticity residual " << herm;
        fail("hermiticity-error", os.str());
    }
    r.S = 0.5 * (r.S + r.S.adjoint()).eval();
    GeneralOperator one = GeneralOperator::Identity(r.S.rows(), r.S.cols()) + r.S;
    Eigen::SelfAdjointEigenSolver<GeneralOperator> es(one, Eigen::EigenvaluesOnly);
    r.min_eig_of_1_plus_S = es.eigenvalues().minCoeff();
    return r;
}

SOperatorResult build_S_operator(double t, const TemporalModelSpec& spec, const NoisePath& noise, Propagation prop,
                                 double theta0)
{
    Potential pot(spec, noise.grid, noise);
    int node = noise.grid.index_of(t);
    if (node < 0) fail("grid-misalignment", "time is not a grid node");
    SBuilder b(pot, prop, theta0);
    return b.at(node);
}

StateVector transform_state(const StateVector& psi, const SOperatorResult& S)
{
    if (S.S.size() == 0) return psi;
    require_same_dim(psi.size(), S.S.rows(), "transform_state");
    if (!(S.min_eig_of_1_plus_S > kPositiveTol)) {
        std::ostringstream os;
        os << "1 + S has eigenvalue " << S.min_eig_of_1_plus_S;
        fail("not-positive-definite", os.str());
    }
    GeneralOperator one = GeneralOperator::Identity(S.S.rows(), S.S.cols()) + S.S;
    return hermitian_sqrt(HermitianOperator::symmetrized(one)).mat() * psi;
}

std::vector<StateVector> transformed_states(const Potential& pot, const std::vector<StateVector>& psi, double theta0)
{
    SBuilder sb(pot, Propagation::Identity, theta0);
    std::vector<StateVector> out(psi.size());
    for (std::size_t k = 0; k < psi.size(); ++k) {
        GeneralOperator S = sb.raw(static_cast<int>(k));
        if (S.size() == 0 || max_abs(S) == 0.0) {
            out[k] = psi[k];
            continue;
        }
        SOperatorResult r;
        r.S = 0.5 * (S + S.adjoint());
        GeneralOperator one = GeneralOperator::Identity(S.rows(), S.cols()) + r.S;
        Eigen::SelfAdjointEigenSolver<GeneralOperator> es(one, Eigen::EigenvaluesOnly);
        r.min_eig_of_1_plus_S = es.eigenvalues().minCoeff();
        out[k] = transform_state(psi[k], r);
    }
    return out;
}

std::vector<double> zeta_breaks(const KernelProfile& k) { return {-0.5 * k.ell, 0.0, 0.5 * k.ell}; }

double rate_a(const KernelProfile& k, double zeta) { return (k.value(2 * zeta) + k.value(-2 * zeta)).real(); }

double rate_b(const KernelProfile& k, double zeta)
{
    double lo = -0.5 * k.ell, hi = std::min(-zeta, 0.5 * k.ell);
    if (hi <= lo) return 0.0;
    return integrate_1d([&](double nu) { return cplx(rate_a(k, nu)); }, lo, hi, {0.0}).real();
}

cplx y_integral(const KernelProfile& k, double zeta)
{
    double lo = -0.5 * k.ell, hi = std::min(zeta, 0.5 * k.ell);
    if (hi <= lo) return 0.0;
    return integrate_1d([&](double nu) { return k.value(-2 * nu); }, lo, hi, {0.0});
}

cplx z_integral(const KernelProfile& k, double zeta) { return y_integral(k, -zeta); }

double lindblad_rate(const KernelProfile& k)
{
    k.validate();
    auto f = [&](double z) { return cplx(rate_a(k, z) * rate_b(k, z)); };
    return 0.5 * integrate_1d_checked(f, -0.5 * k.ell, 0.5 * k.ell, zeta_breaks(k)).real();
}

RateTable rates_ab(const KernelProfile& k, double dzeta)
{
    k.validate();
    if (dzeta <= 0.0) dzeta = k.ell / 64.0;
    RateTable t;
    int m = static_cast<int>(std::ceil(0.5 * k.ell / dzeta - 1e-9));
    for (int i = -m; i <= m; ++i) {
        double z = i * dzeta;
        t.zeta.push_back(z);
        t.a.push_back(rate_a(k, z));
        t.b.push_back(rate_b(k, z));
    }
    t.gamma = lindblad_rate(k);
    return t;
}

XYZ build_XYZ(double t, double zeta, const Channel& ch, const Envelope* window)
{
    double w = window ? (*window)(t + zeta) : 1.0;
    const GeneralOperator& N = ch.N.mat();
    XYZ out;
    out.X = (2.0 * w * ch.kernel.value(2 * zeta)) * N;
    out.Y = (2.0 * w * y_integral(ch.kernel, zeta)) * N;
    out.Z = (2.0 * w * z_integral(ch.kernel, zeta)) * N;
    return out;
}

AB build_AB(double zeta, const Channel& ch)
{
    return {HermitianOperator(rate_a(ch.kernel, zeta) * ch.N.mat()),
            HermitianOperator(rate_b(ch.kernel, zeta) * ch.N.mat())};
}

HermitianOperator kossakowski_K(double zeta, const Channel& ch)
{
    double ab = std::max(0.0, rate_a(ch.kernel, zeta) * rate_b(ch.kernel, zeta));
    return HermitianOperator(std::sqrt(2.0 * ab) * ch.N.mat());
}

namespace {

// Inner nu-integral of the third effective-Hamiltonian line, before the 2i factor.
cplx hn3_inner(const KernelProfile& k, double zeta)
{
    double lo = -0.5 * k.ell, hi = std::min(zeta, 0.5 * k.ell);
    if (hi <= lo) return 0.0;
    cplx a = k.value(2 * zeta), am = k.value(-2 * zeta);
    return integrate_1d([&](double nu) { return a * k.value(-2 * nu) - k.value(2 * nu) * am; }, lo, hi, {0.0});
}

}  // namespace

EffectiveHamiltonian effective_hamiltonian(double t, const TemporalModelSpec& spec)
{
    spec.validate();
    const int d = spec.dim;
    EffectiveHamiltonian out;
    out.hn1 = out.hn2 = out.hn3 = GeneralOperator::Zero(d, d);
    for (const auto& ch : spec.channels) {
        const KernelProfile& k = ch.kernel;
        auto w2 = [&](double z) {
            double w = spec.window(t + z);
            return w * w;
        };
        std::vector<double> br = zeta_breaks(k);
        for (double x : spec.window.knots()) br.push_back(x - t);
        double lo = -0.5 * k.ell, hi = 0.5 * k.ell;
        cplx c1 = integrate_1d([&](double z) { return w2(z) * k.value(2 * z) * z_integral(k, z); }, lo, hi, br);
        cplx c2 = integrate_1d([&](double z) { return w2(z) * k.value(-2 * z) * std::conj(z_integral(k, z)); }, lo,
                               hi, br);
        cplx c3 = integrate_1d([&](double z) { return w2(z) * hn3_inner(k, z); }, lo, hi, br);
        const GeneralOperator& N = ch.N.mat();
        GeneralOperator NN = N * N;
        out.hn1 += (-I * c1) * (NN - N * N);
        out.hn2 += (-I * c2) * (NN - N * N);
        out.hn3 += (2.0 * I * c3) * NN;
    }
    GeneralOperator H = out.hn1 + out.hn2 + out.hn3;
    if (spec.H0) H += spec.H0->mat();
    out.hermiticity_residual = hermiticity_residual(H);
    out.H = HermitianOperator(H, "effective Hamiltonian");
    return out;
}

TemporalLindblad::TemporalLindblad(const TemporalModelSpec& spec, bool include_H) : spec_(spec), include_H_(include_H)
{
    spec.validate();
    std::vector<double> x, w;
    QuadratureRule rule{12, 8};
    gauss_legendre(rule.order, x, w);
    for (const auto& ch : spec.channels) {
        const KernelProfile& k = ch.kernel;
        Table tb;
        std::vector<double> edges = sorted_breaks(-0.5 * k.ell, 0.5 * k.ell, zeta_breaks(k));
        for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
            double step = (edges[s + 1] - edges[s]) / rule.panels_per_piece;
            for (int p = 0; p < rule.panels_per_piece; ++p) {
                double half = 0.5 * step, mid = edges[s] + p * step + half;
                for (int q = 0; q < rule.order; ++q) {
                    double z = mid + half * x[q];
                    tb.zeta.push_back(z);
                    tb.weight.push_back(half * w[q]);
                    tb.ab.push_back(rate_a(k, z) * rate_b(k, z));
                    tb.h3.push_back(include_H ? 2.0 * I * hn3_inner(k, z) : cplx(0.0));
                }
            }
        }
        tables_.push_back(std::move(tb));
    }
}

double TemporalLindblad::window_weight(double t, double zeta) const
{
    double w = spec_.window(t + zeta);
    return w * w;
}

double TemporalLindblad::dissipation(int c, double t) const
{
    const Table& tb = tables_[c];
    double s = 0.0;
    for (std::size_t q = 0; q < tb.zeta.size(); ++q) s += tb.weight[q] * tb.ab[q] * window_weight(t, tb.zeta[q]);
    return s;
}

cplx TemporalLindblad::hamiltonian_coeff(int c, double t) const
{
    const Table& tb = tables_[c];
    cplx s = 0.0;
    for (std::size_t q = 0; q < tb.zeta.size(); ++q) s += tb.weight[q] * tb.h3[q] * window_weight(t, tb.zeta[q]);
    return s;
}

GeneralOperator TemporalLindblad::rhs(const GeneralOperator& sigma, double t) const
{
    require_same_dim(sigma.rows(), spec_.dim, "lindblad_rhs_temporal");
    GeneralOperator out = GeneralOperator::Zero(spec_.dim, spec_.dim);
    GeneralOperator H = GeneralOperator::Zero(spec_.dim, spec_.dim);
    if (spec_.H0) H += spec_.H0->mat();
    for (std::size_t c = 0; c < spec_.channels.size(); ++c) {
        const GeneralOperator& N = spec_.channels[c].N.mat();
        out -= dissipation(static_cast<int>(c), t) * commutator(N, commutator(N, sigma));
        if (include_H_) H += hamiltonian_coeff(static_cast<int>(c), t).real() * (N * N);
    }
    if (include_H_ || spec_.H0) out += -I * commutator(H, sigma);
    return out;
}

GeneralOperator lindblad_rhs_temporal(const GeneralOperator& sigma, const TemporalModelSpec& spec, bool include_H,
                                      std::optional<double> t)
{
    if (t) return TemporalLindblad(spec, include_H).rhs(sigma, *t);
    TemporalModelSpec plateau = spec;
    plateau.window.enabled = false;
    return TemporalLindblad(plateau, include_H).rhs(sigma, 0.0);
}

std::vector<GeneralOperator> integrate_lindblad_temporal(const DensityMatrix& sigma0, const TemporalModelSpec& spec,
                                                         const TimeGrid& grid, bool include_H)
{
    require_same_dim(sigma0.dim(), spec.dim, "integrate_lindblad_temporal");
    TemporalLindblad L(spec, include_H);
    std::vector<GeneralOperator> out;
    out.reserve(grid.n);
    GeneralOperator s = sigma0.mat();
    out.push_back(s);
    const double h = grid.h;
    for (int i = 0; i + 1 < grid.n; ++i) {
        double t = grid.t(i);
        GeneralOperator k1 = L.rhs(s, t);
        GeneralOperator k2 = L.rhs(s + 0.5 * h * k1, t + 0.5 * h);
        GeneralOperator k3 = L.rhs(s + 0.5 * h * k2, t + 0.5 * h);
        GeneralOperator k4 = L.rhs(s + h * k3, t + h);
        s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s = 0.5 * (s + s.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<GeneralOperator> es(s, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-6) {
            std::ostringstream os;
            os << "min eigenvalue " << es.eigenvalues().minCoeff() << " at step " << i + 1 << "; reduce h";
            fail("positivity-violation", os.str());
        }
        out.push_back(s);
    }
    return out;
}

std::vector<GeneralOperator> ensemble_density_temporal(const std::vector<TrajectoryRecord>& trajectories,
                                                       const TemporalModelSpec& spec,
                                                       const std::vector<NoisePath>& noise_paths,
                                                       bool use_commutator_ip)
{
    if (trajectories.empty()) fail("insufficient-samples", "ensemble needs at least one trajectory");
    if (trajectories.size() != noise_paths.size()) fail("dim-mismatch", "trajectory and noise lists differ in length");
    const TimeGrid& g = trajectories.front().grid;
    DensityAccumulator acc(g.n, spec.dim);
    for (std::size_t r = 0; r < trajectories.size(); ++r) {
        if (!use_commutator_ip) {
            acc.add(trajectories[r].states, NormalizeMode::Raw);
            continue;
        }
        Potential pot(spec, trajectories[r].grid, noise_paths[r]);
        acc.add(transformed_states(pot, trajectories[r].states), NormalizeMode::Raw);
    }
    return acc.mean();
}

}  // namespace collapse
