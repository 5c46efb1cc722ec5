#include "collapse/spatial.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "collapse/error.hpp"
#include "collapse/parallel.hpp"
#include "collapse/stats.hpp"

namespace collapse {

void SpatialModelSpec::validate() const
{
    if (dim < 1 || dim > kMaxDim) fail("schema-error", "model dimension out of range");
    for (std::size_t k = 0; k < M.size(); ++k) require_same_dim(M[k].dim(), dim, "spatial channel");
    if (H0) require_same_dim(H0->dim(), dim, "H0");
}

void require_commuting(const HermitianOperator& o, const std::vector<HermitianOperator>& ops, const char* what)
{
    for (std::size_t k = 0; k < ops.size(); ++k) {
        double r = max_abs(commutator(o.mat(), ops[k].mat()));
        if (r > kConstructTol) {
            std::ostringstream os;
            os << "observable does not commute with " << what << " " << k << " (residual " << r << ")";
            fail("observable-not-commuting", os.str());
        }
    }
}

double step_increment(const NoisePath& noise, int channel, int step)
{
    return 0.5 * noise.grid.h * (noise.at(channel, 2 * step) + noise.at(channel, 2 * step + 1));
}

namespace {

// Common eigenbasis of a commuting family, used to turn each unitary step into phases.
struct CommonBasis {
    GeneralOperator U;
    std::vector<Eigen::VectorXd> diag;  // eigenvalues of each member in that basis
};

std::optional<CommonBasis> common_basis(const std::vector<const GeneralOperator*>& ops, int dim)
{
    for (std::size_t a = 0; a < ops.size(); ++a)
        for (std::size_t b = a + 1; b < ops.size(); ++b)
            if (max_abs(commutator(*ops[a], *ops[b])) > 1e-13) return std::nullopt;
    GeneralOperator mix = GeneralOperator::Zero(dim, dim);
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (const auto* o : ops) mix += u(rng) * (*o);
    Eigen::SelfAdjointEigenSolver<GeneralOperator> es(0.5 * (mix + mix.adjoint()));
    CommonBasis cb{es.eigenvectors(), {}};
    for (const auto* o : ops) {
        GeneralOperator d = cb.U.adjoint() * (*o) * cb.U;
        if (max_abs(d - GeneralOperator(d.diagonal().asDiagonal())) > 1e-9 * std::max(1.0, max_abs(*o)))
            return std::nullopt;
        cb.diag.push_back(d.diagonal().real());
    }
    return cb;
}

}  // namespace

TrajectoryRecord evolve_spatial_trajectory(const SpatialModelSpec& spec, const StateVector& psi0,
                                           const TimeGrid& grid, const NoisePath& noise, Stepper stepper)
{
    spec.validate();
    require_same_dim(psi0.size(), spec.dim, "evolve_spatial_trajectory");
    if (noise.grid.n != grid.n || std::abs(noise.grid.h - grid.h) > 1e-12 * grid.h)
        fail("grid-misalignment", "noise path grid does not match the state grid");
    if (noise.channel_count < static_cast<int>(spec.M.size()))
        fail("dim-mismatch", "noise path has fewer channels than the model");

    const int K = static_cast<int>(spec.M.size());
    const int d = spec.dim;
    TrajectoryRecord rec;
    rec.grid = grid;
    rec.seed = noise.seed;
    rec.states.reserve(grid.n);
    rec.norm_series.reserve(grid.n);
    rec.states.push_back(psi0);
    rec.norm_series.push_back(psi0.squaredNorm());

    std::vector<const GeneralOperator*> ops;
    for (const auto& m : spec.M) ops.push_back(&m.mat());
    if (spec.H0) ops.push_back(&spec.H0->mat());

    std::optional<CommonBasis> cb;
    if (stepper == Stepper::UnitaryExp) cb = common_basis(ops, d);

    GeneralOperator drift = GeneralOperator::Zero(d, d);
    if (stepper == Stepper::EulerMaruyama)
        for (const auto& m : spec.M) drift += m.mat() * m.mat();

    StateVector psi = psi0;
    StateVector phi;
    if (cb) phi = cb->U.adjoint() * psi0;
    for (int s = 0; s + 1 < grid.n; ++s) {
        if (stepper == Stepper::UnitaryExp) {
            if (cb) {
                Eigen::VectorXd angle = Eigen::VectorXd::Zero(d);
                for (int k = 0; k < K; ++k) angle += step_increment(noise, k, s) * cb->diag[k];
                if (spec.H0) angle += grid.h * cb->diag[K];
                for (int i = 0; i < d; ++i) phi[i] *= std::polar(1.0, -angle[i]);
                psi = cb->U * phi;
            } else {
                GeneralOperator A = GeneralOperator::Zero(d, d);
                for (int k = 0; k < K; ++k) A += step_increment(noise, k, s) * spec.M[k].mat();
                if (spec.H0) A += grid.h * spec.H0->mat();
                psi = exp_minus_i(HermitianOperator::symmetrized(A), 1.0) * psi;
            }
        } else {
            GeneralOperator A = GeneralOperator::Zero(d, d);
            for (int k = 0; k < K; ++k) A += step_increment(noise, k, s) * spec.M[k].mat();
            if (spec.H0) A += grid.h * spec.H0->mat();
            StateVector next = psi - cplx(0, 1) * (A * psi) - 0.5 * grid.h * (drift * psi);
            psi = next;
        }
        if (!psi.allFinite()) {
            std::ostringstream os;
            os << "non-finite amplitude at step " << s + 1;
            fail("blowup", os.str());
        }
        rec.states.push_back(psi);
        rec.norm_series.push_back(psi.squaredNorm());
    }
    return rec;
}

GeneralOperator lindblad_rhs_spatial(const GeneralOperator& sigma, const SpatialModelSpec& spec)
{
    require_same_dim(sigma.rows(), spec.dim, "lindblad_rhs_spatial");
    GeneralOperator out = GeneralOperator::Zero(spec.dim, spec.dim);
    if (spec.H0) out += cplx(0, -1) * commutator(spec.H0->mat(), sigma);
    for (const auto& m : spec.M) out -= 0.5 * commutator(m.mat(), commutator(m.mat(), sigma));
    return out;
}

namespace {

void check_positivity(const GeneralOperator& s, int step)
{
    Eigen::SelfAdjointEigenSolver<GeneralOperator> es(s, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    if (lo < -1e-6) {
        std::ostringstream os;
        os << "min eigenvalue " << lo << " at step " << step << "; reduce h";
        fail("positivity-violation", os.str());
    }
}

}  // namespace

std::vector<GeneralOperator> integrate_lindblad_spatial(const DensityMatrix& sigma0, const SpatialModelSpec& spec,
                                                        const TimeGrid& grid)
{
    spec.validate();
    require_same_dim(sigma0.dim(), spec.dim, "integrate_lindblad_spatial");
    std::vector<GeneralOperator> out;
    out.reserve(grid.n);
    GeneralOperator s = sigma0.mat();
    out.push_back(s);
    const double h = grid.h;
    for (int i = 0; i + 1 < grid.n; ++i) {
        GeneralOperator k1 = lindblad_rhs_spatial(s, spec);
        GeneralOperator k2 = lindblad_rhs_spatial(s + 0.5 * h * k1, spec);
        GeneralOperator k3 = lindblad_rhs_spatial(s + 0.5 * h * k2, spec);
        GeneralOperator k4 = lindblad_rhs_spatial(s + h * k3, spec);
        s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s = 0.5 * (s + s.adjoint()).eval();
        check_positivity(s, i + 1);
        out.push_back(s);
    }
    return out;
}

DensityAccumulator::DensityAccumulator(int nodes, int dim)
    : sum_(nodes, GeneralOperator::Zero(dim, dim))
{
}

void DensityAccumulator::add(const std::vector<StateVector>& states, NormalizeMode mode)
{
    if (states.size() != sum_.size()) fail("grid-misalignment", "trajectory length differs from the ensemble grid");
    for (std::size_t i = 0; i < states.size(); ++i) {
        const StateVector& p = states[i];
        require_same_dim(p.size(), sum_[i].rows(), "ensemble_density");
        if (mode == NormalizeMode::L2) {
            double nn = p.squaredNorm();
            sum_[i] += (p * p.adjoint()) / nn;
        } else {
            sum_[i] += p * p.adjoint();
        }
    }
    ++count_;
}

std::vector<GeneralOperator> DensityAccumulator::mean() const
{
    std::vector<GeneralOperator> out(sum_.size());
    for (std::size_t i = 0; i < sum_.size(); ++i) {
        GeneralOperator m = sum_[i] / static_cast<double>(std::max<long>(1, count_));
        out[i] = 0.5 * (m + m.adjoint());
    }
    return out;
}

std::vector<GeneralOperator> ensemble_density(const std::vector<TrajectoryRecord>& trajectories, NormalizeMode mode)
{
    if (trajectories.empty()) fail("insufficient-samples", "ensemble_density needs at least one trajectory");
    const TimeGrid& g = trajectories.front().grid;
    DensityAccumulator acc(g.n, static_cast<int>(trajectories.front().states.front().size()));
    for (const auto& tr : trajectories) {
        if (tr.grid.n != g.n || tr.grid.h != g.h || tr.grid.t0 != g.t0)
            fail("grid-misalignment", "trajectories on different grids");
        acc.add(tr.states, mode);
    }
    return acc.mean();
}

SpatialEnsembleRun run_spatial_ensemble(const SpatialModelSpec& spec, const StateVector& psi0, const TimeGrid& grid,
                                        int R, std::uint64_t base_seed, Stepper stepper,
                                        const HermitianOperator* observable)
{
    if (R < 1) fail("insufficient-samples", "ensemble needs at least one realization");
    const int channels = static_cast<int>(spec.M.size());
    DensityAccumulator acc(grid.n, spec.dim);
    std::vector<ScalarMoments> var(observable ? grid.n : 0), obs(observable ? grid.n : 0);
    SpatialEnsembleRun run;
    run.max_norm_drift.resize(R);
    ordered_blocks<TrajectoryRecord>(
        R, 256,
        [&](int r) {
            NoisePath noise = sample_noise_path(grid, channels, derive_seed(base_seed, static_cast<std::uint64_t>(r)));
            return evolve_spatial_trajectory(spec, psi0, grid, noise, stepper);
        },
        [&](int r, const TrajectoryRecord& tr) {
            acc.add(tr.states, NormalizeMode::Raw);
            double drift = 0.0;
            for (double n : tr.norm_series) drift = std::max(drift, std::abs(n - tr.norm_series.front()));
            run.max_norm_drift[r] = drift;
            if (observable) {
                for (int i = 0; i < grid.n; ++i) {
                    double e = expectation(tr.states[i], *observable);
                    double e2 = expectation_sq(tr.states[i], *observable);
                    var[i].add(e2 - e * e);
                    obs[i].add(e);
                }
            }
        });
    run.density = acc.mean();
    for (int i = 0; observable && i < grid.n; ++i) {
        run.variance_mean.push_back(var[i].mean());
        run.variance_se.push_back(var[i].se());
        run.observable_mean.push_back(obs[i].mean());
        run.observable_se.push_back(obs[i].se());
    }
    return run;
}

NoCollapseReport no_collapse_check(const SpatialModelSpec& spec, const HermitianOperator& observable,
                                   const StateVector& psi0, const TimeGrid& grid, int R, std::uint64_t base_seed,
                                   Stepper stepper)
{
    require_commuting(observable, spec.M, "M channel");
    SpatialEnsembleRun run = run_spatial_ensemble(spec, psi0, grid, R, base_seed, stepper, &observable);
    NoCollapseReport rep;
    rep.variance_series = run.variance_mean;
    rep.se_series = run.variance_se;
    rep.pass = true;
    const double v0 = run.variance_mean.front();
    for (int i = 0; i < grid.n; ++i) {
        double dev = std::abs(run.variance_mean[i] - v0);
        rep.max_drift = std::max(rep.max_drift, dev);
        double se = run.variance_se[i];
        // A zero standard error happens when every trajectory keeps its variance exactly.
        if (dev > 5.0 * se && dev > 1e-10) rep.pass = false;
        if (se > 0.0) rep.max_z = std::max(rep.max_z, dev / se);
    }
    return rep;
}

}  // namespace collapse
