#include <cmath>

#include "common.hpp"
#include "collapse/spatial.hpp"
#include "collapse/stats.hpp"

using namespace collapse;
using namespace testing;

static SpatialModelSpec qubit(const GeneralOperator& m)
{
    return SpatialModelSpec{2, {HermitianOperator(m)}, std::nullopt};
}

static StateVector plus()
{
    StateVector p(2);
    p << 1, 1;
    return p / std::sqrt(2.0);
}

TEST_CASE("zero potential leaves the state fixed")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    NoisePath noise = sample_noise_path(g, 1, 3);
    auto rec = evolve_spatial_trajectory(qubit(GeneralOperator::Zero(2, 2)), plus(), g, noise, Stepper::UnitaryExp);
    for (const auto& s : rec.states) CHECK(max_abs(s - plus()) == 0.0);
}

TEST_CASE("eigenstate acquires a phase only")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    NoisePath noise = sample_noise_path(g, 1, 4);
    StateVector up(2);
    up << 1, 0;
    auto rec = evolve_spatial_trajectory(qubit(sz()), up, g, noise, Stepper::UnitaryExp);
    for (const auto& s : rec.states) {
        CHECK(std::abs(std::abs(s[0]) - 1.0) < 1e-14);
        CHECK(std::abs(s[1]) == 0.0);
    }
    CHECK(max_abs(rec.states.front() - up) == 0.0);
}

TEST_CASE("property: unitary stepper preserves the norm")
{
    std::mt19937_64 rng(31);
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    SpatialModelSpec spec{3, {HermitianOperator(random_hermitian(3, rng)), HermitianOperator(random_hermitian(3, rng))},
                          std::nullopt};
    NoisePath noise = sample_noise_path(g, 2, 5);
    auto rec = evolve_spatial_trajectory(spec, random_state(3, rng), g, noise, Stepper::UnitaryExp);
    for (std::size_t i = 0; i < rec.norm_series.size(); ++i)
        CHECK(std::abs(rec.norm_series[i] - rec.norm_series[0]) <= 1e-9 * static_cast<double>(i) + 1e-15);
}

TEST_CASE("ensemble mean state decays as exp(-t/2)")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    const int R = 10000;
    StateVector sum = StateVector::Zero(2);
    for (int r = 0; r < R; ++r) {
        NoisePath noise = sample_noise_path(g, 1, derive_seed(77, r));
        sum += evolve_spatial_trajectory(qubit(sz()), plus(), g, noise, Stepper::UnitaryExp).states.back();
    }
    StateVector mean = sum / static_cast<double>(R);
    CHECK((mean - std::exp(-0.5) * plus()).norm() <= 5.0 / std::sqrt(static_cast<double>(R)));
}

TEST_CASE("lindblad_rhs_spatial examples")
{
    GeneralOperator p = plus() * plus().adjoint();
    GeneralOperator rhs = lindblad_rhs_spatial(p, qubit(sz()));
    CHECK(std::abs(rhs(0, 1) + 1.0) < 1e-15);
    CHECK(std::abs(rhs(0, 0)) < 1e-15);

    GeneralOperator diag(2, 2);
    diag << 0.3, 0, 0, 0.7;
    CHECK(max_abs(lindblad_rhs_spatial(diag, qubit(sz()))) == 0.0);

    std::mt19937_64 rng(32);
    for (int k = 0; k < 20; ++k) {
        SpatialModelSpec spec{3, {HermitianOperator(random_hermitian(3, rng))}, std::nullopt};
        GeneralOperator out = lindblad_rhs_spatial(random_density(3, rng), spec);
        CHECK(std::abs(out.trace()) < 1e-12);
        CHECK(hermiticity_residual(out) < 1e-12);
    }
}

TEST_CASE("integrate_lindblad_spatial dephasing")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 1e-3);
    DensityMatrix s0 = DensityMatrix::pure(plus());
    auto traj = integrate_lindblad_spatial(s0, qubit(sz()), g);
    double off = traj.back()(0, 1).real();
    CHECK(std::abs(off - 0.5 * std::exp(-2.0)) <= 1e-6 * 0.5 * std::exp(-2.0));
    for (const auto& s : traj) CHECK(std::abs(s.trace() - 1.0) < 1e-8);

    DensityMatrix mixed(GeneralOperator::Identity(2, 2) * 0.5);
    auto flat = integrate_lindblad_spatial(mixed, qubit(sx()), g);
    CHECK(max_abs(flat.back() - mixed.mat()) < 1e-15);
}

TEST_CASE("ensemble density matches the Lindblad flow")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    const int R = 2000;
    std::vector<TrajectoryRecord> trajs;
    for (int r = 0; r < R; ++r) {
        NoisePath noise = sample_noise_path(g, 1, derive_seed(78, r));
        trajs.push_back(evolve_spatial_trajectory(qubit(sz()), plus(), g, noise, Stepper::UnitaryExp));
    }
    auto rho = ensemble_density(trajs, NormalizeMode::Raw);
    auto ref = integrate_lindblad_spatial(DensityMatrix::pure(plus()), qubit(sz()), g);
    double worst = 0.0;
    for (int i = 0; i < g.n; ++i) worst = std::max(worst, trace_distance(rho[i], ref[i]));
    CHECK(worst <= 5.0 / std::sqrt(static_cast<double>(R)));

    auto single = ensemble_density({trajs.front()}, NormalizeMode::Raw);
    for (int i = 0; i < g.n; i += 10) {
        const StateVector& s = trajs.front().states[i];
        CHECK(max_abs(single[i] - s * s.adjoint()) < 1e-15);
    }
    CHECK(error_code([] { ensemble_density({}, NormalizeMode::Raw); }) == "insufficient-samples");
}

TEST_CASE("property: euler-maruyama agrees with the unitary stepper")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.001);
    const int R = 1000;
    SpatialEnsembleRun u = run_spatial_ensemble(qubit(sz()), plus(), g, R, 90, Stepper::UnitaryExp, nullptr);
    SpatialEnsembleRun e = run_spatial_ensemble(qubit(sz()), plus(), g, R, 90, Stepper::EulerMaruyama, nullptr);
    double worst = 0.0;
    for (int i = 0; i < g.n; ++i) worst = std::max(worst, trace_distance(u.density[i], e.density[i]));
    // Same noise in both runs, so the difference is the O(h) discretization gap plus noise.
    CHECK(worst <= 10.0 * g.h + 3.0 / std::sqrt(static_cast<double>(R)));
}

TEST_CASE("property: decay rate scales with c^2")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 1e-3);
    std::vector<double> lc, lr;
    for (double c : {0.5, 1.0, 2.0}) {
        auto traj = integrate_lindblad_spatial(DensityMatrix::pure(plus()), qubit(c * sz()), g);
        double rate = -std::log(2.0 * traj.back()(0, 1).real());
        lc.push_back(std::log(c));
        lr.push_back(std::log(rate));
    }
    auto [slope, icpt] = linear_fit(lc, lr);
    CHECK(std::abs(slope - 2.0) <= 0.1);
    (void)icpt;
}

TEST_CASE("no_collapse_check")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    HermitianOperator one(GeneralOperator::Identity(2, 2));
    NoCollapseReport r1 = no_collapse_check(qubit(sz()), one, plus(), g, 200, 1);
    CHECK(r1.pass);
    for (double v : r1.variance_series) CHECK(std::abs(v) < 1e-12);

    NoCollapseReport r2 = no_collapse_check(qubit(sz()), HermitianOperator(sz()), plus(), g, 2000, 2);
    CHECK(r2.pass);
    CHECK(std::abs(r2.variance_series.back() - 1.0) < 1e-10);

    CHECK(error_code([&] { no_collapse_check(qubit(sz()), HermitianOperator(sx()), plus(), g, 10, 3); }) ==
          "observable-not-commuting");
}

TEST_CASE("property: martingale of a commuting observable")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    HermitianOperator z(sz());
    StateVector w(2);
    w << std::sqrt(0.8), std::sqrt(0.2);
    SpatialEnsembleRun run = run_spatial_ensemble(qubit(sz()), w, g, 1000, 91, Stepper::UnitaryExp, &z);
    for (int i = 0; i < g.n; ++i)
        CHECK(std::abs(run.observable_mean[i] - run.observable_mean[0]) <= 5.0 * run.observable_se[i] + 1e-12);
}

TEST_CASE("spatial guards")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    TimeGrid other = TimeGrid::make(0.0, 1.0, 0.02);
    NoisePath noise = sample_noise_path(other, 1, 3);
    CHECK(error_code([&] { evolve_spatial_trajectory(qubit(sz()), plus(), g, noise, Stepper::UnitaryExp); }) ==
          "grid-misalignment");
}
