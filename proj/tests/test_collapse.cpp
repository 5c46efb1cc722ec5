#include <cmath>

#include "common.hpp"
#include "collapse/collapse.hpp"

using namespace collapse;
using namespace testing;

static GeneralOperator diag(double a, double b)
{
    GeneralOperator m = GeneralOperator::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

static KernelProfile box(double g, double ell)
{
    KernelProfile k;
    k.ell = ell;
    k.g = g;
    return k;
}

static StateVector state(double a, double b)
{
    StateVector p(2);
    p << a, b;
    return p;
}

static CollapseConfig config(double g, const StateVector& psi0, int R)
{
    CollapseConfig c;
    c.spec = make_temporal_spec(2, {{HermitianOperator(sz()), box(g, 0.05)}}, 0.0, 0.4);
    c.observable = HermitianOperator(sz());
    c.psi0 = psi0;
    c.grid = TimeGrid::make(0.0, 0.4, 0.01);
    c.R = R;
    c.base_seed = 7;
    return c;
}

static const BornRow& row_for(const CollapseReport& r, double value)
{
    for (const auto& b : r.born_table)
        if (std::abs(b.eigenvalue - value) < 1e-12) return b;
    FAIL("eigenvalue missing from Born table");
    return r.born_table.front();
}

TEST_CASE("eigenstate resolves at once with no variance growth")
{
    CollapseReport r = run_collapse_experiment(config(1.0, state(1, 0), 200));
    for (std::size_t i = 0; i < r.t.size(); ++i) CHECK(r.variance_mean[i] <= 5.0 * r.variance_se[i] + 1e-15);
    CHECK(r.variance_mean.front() == 0.0);
    CHECK(std::abs(r.variance_mean.back()) < 1e-12);
    CHECK(r.martingale_z < 5.0);
    CHECK(r.unresolved_fraction == 0.0);
    const BornRow& up = row_for(r, 1.0);
    CHECK(up.predicted == doctest::Approx(1.0));
    CHECK(up.observed == 1.0);
    CHECK(up.count == 200);
    CHECK(up.inside);
    CHECK(row_for(r, -1.0).observed == 0.0);
}

TEST_CASE("zero kernel leaves every trajectory at psi0")
{
    CollapseReport r = run_collapse_experiment(config(0.0, state(std::sqrt(0.8), std::sqrt(0.2)), 50));
    CHECK(r.unresolved_fraction == 1.0);
    CHECK(r.martingale_drift == 0.0);
    CHECK(r.martingale_z == 0.0);
    CHECK(r.variance_ratio == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.endpoint_residual < 1e-14);
    for (double c : r.c) CHECK(c == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.variance_mean.front() == doctest::Approx(0.64).epsilon(1e-12));
}

TEST_CASE("born table and martingale for a superposition")
{
    CollapseReport r = run_collapse_experiment(config(1.0, state(std::sqrt(0.8), std::sqrt(0.2)), 400));
    double predicted = 0.0, observed = 0.0;
    for (const auto& b : r.born_table) {
        predicted += b.predicted;
        observed += b.observed;
        CHECK(b.ci_lo <= b.observed);
        CHECK(b.observed <= b.ci_hi);
    }
    CHECK(predicted == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(observed + r.unresolved_fraction == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.martingale_z < 5.0);
    CHECK(r.endpoint_residual < 1e-12);
    CHECK(r.c.front() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.t.size() == 41u);
    CHECK(r.failed == 0);
    CHECK(r.gamma_T == doctest::Approx(0.1));
}

TEST_CASE("commuting noise conserves the variance exactly")
{
    CollapseReport r = run_collapse_experiment(config(1.0, state(std::sqrt(0.5), std::sqrt(0.5)), 200));
    CHECK(std::abs(r.variance_ratio - 1.0) < 1e-9);
}

TEST_CASE("variance rate check")
{
    VarianceRateReport v = variance_rate_check(config(1.0, state(1, 0), 120), {0.1, 0.2, 0.3});
    REQUIRE(v.rows.size() == 2u);
    CHECK(v.pass);
    for (const auto& row : v.rows) {
        CHECK(std::abs(row.lhs) <= 5.0 * row.lhs_se);
        CHECK(row.rhs == 0.0);
    }
    CHECK(error_code([] { variance_rate_check(config(1.0, state(1, 0), 50), {0.1, 0.2}); }) == "underpowered");
    CHECK(error_code([] { variance_rate_check(config(1.0, state(1, 0), 120), {0.1, 0.105}); }) ==
          "grid-misalignment");
    CHECK(error_code([] { variance_rate_check(config(1.0, state(1, 0), 120), {0.1}); }) == "schema-error");
}

TEST_CASE("composite check")
{
    KernelProfile k;
    k.form = KernelForm::Modulated;
    k.ell = 0.1;
    k.omega = M_PI / 4 / 0.1;
    TemporalModelSpec z = make_temporal_spec(2, {{HermitianOperator(sz()), k}}, 0.0, 1.0);
    for (double t : {0.25, 0.3, 0.5}) {
        CompositeReport a = composite_check(z, t);
        CHECK(a.deviation_from_scalar < 1e-12);
    }

    TemporalModelSpec p = make_temporal_spec(2, {{HermitianOperator(diag(1, 0)), k}}, 0.0, 1.0);
    CompositeReport plateau = composite_check(p, 0.5);
    CHECK(plateau.operator_estimate.norm() == 0.0);
    CHECK(plateau.deviation_from_scalar == 0.0);
    CompositeReport b = composite_check(p, 0.3);
    CHECK(b.operator_estimate.norm() > 1e-6);
    CHECK(b.deviation_from_scalar > 0.5);
    CHECK(std::abs(b.operator_estimate(1, 1)) == 0.0);

    k.g = 0.0;
    TemporalModelSpec zero = make_temporal_spec(2, {{HermitianOperator(diag(1, 0)), k}}, 0.0, 1.0);
    CompositeReport c = composite_check(zero, 0.5);
    CHECK(c.deviation_from_scalar == 0.0);
    CHECK(c.operator_estimate.norm() == 0.0);
}

TEST_CASE("collapse time")
{
    TimeGrid g = TimeGrid::make(0.0, 0.3, 0.1);
    auto es = eigenspaces(HermitianOperator(sz()));
    std::vector<StateVector> st{state(0.8, 0.6), state(0.9, 0.3), state(1.0, 0.1), state(1.0, 0.0)};
    CHECK(collapse_time(st, g, es, 0.95) == doctest::Approx(0.2));
    CHECK(collapse_time(st, g, es, 0.6) == doctest::Approx(0.0));
    std::vector<StateVector> flat(4, state(1.0, 1.0));
    CHECK(collapse_time(flat, g, es, 0.95) == kUnresolved);
    std::vector<StateVector> zero(4, state(0.0, 0.0));
    CHECK(collapse_time(zero, g, es, 0.95) == kUnresolved);
}

TEST_CASE("hartree-fock demo")
{
    CollapseConfig c = config(0.0, state(std::sqrt(0.8), std::sqrt(0.2)), 40);
    HartreeFockReport none = hartree_fock_demo(c, {1, 2});
    REQUIRE(none.rows.size() == 2u);
    for (const auto& row : none.rows) {
        CHECK(row.unresolved == 40);
        CHECK(row.median == kUnresolved);
    }
    CHECK_FALSE(none.monotone);

    CollapseConfig e = config(1.0, state(1, 0), 40);
    HartreeFockReport at_once = hartree_fock_demo(e, {4, 1, 2, 2});
    REQUIRE(at_once.rows.size() == 3u);
    CHECK(at_once.rows[0].q == 1);
    CHECK(at_once.single_particle_median == at_once.rows[0].median);
    for (const auto& row : at_once.rows) {
        CHECK(row.median == 0.0);
        CHECK(row.unresolved == 0);
    }
    CHECK(at_once.monotone);

    CHECK(error_code([&] { hartree_fock_demo(e, {}); }) == "schema-error");
    CHECK(error_code([&] { hartree_fock_demo(e, {0, 1}); }) == "schema-error");
}

TEST_CASE("collapse config guards")
{
    CollapseConfig c = config(1.0, state(1, 0), 10);
    c.observable = HermitianOperator(sx());
    CHECK(error_code([&] { c.validate(); }) == "observable-not-commuting");

    CollapseConfig two = config(1.0, state(1, 0), 10);
    two.spec.channels.push_back({HermitianOperator(sx()), box(0.1, 0.05)});
    CHECK(error_code([&] { two.validate(); }) == "observable-not-commuting");

    CollapseConfig p = config(1.0, state(1, 0), 10);
    p.p_c = 0.4;
    CHECK(error_code([&] { p.validate(); }) == "schema-error");
    p.p_c = 1.0;
    CHECK(error_code([&] { p.validate(); }) == "schema-error");

    CollapseConfig r = config(1.0, state(1, 0), 1);
    CHECK(error_code([&] { r.validate(); }) == "insufficient-samples");

    CollapseConfig big = config(5.0, state(1, 0), 10);
    CHECK(error_code([&] { big.validate(); }) == "contraction-violated");

    CollapseConfig dim = config(1.0, StateVector::Ones(3), 10);
    CHECK(error_code([&] { dim.validate(); }) != "");
}
