#include <cmath>

#include "common.hpp"

using namespace collapse;
using namespace testing;

TEST_CASE("l2_inner examples")
{
    StateVector a(2), b(2);
    a << 1, 0;
    b << 0, 1;
    CHECK(std::abs(l2_inner(a, b)) == 0.0);

    StateVector c(2);
    c << 1, cplx(0, 1);
    c /= std::sqrt(2.0);
    CHECK(std::abs(l2_inner(c, c) - 1.0) < 1e-15);

    StateVector d(2);
    d << 0.6, cplx(0, 0.8);
    CHECK(std::abs(l2_inner(a, d) - 0.6) < 1e-15);

    StateVector e(3);
    CHECK(error_code([&] { l2_inner(a, e); }) == "dim-mismatch");
}

TEST_CASE("hermitian construction guards")
{
    GeneralOperator m(2, 2);
    m << 1, cplx(0, 1), cplx(0, 1), 1;
    CHECK(error_code([&] { HermitianOperator h{m}; }) == "hermiticity-error");
    CHECK(error_code([&] { HermitianOperator h{GeneralOperator(2, 3)}; }) == "dim-mismatch");
    CHECK(error_code([&] { DensityMatrix r{GeneralOperator(sz())}; }) == "positivity-violation");
}

TEST_CASE("hermitian_sqrt examples")
{
    GeneralOperator id = GeneralOperator::Identity(3, 3);
    CHECK(max_abs(hermitian_sqrt(HermitianOperator(id)).mat() - id) < 1e-14);

    GeneralOperator d(2, 2);
    d << 4, 0, 0, 1;
    GeneralOperator r(2, 2);
    r << 2, 0, 0, 1;
    CHECK(max_abs(hermitian_sqrt(HermitianOperator(d)).mat() - r) < 1e-14);

    CHECK(error_code([] { hermitian_sqrt(HermitianOperator(sz())); }) == "not-positive-definite");
}

TEST_CASE("eig_hermitian of Pauli matrices")
{
    for (const GeneralOperator& p : {sz(), sx()}) {
        Eigensystem es = eig_hermitian(HermitianOperator(p));
        CHECK(std::abs(es.values[0] + 1.0) < 1e-14);
        CHECK(std::abs(es.values[1] - 1.0) < 1e-14);
        GeneralOperator back = es.vectors * es.values.cast<cplx>().asDiagonal() * es.vectors.adjoint();
        CHECK(max_abs(back - p) < 1e-14);
    }
}

TEST_CASE("trace_distance examples")
{
    GeneralOperator a(2, 2), b(2, 2), c(2, 2), e(2, 2);
    a << 1, 0, 0, 0;
    b << 0, 0, 0, 1;
    c << 0.75, 0, 0, 0.25;
    e << 0.5, 0, 0, 0.5;
    CHECK(trace_distance(a, a) == doctest::Approx(0.0));
    CHECK(trace_distance(a, b) == doctest::Approx(1.0));
    CHECK(trace_distance(c, e) == doctest::Approx(0.25));
}

TEST_CASE("expectation examples")
{
    HermitianOperator z(sz());
    StateVector up(2), plus(2), w(2);
    up << 1, 0;
    plus << 1, 1;
    plus /= std::sqrt(2.0);
    w << std::sqrt(0.8), std::sqrt(0.2);
    CHECK(expectation(up, z) == doctest::Approx(1.0));
    CHECK(expectation_sq(up, z) - std::pow(expectation(up, z), 2) == doctest::Approx(0.0));
    CHECK(std::abs(expectation(plus, z)) < 1e-15);
    CHECK(expectation_sq(plus, z) == doctest::Approx(1.0));
    CHECK(expectation(w, z) == doctest::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("exp_minus_i and eigenspaces")
{
    HermitianOperator z(sz());
    GeneralOperator u = exp_minus_i(z, 0.3);
    CHECK(std::abs(u(0, 0) - std::polar(1.0, -0.3)) < 1e-14);
    CHECK(std::abs(u(1, 1) - std::polar(1.0, 0.3)) < 1e-14);

    GeneralOperator p(3, 3);
    p << 1, 0, 0, 0, 1, 0, 0, 0, -2;
    auto es = eigenspaces(HermitianOperator(p));
    REQUIRE(es.size() == 2);
    CHECK(es[0].value == doctest::Approx(-2.0));
    CHECK(es[1].projector.trace().real() == doctest::Approx(2.0));
}

TEST_CASE("property: adjointness of Hermitian operators")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        int d = 2 + trial % 7;
        HermitianOperator a(random_hermitian(d, rng));
        StateVector psi = random_state(d, rng), phi = random_state(d, rng);
        cplx lhs = l2_inner(a.mat() * psi, phi);
        cplx rhs = l2_inner(psi, a.mat() * phi);
        CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("property: hermitian_sqrt round trip")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        int d = 2 + trial % 6;
        GeneralOperator a = random_matrix(d, rng);
        GeneralOperator b = a * a.adjoint() + 0.1 * GeneralOperator::Identity(d, d);
        HermitianOperator bb = HermitianOperator::symmetrized(b * b);
        GeneralOperator r = hermitian_sqrt(bb).mat();
        CHECK(max_abs(r - b) <= 1e-7 * max_abs(b));
    }
}

TEST_CASE("property: trace distance triangle inequality")
{
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        int d = 2 + trial % 5;
        GeneralOperator a = random_density(d, rng), b = random_density(d, rng), c = random_density(d, rng);
        CHECK(trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-9);
        CHECK(trace_distance(a, b) <= 1.0 + 1e-12);
    }
}

TEST_CASE("time grid")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.01);
    CHECK(g.n == 101);
    CHECK(g.half_count() == 201);
    CHECK(g.index_of(0.5) == 50);
    CHECK(g.index_of(0.505) == -1);
    CHECK(error_code([] { TimeGrid::make(0.0, 1.0, 0.3); }) == "schema-error");
    CHECK(error_code([] { TimeGrid::make(1.0, 0.0, 0.1); }) == "schema-error");
}
