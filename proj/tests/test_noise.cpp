#include <cmath>

#include "common.hpp"
#include "collapse/noise.hpp"
#include "collapse/stats.hpp"

using namespace collapse;
using namespace testing;

static Eigen::MatrixXcd rank_one(const GeneralOperator& phi, double lambda)
{
    Eigen::VectorXcd v = vectorize(phi);
    return lambda * v * v.adjoint();
}

TEST_CASE("diagonalize_covariance examples")
{
    CovarianceSpec zero{2, {Eigen::MatrixXcd::Zero(4, 4)}};
    CHECK(diagonalize_covariance(zero).modes.empty());

    CovarianceSpec one{2, {rank_one(sz(), 2.0)}};
    auto dc = diagonalize_covariance(one);
    REQUIRE(dc.modes.size() == 1);
    // phi normalized under the trace product: sigma_z / sqrt 2 with weight 2 * 2.
    CHECK(dc.modes[0].lambda == doctest::Approx(4.0));
    GeneralOperator phi = dc.modes[0].phi.mat();
    double sign = phi(0, 0).real() > 0 ? 1.0 : -1.0;
    CHECK(max_abs(sign * phi - sz() / std::sqrt(2.0)) < 1e-12);
    CHECK(max_abs(reconstruct_covariance(dc, 2, 0) - one.C[0]) < 1e-12);

    std::mt19937_64 rng(21);
    GeneralOperator a = random_hermitian(2, rng), b = random_hermitian(2, rng);
    CovarianceSpec two{2, {rank_one(a, 0.7) + rank_one(b, 1.3)}};
    auto d2 = diagonalize_covariance(two);
    CHECK(d2.modes.size() == 2);
    Eigen::MatrixXcd rec = reconstruct_covariance(d2, 2, 0);
    CHECK(max_abs(rec - two.C[0]) <= 1e-6 * max_abs(two.C[0]));
    for (const auto& m : d2.modes) CHECK(m.lambda > 0.0);
}

TEST_CASE("diagonalize_covariance rejects negative covariances")
{
    CovarianceSpec neg{2, {rank_one(sz(), -1.0)}};
    CHECK(error_code([&] { diagonalize_covariance(neg); }) == "covariance-not-psd");
    CovarianceSpec bad{2, {Eigen::MatrixXcd::Identity(3, 3)}};
    CHECK(error_code([&] { diagonalize_covariance(bad); }) == "dim-mismatch");
}

TEST_CASE("property: reconstruction is idempotent")
{
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        int d = 2 + trial % 3;
        Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(d * d, d * d);
        for (int k = 0; k < 3; ++k) C += rank_one(random_hermitian(d, rng), 0.5 + k);
        auto first = diagonalize_covariance({d, {C}});
        Eigen::MatrixXcd C1 = reconstruct_covariance(first, d, 0);
        auto second = diagonalize_covariance({d, {C1}});
        Eigen::MatrixXcd C2 = reconstruct_covariance(second, d, 0);
        CHECK(max_abs(C2 - C1) <= 1e-10 * max_abs(C1));
        for (std::size_t i = 0; i < first.modes.size(); ++i)
            for (std::size_t j = 0; j < first.modes.size(); ++j) {
                cplx ip = (first.modes[i].phi.mat().adjoint() * first.modes[j].phi.mat()).trace();
                CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-10);
            }
    }
}

TEST_CASE("sample_noise_path basics")
{
    TimeGrid g = TimeGrid::make(0.0, 1.0, 0.1);
    NoisePath empty = sample_noise_path(g, 0, 5);
    CHECK(empty.W.empty());

    NoisePath a = sample_noise_path(g, 2, 42), b = sample_noise_path(g, 2, 42);
    CHECK(a.W == b.W);
    CHECK(a.W[0].size() == 21u);
    NoisePath c = sample_noise_path(g, 2, 43);
    CHECK(a.W[0] != c.W[0]);
    // Channel 0 does not depend on the channel count.
    NoisePath d = sample_noise_path(g, 1, 42);
    CHECK(d.W[0] == a.W[0]);
}

TEST_CASE("sample variance matches 2/h")
{
    TimeGrid g = TimeGrid::make(0.0, 5000.0, 0.01);
    NoisePath p = sample_noise_path(g, 1, 7);
    ScalarMoments m;
    for (double x : p.W[0]) m.add(x);
    CHECK(m.n >= 1000000);
    double var = m.sd() * m.sd();
    CHECK(std::abs(var - 200.0) <= 0.01 * 200.0);
}

TEST_CASE("empirical_covariance_check")
{
    TimeGrid g = TimeGrid::make(0.0, 0.9, 0.1);
    CHECK(g.n == 10);
    std::vector<NoisePath> paths;
    for (int r = 0; r < 10000; ++r) paths.push_back(sample_noise_path(g, 2, derive_seed(99, r)));
    CovarianceCheck rep = empirical_covariance_check(paths);
    CHECK(rep.pass);
    CHECK(rep.max_z <= 5.0);
    CHECK(rep.max_mean_z <= 5.0);

    std::vector<NoisePath> one{paths.front()};
    CHECK(error_code([&] { empirical_covariance_check(one); }) == "insufficient-samples");
}

TEST_CASE("property: independent channel substreams")
{
    TimeGrid g = TimeGrid::make(0.0, 200.0, 0.01);
    NoisePath p = sample_noise_path(g, 2, 1234);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < p.W[0].size(); ++i) {
        sxy += p.W[0][i] * p.W[1][i];
        sxx += p.W[0][i] * p.W[0][i];
        syy += p.W[1][i] * p.W[1][i];
    }
    double r = sxy / std::sqrt(sxx * syy);
    double se = 1.0 / std::sqrt(static_cast<double>(p.W[0].size()));
    CHECK(std::abs(r) <= 5.0 * se);
}

TEST_CASE("derive_seed spreads indices")
{
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 9) == derive_seed(5, 9));
}
