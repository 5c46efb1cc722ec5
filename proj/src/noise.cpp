#include "collapse/noise.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "collapse/error.hpp"

namespace collapse {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index)
{
    return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

Eigen::VectorXcd vectorize(const GeneralOperator& m)
{
    int d = static_cast<int>(m.rows());
    Eigen::VectorXcd v(d * d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) v[r * d + c] = m(r, c);
    return v;
}

// Orthonormal basis of the Hermitian matrices under tr(A^dagger B), as columns
// of vectorized matrices.
static Eigen::MatrixXcd hermitian_basis(int d)
{
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(d * d, d * d);
    int col = 0;
    const double s = 1.0 / std::sqrt(2.0);
    for (int r = 0; r < d; ++r) B(r * d + r, col++) = 1.0;
    for (int r = 0; r < d; ++r) {
        for (int c = r + 1; c < d; ++c) {
            B(r * d + c, col) = s;
            B(c * d + r, col) = s;
            ++col;
            B(r * d + c, col) = cplx(0.0, s);
            B(c * d + r, col) = cplx(0.0, -s);
            ++col;
        }
    }
    return B;
}

DiagonalizedCovariance diagonalize_covariance(const CovarianceSpec& spec)
{
    int d = spec.dim;
    if (d < 1 || d > kMaxDim) fail("schema-error", "covariance dimension out of range");
    Eigen::MatrixXcd B = hermitian_basis(d);
    DiagonalizedCovariance out;
    for (int a = 0; a < static_cast<int>(spec.C.size()); ++a) {
        const Eigen::MatrixXcd& C = spec.C[a];
        if (C.rows() != d * d || C.cols() != d * d) {
            std::ostringstream os;
            os << "covariance " << a << " must be " << d * d << "x" << d * d;
            fail("dim-mismatch", os.str());
        }
        double scale = max_abs(C);
        if (hermiticity_residual(C) > kConstructTol * std::max(1.0, scale)) {
            std::ostringstream os;
            os << "covariance " << a << " is not Hermitian";
            fail("hermiticity-error", os.str());
        }
        if (scale == 0.0) continue;
        Eigen::MatrixXcd Ct = B.adjoint() * C * B;
        if (Ct.imag().cwiseAbs().maxCoeff() > 1e-8 * scale) {
            std::ostringstream os;
            os << "covariance " << a << " does not map Hermitian matrices to Hermitian matrices";
            fail("schema-error", os.str());
        }
        Eigen::MatrixXd Cr = 0.5 * (Ct.real() + Ct.real().transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Cr);
        double top = std::max(0.0, es.eigenvalues().maxCoeff());
        for (int k = static_cast<int>(es.eigenvalues().size()) - 1; k >= 0; --k) {
            double lam = es.eigenvalues()[k];
            if (lam < -1e-8 * scale) {
                std::ostringstream os;
                os << "covariance " << a << " has eigenvalue " << lam;
                fail("covariance-not-psd", os.str());
            }
            if (lam <= 1e-12 * top) continue;
            Eigen::VectorXcd v = B * es.eigenvectors().col(k).cast<cplx>();
            GeneralOperator phi(d, d);
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) phi(r, c) = v[r * d + c];
            out.modes.push_back({lam, HermitianOperator::symmetrized(phi), a});
        }
    }
    return out;
}

Eigen::MatrixXcd reconstruct_covariance(const DiagonalizedCovariance& dc, int dim, int channel)
{
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(dim * dim, dim * dim);
    for (const auto& m : dc.modes) {
        if (m.channel != channel) continue;
        Eigen::VectorXcd v = vectorize(m.phi.mat());
        C += m.lambda * v * v.adjoint();
    }
    return C;
}

NoisePath sample_noise_path(const TimeGrid& grid, int channel_count, std::uint64_t seed)
{
    NoisePath p;
    p.grid = grid;
    p.channel_count = channel_count;
    p.seed = seed;
    p.W.resize(channel_count);
    const double sd = std::sqrt(2.0 / grid.h);
    for (int k = 0; k < channel_count; ++k) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        std::normal_distribution<double> nd(0.0, sd);
        auto& w = p.W[k];
        w.resize(grid.half_count());
        for (double& x : w) x = nd(rng);
    }
    return p;
}

CovarianceCheck empirical_covariance_check(const std::vector<NoisePath>& paths)
{
    const std::size_t R = paths.size();
    if (R < 1000) fail("insufficient-samples", "covariance check needs at least 1000 paths");
    const NoisePath& p0 = paths.front();
    const int C = p0.channel_count;
    const int H = p0.grid.half_count();
    for (const auto& p : paths)
        if (p.channel_count != C || p.grid.half_count() != H) fail("dim-mismatch", "noise paths on different grids");

    const double var = 2.0 / p0.grid.h;
    const int M = C * H;
    auto value = [&](const NoisePath& p, int idx) { return p.W[idx / H][idx % H]; };

    CovarianceCheck rep;
    std::vector<double> mean(M, 0.0), m2(M, 0.0);
    for (const auto& p : paths)
        for (int i = 0; i < M; ++i) {
            double x = value(p, i);
            mean[i] += x;
        }
    for (double& m : mean) m /= static_cast<double>(R);
    for (int i = 0; i < M; ++i) {
        double se = std::sqrt(var / static_cast<double>(R));
        rep.max_mean_z = std::max(rep.max_mean_z, std::abs(mean[i]) / se);
    }
    // Second moments about zero: target var on the diagonal (SE sqrt(2/R) var), 0 off it (SE var/sqrt(R)).
    for (int i = 0; i < M; ++i) {
        for (int j = i; j < M; ++j) {
            double s = 0.0, s2 = 0.0;
            for (const auto& p : paths) {
                double x = value(p, i) * value(p, j);
                s += x;
                s2 += x * x;
            }
            double m = s / static_cast<double>(R);
            double sd = std::sqrt(std::max(0.0, s2 / static_cast<double>(R) - m * m));
            double se = sd / std::sqrt(static_cast<double>(R));
            double target = (i == j) ? var : 0.0;
            double dev = std::abs(m - target);
            rep.max_abs_dev = std::max(rep.max_abs_dev, dev);
            if (se > 0.0) rep.max_z = std::max(rep.max_z, dev / se);
        }
    }
    rep.pass = rep.max_z <= 5.0 && rep.max_mean_z <= 5.0;
    return rep;
}

}  // namespace collapse
