#include "collapse/hilbert.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include "collapse/error.hpp"

namespace collapse {

void warn_once(const std::string& message)
{
    static std::mutex mu;
    static std::set<std::string> seen;
    std::lock_guard<std::mutex> lock(mu);
    if (seen.insert(message).second) std::cerr << "warning: " << message << "\n";
}

double max_abs(const GeneralOperator& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double hermiticity_residual(const GeneralOperator& m)
{
    return max_abs(m - m.adjoint());
}

GeneralOperator commutator(const GeneralOperator& a, const GeneralOperator& b)
{
    return a * b - b * a;
}

void require_same_dim(long a, long b, const char* where)
{
    if (a != b) {
        std::ostringstream os;
        os << where << ": dimensions " << a << " and " << b << " differ";
        fail("dim-mismatch", os.str());
    }
}

static void require_finite(const GeneralOperator& m, const char* what)
{
    if (!m.allFinite()) fail("schema-error", std::string(what) + " has non-finite entries");
}

HermitianOperator::HermitianOperator(GeneralOperator m, const char* what) : m_(std::move(m))
{
    if (m_.rows() != m_.cols()) fail("dim-mismatch", std::string(what) + " is not square");
    if (m_.rows() < 1 || m_.rows() > kMaxDim)
        fail("schema-error", std::string(what) + " dimension out of range");
    require_finite(m_, what);
    double r = hermiticity_residual(m_);
    if (r > kConstructTol) {
        std::ostringstream os;
        os << what << " is not Hermitian (residual " << r << ")";
        fail("hermiticity-error", os.str());
    }
}

HermitianOperator HermitianOperator::symmetrized(const GeneralOperator& m)
{
    GeneralOperator s = 0.5 * (m + m.adjoint());
    return HermitianOperator(s);
}

DensityMatrix::DensityMatrix(GeneralOperator m, double trace) : m_(std::move(m))
{
    *this = unnormalized(m_);
    double tr = m_.trace().real();
    if (std::abs(tr - trace) > 1e-8) {
        std::ostringstream os;
        os << "density matrix trace " << tr << " differs from " << trace;
        fail("schema-error", os.str());
    }
}

DensityMatrix DensityMatrix::unnormalized(GeneralOperator m)
{
    if (m.rows() != m.cols()) fail("dim-mismatch", "density matrix is not square");
    require_finite(m, "density matrix");
    if (hermiticity_residual(m) > kConstructTol) fail("hermiticity-error", "density matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<GeneralOperator> es(m, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().size() ? es.eigenvalues().minCoeff() : 0.0;
    if (lo < -1e-8) {
        std::ostringstream os;
        os << "density matrix has eigenvalue " << lo;
        fail("positivity-violation", os.str());
    }
    return DensityMatrix(std::move(m), Unchecked{});
}

DensityMatrix DensityMatrix::pure(const StateVector& psi)
{
    StateVector p = normalized(psi);
    return DensityMatrix(p * p.adjoint(), Unchecked{});
}

TimeGrid TimeGrid::make(double t0, double t1, double h)
{
    if (!(h > 0.0) || !std::isfinite(t0) || !std::isfinite(t1) || !(t1 > t0))
        fail("schema-error", "grid needs finite t0 < t1 and h > 0");
    double steps = (t1 - t0) / h;
    double r = std::round(steps);
    if (std::abs(steps - r) > 1e-9 * std::max(1.0, steps))
        fail("schema-error", "grid span is not an integer multiple of h");
    if (r < 1.0) fail("schema-error", "grid needs at least two nodes");
    TimeGrid g;
    g.t0 = t0;
    g.t1 = t1;
    g.h = h;
    g.n = static_cast<int>(r) + 1;
    return g;
}

int TimeGrid::index_of(double t) const
{
    double x = (t - t0) / h;
    double r = std::round(x);
    if (std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x)) || r < 0 || r > n - 1) return -1;
    return static_cast<int>(r);
}

cplx l2_inner(const StateVector& psi, const StateVector& phi)
{
    require_same_dim(psi.size(), phi.size(), "l2_inner");
    return psi.dot(phi);
}

Eigensystem eig_hermitian(const HermitianOperator& a)
{
    Eigen::SelfAdjointEigenSolver<GeneralOperator> es(a.mat());
    return {es.eigenvalues(), es.eigenvectors()};
}

HermitianOperator hermitian_sqrt(const HermitianOperator& a)
{
    Eigensystem es = eig_hermitian(a);
    double lo = es.values.minCoeff();
    if (lo < kPositiveTol) {
        std::ostringstream os;
        os << "eigenvalue " << lo << " below " << kPositiveTol;
        fail("not-positive-definite", os.str());
    }
    Eigen::VectorXcd s = es.values.cwiseSqrt().cast<cplx>();
    GeneralOperator b = es.vectors * s.asDiagonal() * es.vectors.adjoint();
    return HermitianOperator::symmetrized(b);
}

double trace_distance(const GeneralOperator& s1, const GeneralOperator& s2)
{
    require_same_dim(s1.rows(), s2.rows(), "trace_distance");
    GeneralOperator d = s1 - s2;
    d = 0.5 * (d + d.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<GeneralOperator> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const DensityMatrix& s1, const DensityMatrix& s2)
{
    return trace_distance(s1.mat(), s2.mat());
}

static double norm_for_expectation(const StateVector& psi)
{
    double nn = psi.squaredNorm();
    if (std::abs(nn - 1.0) > kConstructTol) warn_once("expectation of an unnormalized state, dividing by <psi|psi>");
    return nn;
}

double expectation(const StateVector& psi, const HermitianOperator& o)
{
    require_same_dim(psi.size(), o.dim(), "expectation");
    return psi.dot(o.mat() * psi).real() / norm_for_expectation(psi);
}

double expectation_sq(const StateVector& psi, const HermitianOperator& o)
{
    require_same_dim(psi.size(), o.dim(), "expectation_sq");
    StateVector op = o.mat() * psi;
    return op.squaredNorm() / norm_for_expectation(psi);
}

GeneralOperator exp_minus_i(const HermitianOperator& a, double x)
{
    Eigensystem es = eig_hermitian(a);
    Eigen::VectorXcd ph(es.values.size());
    for (int k = 0; k < ph.size(); ++k) ph[k] = std::polar(1.0, -x * es.values[k]);
    return es.vectors * ph.asDiagonal() * es.vectors.adjoint();
}

std::vector<Eigenspace> eigenspaces(const HermitianOperator& o)
{
    Eigensystem es = eig_hermitian(o);
    double scale = std::max(1.0, es.values.cwiseAbs().maxCoeff());
    std::vector<Eigenspace> out;
    int d = static_cast<int>(es.values.size());
    for (int k = 0; k < d;) {
        int j = k;
        while (j + 1 < d && es.values[j + 1] - es.values[k] <= 1e-8 * scale) ++j;
        GeneralOperator v = es.vectors.middleCols(k, j - k + 1);
        out.push_back({es.values.segment(k, j - k + 1).mean(), v * v.adjoint()});
        k = j + 1;
    }
    return out;
}

StateVector normalized(const StateVector& psi)
{
    double n = psi.norm();
    if (!(n > 0.0)) fail("schema-error", "cannot normalize the zero vector");
    return psi / n;
}

}  // namespace collapse
