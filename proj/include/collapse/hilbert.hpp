#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace collapse {

using cplx = std::complex<double>;
using StateVector = Eigen::VectorXcd;
using GeneralOperator = Eigen::MatrixXcd;

inline constexpr double kConstructTol = 1e-10;
inline constexpr double kResidualTol = 1e-8;
inline constexpr double kPositiveTol = 1e-10;
inline constexpr int kMaxDim = 256;

class HermitianOperator {
public:
    HermitianOperator() = default;
    explicit HermitianOperator(GeneralOperator m, const char* what = "operator");

    // Averages m with its adjoint instead of rejecting small asymmetries.
    static HermitianOperator symmetrized(const GeneralOperator& m);

    const GeneralOperator& mat() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

private:
    GeneralOperator m_;
};

class DensityMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(GeneralOperator m, double trace = 1.0);

    static DensityMatrix pure(const StateVector& psi);
    // Hermitian and positive, trace taken as whatever it is.
    static DensityMatrix unnormalized(GeneralOperator m);

    const GeneralOperator& mat() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

private:
    struct Unchecked {};
    DensityMatrix(GeneralOperator m, Unchecked) : m_(std::move(m)) {}
    GeneralOperator m_;
};

struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    double h = 0.1;
    int n = 11;

    static TimeGrid make(double t0, double t1, double h);

    double t(int i) const { return t0 + h * i; }
    // Noise lives on the half grid s_j = t0 + j h/2, j = 0 .. 2n-2.
    double half(int j) const { return t0 + 0.5 * h * j; }
    int half_count() const { return 2 * n - 1; }
    // Index of the node at time t, or -1 when t is not a node.
    int index_of(double t) const;
    double span() const { return t1 - t0; }
};

struct Eigensystem {
    Eigen::VectorXd values;   // ascending
    GeneralOperator vectors;  // orthonormal columns
};

void require_same_dim(long a, long b, const char* where);

cplx l2_inner(const StateVector& psi, const StateVector& phi);
Eigensystem eig_hermitian(const HermitianOperator& a);
HermitianOperator hermitian_sqrt(const HermitianOperator& a);
double trace_distance(const DensityMatrix& s1, const DensityMatrix& s2);
double trace_distance(const GeneralOperator& s1, const GeneralOperator& s2);
double expectation(const StateVector& psi, const HermitianOperator& o);
double expectation_sq(const StateVector& psi, const HermitianOperator& o);

// exp(-i x A) for Hermitian A and real x.
GeneralOperator exp_minus_i(const HermitianOperator& a, double x);

// Spectral projectors of o, degenerate eigenvalues merged (tolerance 1e-8 |o|).
struct Eigenspace {
    double value;
    GeneralOperator projector;
};
std::vector<Eigenspace> eigenspaces(const HermitianOperator& o);

double max_abs(const GeneralOperator& m);
double hermiticity_residual(const GeneralOperator& m);
GeneralOperator commutator(const GeneralOperator& a, const GeneralOperator& b);
StateVector normalized(const StateVector& psi);

}  // namespace collapse
