#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "collapse/hilbert.hpp"
#include "collapse/noise.hpp"
#include "collapse/quadrature.hpp"
#include "collapse/spatial.hpp"

namespace collapse {

enum class KernelForm { Box, Triangle, GaussTruncated, Modulated };

std::string to_string(KernelForm f);
KernelForm kernel_form_from(const std::string& s);

// Delta(tau), normalized so that the real base profile integrates to g.
// Jump discontinuities at |tau| = ell take the mean of both sides.
struct KernelProfile {
    KernelForm form = KernelForm::Box;
    double ell = 0.1;
    double g = 1.0;
    double omega = 0.0;              // modulated only
    KernelForm base = KernelForm::Box;  // profile under the modulation

    void validate() const;
    double base_value(double tau) const;
    cplx value(double tau) const;
    double max_abs() const;
    bool real_even() const { return form != KernelForm::Modulated || omega == 0.0; }
    // Delta((m) h) for m = -K .. K, K = floor(ell / h).
    std::vector<cplx> sample(double h) const;
    int support_lag(double h) const;
};

struct Channel {
    HermitianOperator N;
    KernelProfile kernel;
};

// w(s): 0 within 2 ell of either end, smoothstep ramps of width 2 ell, 1 inside.
struct Envelope {
    double t0 = 0.0;
    double t1 = 1.0;
    double ell = 0.0;
    bool enabled = true;

    double operator()(double s) const;
    std::vector<double> knots() const;
};

struct TemporalModelSpec {
    int dim = 0;
    std::vector<Channel> channels;
    Envelope window;
    std::optional<HermitianOperator> H0;

    void validate() const;
    double ell_max() const;
    // |V| (2 ell) (t1 - t0) with |V| bounded by the noise-free kernel maximum times |N|.
    double contraction_bound() const;
    void require_contraction() const;
};

TemporalModelSpec make_temporal_spec(int dim, std::vector<Channel> channels, double t0, double t1,
                                     bool windowed = true);

// Sampled potential for one noise realization. V(t_i, t_j) = sum_c coeff(c,i,j) N_c.
class Potential {
public:
    Potential(const TemporalModelSpec& spec, const TimeGrid& grid, const NoisePath& noise);

    int channels() const { return static_cast<int>(N_.size()); }
    int support() const { return K_; }
    const TimeGrid& grid() const { return grid_; }
    const GeneralOperator& N(int c) const { return N_[c]; }
    cplx coeff(int c, int i, int j) const
    {
        int lag = j - i;
        if (lag > Kc_[c] || lag < -Kc_[c] || i < 0 || j < 0 || i >= grid_.n || j >= grid_.n) return 0.0;
        return kern_[c][lag + Kc_[c]] * wind_[i + j] * (*W_)[c][i + j];
    }
    GeneralOperator eval(int i, int j) const;

private:
    TimeGrid grid_;
    std::vector<GeneralOperator> N_;
    std::vector<std::vector<cplx>> kern_;
    std::vector<int> Kc_;
    std::vector<double> wind_;
    const std::vector<std::vector<double>>* W_;
    int K_ = 0;
};

GeneralOperator eval_potential(const TemporalModelSpec& spec, const NoisePath& noise, double ti, double tj);

// Direct: sparse LU of the full banded system, for amplitudes where the
// iterations do not contract.
enum class DysonSolver { FixedPoint, WindowedSweep, Direct };

struct DysonOptions {
    DysonSolver solver = DysonSolver::WindowedSweep;
    double tol = 1e-12;
    int max_iter = 500;
};

struct DysonResult {
    TrajectoryRecord traj;
    int iterations = 0;
    std::vector<double> residuals;
};

DysonResult solve_nonlocal_dyson(const Potential& pot, const StateVector& psi0, const DysonOptions& opts);
DysonResult solve_nonlocal_dyson(const TemporalModelSpec& spec, const NoisePath& noise, const TimeGrid& grid,
                                 const StateVector& psi0, const DysonOptions& opts);

// First-order Dyson term -i int_t0^t dtau int dzeta V(tau, zeta) psi0 at every node.
std::vector<StateVector> first_order_dyson(const Potential& pot, const StateVector& psi0);

// Theta(0) weight used on the t = tau and t = tau' lines of the straddling regions.
inline constexpr double kTheta0 = 0.5;

cplx commutator_inner_product(const TrajectoryRecord& psi, const TrajectoryRecord& phi, int node,
                              const Potential& pot, double theta0 = kTheta0);
cplx commutator_inner_product(const TrajectoryRecord& psi, const TrajectoryRecord& phi, double t,
                              const TemporalModelSpec& spec, const NoisePath& noise);

enum class Propagation { Identity, Dyson };

struct SOperatorResult {
    double t = 0.0;
    GeneralOperator S;
    int order = 1;
    double min_eig_of_1_plus_S = 1.0;
};

class SBuilder {
public:
    SBuilder(const Potential& pot, Propagation prop, double theta0 = kTheta0, const DysonOptions& opts = {});
    // Requires node at least support() away from both grid ends.
    SOperatorResult at(int node) const;
    // Same sum without the window check; nodes near the ends give S = 0.
    GeneralOperator raw(int node) const;

private:
    const Potential& pot_;
    Propagation prop_;
    double theta0_;
    std::vector<GeneralOperator> U_;  // propagators from t0 when prop_ = Dyson
};

SOperatorResult build_S_operator(double t, const TemporalModelSpec& spec, const NoisePath& noise,
                                 Propagation prop = Propagation::Identity, double theta0 = kTheta0);

StateVector transform_state(const StateVector& psi, const SOperatorResult& S);

// Kernel integrals under the separable form.
double rate_a(const KernelProfile& k, double zeta);
double rate_b(const KernelProfile& k, double zeta);
cplx y_integral(const KernelProfile& k, double zeta);  // int_{-inf}^{zeta} Delta(-2 nu) d nu
cplx z_integral(const KernelProfile& k, double zeta);  // int_{-inf}^{-zeta} Delta(-2 nu) d nu
std::vector<double> zeta_breaks(const KernelProfile& k);

struct RateTable {
    std::vector<double> zeta;
    std::vector<double> a;
    std::vector<double> b;
    double gamma = 0.0;
};

RateTable rates_ab(const KernelProfile& k, double dzeta = 0.0);
double lindblad_rate(const KernelProfile& k);

struct XYZ {
    GeneralOperator X, Y, Z;
};
struct AB {
    HermitianOperator A, B;
};

// Envelope weight w(t + zeta) included when the spec window is enabled.
XYZ build_XYZ(double t, double zeta, const Channel& ch, const Envelope* window = nullptr);
AB build_AB(double zeta, const Channel& ch);
HermitianOperator kossakowski_K(double zeta, const Channel& ch);

struct EffectiveHamiltonian {
    HermitianOperator H;
    GeneralOperator hn1, hn2, hn3;
    double hermiticity_residual = 0.0;
};

EffectiveHamiltonian effective_hamiltonian(double t, const TemporalModelSpec& spec);

class TemporalLindblad {
public:
    TemporalLindblad(const TemporalModelSpec& spec, bool include_H);
    double dissipation(int channel, double t) const;  // int a b w(t+zeta)^2
    cplx hamiltonian_coeff(int channel, double t) const;
    GeneralOperator rhs(const GeneralOperator& sigma, double t) const;

private:
    const TemporalModelSpec& spec_;
    bool include_H_;
    struct Table {
        std::vector<double> zeta, weight, ab;
        std::vector<cplx> h3;
    };
    std::vector<Table> tables_;
    double window_weight(double t, double zeta) const;
};

// Plateau form (envelope 1) when t is absent.
GeneralOperator lindblad_rhs_temporal(const GeneralOperator& sigma, const TemporalModelSpec& spec, bool include_H,
                                      std::optional<double> t = std::nullopt);
std::vector<GeneralOperator> integrate_lindblad_temporal(const DensityMatrix& sigma0, const TemporalModelSpec& spec,
                                                         const TimeGrid& grid, bool include_H = true);

std::vector<GeneralOperator> ensemble_density_temporal(const std::vector<TrajectoryRecord>& trajectories,
                                                       const TemporalModelSpec& spec,
                                                       const std::vector<NoisePath>& noise_paths,
                                                       bool use_commutator_ip);

// States psi~ = sqrt(1 + S_t) psi at every node, S built with identity propagation.
std::vector<StateVector> transformed_states(const Potential& pot, const std::vector<StateVector>& psi,
                                            double theta0 = kTheta0);

}  // namespace collapse
