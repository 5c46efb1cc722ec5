#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "collapse/temporal.hpp"

namespace collapse {

enum class PairingId { MeanDyson, KetBra, A1, A2Plus, A3, B2, B3, D1, C1 };

std::string to_string(PairingId id);
PairingId pairing_id_from(const std::string& s);
const std::vector<PairingId>& all_pairing_ids();
std::string pairing_description(PairingId id);

// Evaluation point and ensemble for one identity. The envelope must equal 1
// within ell of t so that the reduced forms apply without window factors.
struct PairingConfig {
    TemporalModelSpec spec;
    StateVector psi0;
    TimeGrid grid;
    double t = 0.0;
    int R = 10000;
    std::uint64_t base_seed = 1;
    std::string digest;
};

enum class Expression { MeanState, Projector, Pairing };

struct MCEstimate {
    GeneralOperator mean;
    GeneralOperator se;  // real part in .real(), imaginary in .imag()
    int R = 0;
};

MCEstimate mc_statistical_mean(Expression expr, const PairingConfig& cfg, PairingId id = PairingId::MeanDyson,
                               double theta0 = kTheta0);

// Scalar coefficient of the reduced form for one channel.
cplx pairing_coefficient(PairingId id, const KernelProfile& k);
// Sum over channels of coefficient times the operator structure of the identity.
GeneralOperator pairing_analytic(PairingId id, const TemporalModelSpec& spec, const StateVector& psi0);

struct ThetaScan {
    double theta0;
    double z;
    bool pass;
};

struct OracleReport {
    PairingId id;
    std::string description;
    GeneralOperator mc, analytic, se;
    std::vector<cplx> coefficients;  // per channel
    double z_score = 0.0;
    double max_abs_diff = 0.0;
    double max_se = 0.0;
    bool pass = false;
    int R = 0;
    std::uint64_t base_seed = 0;
    std::string digest;
    std::vector<ThetaScan> theta_scan;  // B3 only
};

OracleReport verify_pairing_identity(PairingId id, const PairingConfig& cfg);

// Structural checks on the reduced forms: B2 and B3 carry the same Hermitian
// sandwich, and tr D1 = (psi0 | C1 psi0).
struct ConjugacyCheck {
    double b2_b3_structure_residual = 0.0;
    double d1_c1_trace_residual = 0.0;
    bool pass = false;
};
ConjugacyCheck conjugate_structure_check(const TemporalModelSpec& spec, const StateVector& psi0);

struct ScalingProbeConfig {
    HermitianOperator N;  // diagonal
    KernelForm form = KernelForm::Box;
    StateVector psi0;
    double t0 = 0.0;
    double t1 = 1.0;
    int lags_per_ell = 10;  // h = ell / lags_per_ell
    int R = 100000;
    std::uint64_t base_seed = 1;
    bool control_variate = true;
};

struct ScalingPoint {
    double ell, g;
    double residual;
    double floor;
    bool underpowered;
};

struct ScalingReport {
    std::vector<ScalingPoint> points;
    std::vector<double> ells;
    std::vector<double> slopes;         // per ell, log-log in g
    std::vector<double> fit_residuals;  // rms of log residual about the fit
    bool ell_ordering = false;          // residual decreases with ell at every g
    bool pass = false;
};

ScalingReport nonadjacent_scaling_probe(const std::vector<double>& ell_list, const std::vector<double>& g_list,
                                        const ScalingProbeConfig& cfg);

// Ensemble density of transformed states against the temporal Lindblad flow.
struct TemporalComparison {
    std::vector<GeneralOperator> mc, lindblad;
    std::vector<double> floor;  // per node, Frobenius norm of the entrywise SE
    std::vector<double> distance;
    double max_distance = 0.0;
    double max_floor = 0.0;
    int argmax = 0;
};
TemporalComparison compare_temporal_ensemble(const TemporalModelSpec& spec, const StateVector& psi0,
                                             const TimeGrid& grid, int R, std::uint64_t base_seed,
                                             bool control_variate, bool use_commutator_ip = true,
                                             const DysonOptions& opts = {});

}  // namespace collapse
