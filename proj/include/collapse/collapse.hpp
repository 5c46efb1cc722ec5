#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "collapse/temporal.hpp"

namespace collapse {

inline constexpr double kDefaultThreshold = 0.95;
inline constexpr double kZ99 = 2.5758293035489004;

struct CollapseConfig {
    TemporalModelSpec spec;  // mutually commuting N_k
    HermitianOperator observable;
    StateVector psi0;
    TimeGrid grid;
    int R = 4000;
    std::uint64_t base_seed = 1;
    double p_c = kDefaultThreshold;
    DysonOptions dyson;

    void validate() const;
};

struct BornRow {
    double eigenvalue;
    double predicted;
    double observed;
    double ci_lo, ci_hi;
    long count;
    bool inside;  // predicted weight within the 99% interval
};

struct CollapseReport {
    std::vector<double> t;
    std::vector<double> c;  // 1 / sqrt << (psi|psi) >>
    std::vector<double> martingale_mean, martingale_se;
    double martingale_drift = 0.0;
    double martingale_z = 0.0;
    std::vector<double> variance_mean, variance_se;
    double variance_ratio = 0.0;  // final over initial; 0 when both vanish
    bool variance_monotone = false;
    std::vector<BornRow> born_table;
    double unresolved_fraction = 0.0;
    double endpoint_residual = 0.0;
    double gamma_T = 0.0;
    int failed = 0;
    int R = 0;
};

CollapseReport run_collapse_experiment(const CollapseConfig& cfg);

struct VarianceRateRow {
    double t_a, t_b;
    double lhs, lhs_se;
    double rhs, rhs_se;
    double z;
    bool non_positive;  // lhs <= 5 se
};

struct VarianceRateReport {
    std::vector<VarianceRateRow> rows;
    bool pass = false;
};

VarianceRateReport variance_rate_check(const CollapseConfig& cfg, const std::vector<double>& sample_times);

struct CompositeReport {
    GeneralOperator operator_estimate;
    double deviation_from_scalar = 0.0;
};

CompositeReport composite_check(const TemporalModelSpec& spec, double t);

inline constexpr double kUnresolved = std::numeric_limits<double>::infinity();

struct HartreeFockRow {
    int q;
    double median;  // infinity when more than half the composites are unresolved
    double ci_lo, ci_hi;
    long unresolved;
};

struct HartreeFockReport {
    std::vector<HartreeFockRow> rows;
    double single_particle_median = kUnresolved;
    bool monotone = false;
    int R = 0;
};

HartreeFockReport hartree_fock_demo(const CollapseConfig& cfg, const std::vector<int>& q_list);

// First node time at which some eigenspace of o carries weight >= p_c, or
// kUnresolved.
double collapse_time(const std::vector<StateVector>& states, const TimeGrid& grid, const std::vector<Eigenspace>& es,
                     double p_c);

}  // namespace collapse
