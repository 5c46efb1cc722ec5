#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "collapse/hilbert.hpp"
#include "collapse/noise.hpp"

namespace collapse {

struct SpatialModelSpec {
    int dim = 0;
    std::vector<HermitianOperator> M;
    std::optional<HermitianOperator> H0;  // Schroedinger picture when present

    void validate() const;
};

enum class Stepper { UnitaryExp, EulerMaruyama };

struct TrajectoryRecord {
    TimeGrid grid;
    std::vector<StateVector> states;
    std::uint64_t seed = 0;
    std::vector<double> norm_series;
};

// Increment of channel k over state step [t_n, t_n+1]: (h/2)(W_2n + W_2n+1).
double step_increment(const NoisePath& noise, int channel, int step);

TrajectoryRecord evolve_spatial_trajectory(const SpatialModelSpec& spec, const StateVector& psi0,
                                           const TimeGrid& grid, const NoisePath& noise, Stepper stepper);

GeneralOperator lindblad_rhs_spatial(const GeneralOperator& sigma, const SpatialModelSpec& spec);

// Classical RK4; returns sigma at every grid node.
std::vector<GeneralOperator> integrate_lindblad_spatial(const DensityMatrix& sigma0, const SpatialModelSpec& spec,
                                                        const TimeGrid& grid);

enum class NormalizeMode { Raw, L2 };

std::vector<GeneralOperator> ensemble_density(const std::vector<TrajectoryRecord>& trajectories,
                                              NormalizeMode mode);

// Streaming form of ensemble_density used by the large runs.
class DensityAccumulator {
public:
    DensityAccumulator(int nodes, int dim);
    void add(const std::vector<StateVector>& states, NormalizeMode mode);
    std::vector<GeneralOperator> mean() const;
    long count() const { return count_; }

private:
    std::vector<GeneralOperator> sum_;
    long count_ = 0;
};

struct SpatialEnsembleRun {
    std::vector<GeneralOperator> density;  // per node
    std::vector<double> variance_mean;     // ensemble mean of <O^2> - <O>^2, if an observable was given
    std::vector<double> variance_se;
    std::vector<double> observable_mean;
    std::vector<double> observable_se;
    std::vector<double> max_norm_drift;    // per trajectory |norm_i - norm_0| maximum
};

SpatialEnsembleRun run_spatial_ensemble(const SpatialModelSpec& spec, const StateVector& psi0, const TimeGrid& grid,
                                        int R, std::uint64_t base_seed, Stepper stepper,
                                        const HermitianOperator* observable);

struct NoCollapseReport {
    std::vector<double> variance_series;
    std::vector<double> se_series;
    double max_drift = 0.0;
    double max_z = 0.0;
    bool pass = false;
};

NoCollapseReport no_collapse_check(const SpatialModelSpec& spec, const HermitianOperator& observable,
                                   const StateVector& psi0, const TimeGrid& grid, int R, std::uint64_t base_seed,
                                   Stepper stepper = Stepper::UnitaryExp);

void require_commuting(const HermitianOperator& o, const std::vector<HermitianOperator>& ops, const char* what);

}  // namespace collapse
