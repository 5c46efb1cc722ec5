#pragma once

#include <cstdint>
#include <vector>

#include "collapse/hilbert.hpp"

namespace collapse {

// One d^2 x d^2 matrix per raw channel a, vectorized row-major on (row, col).
struct CovarianceSpec {
    int dim = 0;
    std::vector<Eigen::MatrixXcd> C;
};

struct CovarianceMode {
    double lambda;
    HermitianOperator phi;
    int channel;
};

struct DiagonalizedCovariance {
    std::vector<CovarianceMode> modes;
};

DiagonalizedCovariance diagonalize_covariance(const CovarianceSpec& spec);
Eigen::MatrixXcd reconstruct_covariance(const DiagonalizedCovariance& dc, int dim, int channel);
Eigen::VectorXcd vectorize(const GeneralOperator& m);

// Seeds: trajectory r of a run uses derive_seed(base_seed, r); channel k of
// that trajectory draws from mt19937_64 seeded with derive_seed(trajectory_seed, k).
// Each channel path is one contiguous block of normals in half-node order.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct NoisePath {
    TimeGrid grid;  // state grid; values live on its half grid
    int channel_count = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> W;  // W[channel][half node]

    double at(int channel, int half_index) const { return W[channel][half_index]; }
};

NoisePath sample_noise_path(const TimeGrid& grid, int channel_count, std::uint64_t seed);

struct CovarianceCheck {
    double max_abs_dev = 0.0;  // largest |empirical - target| over all moments
    double max_z = 0.0;        // same, in standard errors
    double max_mean_z = 0.0;
    bool pass = false;
};

CovarianceCheck empirical_covariance_check(const std::vector<NoisePath>& paths);

}  // namespace collapse
