#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "collapse/hilbert.hpp"

namespace collapse {

// Running entrywise mean and standard error of complex matrices (Welford
// updates), with the real and imaginary parts treated as separate variables.
// Samples must be added in a fixed order for reproducible output.
class MatrixMoments {
public:
    MatrixMoments() = default;
    MatrixMoments(int rows, int cols);

    void add(const GeneralOperator& x);
    long count() const { return n_; }
    const GeneralOperator& mean() const { return mean_; }
    // Standard error of the mean, real part in .real(), imaginary in .imag().
    GeneralOperator standard_error() const;

private:
    long n_ = 0;
    GeneralOperator mean_;
    Eigen::MatrixXd m2_re_, m2_im_;
};

struct ScalarMoments {
    long n = 0;
    double mu = 0.0;
    double m2 = 0.0;

    void add(double x)
    {
        ++n;
        double delta = x - mu;
        mu += delta / static_cast<double>(n);
        m2 += delta * (x - mu);
    }
    double mean() const { return mu; }
    double sd() const { return n < 2 ? 0.0 : std::sqrt(std::max(0.0, m2 / static_cast<double>(n - 1))); }
    double se() const { return n ? sd() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

// Largest |mc - analytic| / se over real and imaginary parts of all entries.
// Entries with zero se count only if the difference exceeds abs_floor.
struct ZScore {
    double z = 0.0;
    double max_abs_diff = 0.0;
    double max_se = 0.0;
};
ZScore entrywise_z(const GeneralOperator& mc, const GeneralOperator& se, const GeneralOperator& analytic,
                   double abs_floor = 1e-12);

// Least-squares slope and intercept of y against x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Wilson score interval for a binomial proportion at normal quantile z
// (2.5758 for 99%).
std::pair<double, double> wilson_interval(long successes, long trials, double z);

double normal_quantile(double p);

}  // namespace collapse
