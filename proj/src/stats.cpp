#include "collapse/stats.hpp"

#include <algorithm>
#include <limits>

#include "collapse/error.hpp"

namespace collapse {

MatrixMoments::MatrixMoments(int rows, int cols)
    : mean_(GeneralOperator::Zero(rows, cols)),
      m2_re_(Eigen::MatrixXd::Zero(rows, cols)),
      m2_im_(Eigen::MatrixXd::Zero(rows, cols))
{
}

void MatrixMoments::add(const GeneralOperator& x)
{
    ++n_;
    GeneralOperator delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_re_ += delta.real().cwiseProduct(x.real() - mean_.real());
    m2_im_ += delta.imag().cwiseProduct(x.imag() - mean_.imag());
}

GeneralOperator MatrixMoments::standard_error() const
{
    GeneralOperator se = GeneralOperator::Zero(mean_.rows(), mean_.cols());
    if (n_ < 2) return se;
    double n = static_cast<double>(n_);
    for (int r = 0; r < mean_.rows(); ++r)
        for (int c = 0; c < mean_.cols(); ++c)
            se(r, c) = cplx(std::sqrt(std::max(0.0, m2_re_(r, c)) / ((n - 1) * n)),
                            std::sqrt(std::max(0.0, m2_im_(r, c)) / ((n - 1) * n)));
    return se;
}

ZScore entrywise_z(const GeneralOperator& mc, const GeneralOperator& se, const GeneralOperator& analytic,
                   double abs_floor)
{
    require_same_dim(mc.rows(), analytic.rows(), "entrywise_z");
    require_same_dim(mc.cols(), analytic.cols(), "entrywise_z");
    ZScore out;
    auto one = [&](double diff, double s) {
        diff = std::abs(diff);
        out.max_abs_diff = std::max(out.max_abs_diff, diff);
        out.max_se = std::max(out.max_se, s);
        if (s > 0.0)
            out.z = std::max(out.z, diff / s);
        else if (diff > abs_floor)
            out.z = std::numeric_limits<double>::infinity();
    };
    for (int r = 0; r < mc.rows(); ++r)
        for (int c = 0; c < mc.cols(); ++c) {
            cplx d = mc(r, c) - analytic(r, c);
            one(d.real(), se(r, c).real());
            one(d.imag(), se(r, c).imag());
        }
    return out;
}

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) fail("insufficient-samples", "linear fit needs two points");
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

std::pair<double, double> wilson_interval(long k, long n, double z)
{
    if (n <= 0) return {0.0, 1.0};
    double p = static_cast<double>(k) / n;
    double z2 = z * z;
    double den = 1.0 + z2 / n;
    double centre = (p + z2 / (2.0 * n)) / den;
    double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / den;
    double lo = k == 0 ? 0.0 : std::max(0.0, centre - half);
    double hi = k == n ? 1.0 : std::min(1.0, centre + half);
    return {lo, hi};
}

// Acklam's rational approximation, refined by one Newton step on erfc.
double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) fail("schema-error", "quantile probability outside (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    double q, x;
    if (p < 0.02425) {
        q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p > 1 - 0.02425) {
        q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else {
        q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    }
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

}  // namespace collapse
