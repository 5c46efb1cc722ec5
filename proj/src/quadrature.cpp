#include "collapse/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "collapse/error.hpp"

namespace collapse {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w)
{
    static std::mutex mu;
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) {
        std::vector<double> xs(n), ws(n);
        for (int i = 0; i < n; ++i) {
            double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1.0);
                double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            xs[i] = z;
            ws[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        it = cache.emplace(n, std::make_pair(xs, ws)).first;
    }
    x = it->second.first;
    w = it->second.second;
}

std::vector<double> sorted_breaks(double a, double b, std::vector<double> breaks)
{
    std::vector<double> out{a};
    std::sort(breaks.begin(), breaks.end());
    double tol = 1e-14 * std::max({1.0, std::abs(a), std::abs(b)});
    for (double x : breaks)
        if (x > a + tol && x < b - tol && x > out.back() + tol) out.push_back(x);
    out.push_back(b);
    return out;
}

cplx integrate_1d(const std::function<cplx(double)>& f, double a, double b, const std::vector<double>& breaks,
                  const QuadratureRule& rule)
{
    if (!(b > a)) return b == a ? cplx(0.0) : -integrate_1d(f, b, a, breaks, rule);
    std::vector<double> x, w;
    gauss_legendre(rule.order, x, w);
    std::vector<double> edges = sorted_breaks(a, b, breaks);
    cplx total = 0.0;
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        double lo = edges[s];
        double step = (edges[s + 1] - lo) / rule.panels_per_piece;
        for (int p = 0; p < rule.panels_per_piece; ++p) {
            double pa = lo + p * step, half = 0.5 * step, mid = pa + half;
            cplx acc = 0.0;
            for (int k = 0; k < rule.order; ++k) acc += w[k] * f(mid + half * x[k]);
            total += half * acc;
        }
    }
    return total;
}

cplx integrate_1d_checked(const std::function<cplx(double)>& f, double a, double b,
                          const std::vector<double>& breaks, QuadratureRule rule, double rel_tol)
{
    cplx coarse = integrate_1d(f, a, b, breaks, rule);
    rule.panels_per_piece *= 2;
    cplx fine = integrate_1d(f, a, b, breaks, rule);
    double scale = std::max(std::abs(fine), 1e-300);
    if (std::abs(fine - coarse) > rel_tol * scale && std::abs(fine - coarse) > 1e-14) {
        std::ostringstream os;
        os << "relative change " << std::abs(fine - coarse) / scale << " under panel doubling";
        fail("quadrature-unstable", os.str());
    }
    return fine;
}

}  // namespace collapse
