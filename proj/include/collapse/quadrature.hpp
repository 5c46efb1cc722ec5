#pragma once

#include <functional>
#include <vector>

#include "collapse/hilbert.hpp"

namespace collapse {

// Composite Gauss-Legendre rules on panels whose edges include every listed
// breakpoint, so piecewise-smooth integrands converge at the smooth rate.
struct QuadratureRule {
    int order = 12;            // points per panel
    int panels_per_piece = 4;  // equal panels between consecutive breakpoints
};

std::vector<double> sorted_breaks(double a, double b, std::vector<double> breaks);

cplx integrate_1d(const std::function<cplx(double)>& f, double a, double b, const std::vector<double>& breaks,
                  const QuadratureRule& rule = {});

// Same integral at rule and at doubled panel count; throws "quadrature-unstable"
// when the relative change exceeds rel_tol.
cplx integrate_1d_checked(const std::function<cplx(double)>& f, double a, double b,
                          const std::vector<double>& breaks, QuadratureRule rule = {}, double rel_tol = 1e-6);

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

}  // namespace collapse
