#pragma once

#include <random>
#include <string>

#include <doctest.h>

#include "collapse/error.hpp"
#include "collapse/hilbert.hpp"

namespace testing {

using namespace collapse;

inline std::string error_code(auto&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

inline GeneralOperator sx()
{
    GeneralOperator m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline GeneralOperator sz()
{
    GeneralOperator m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

inline GeneralOperator random_matrix(int d, std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    GeneralOperator m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
    return m;
}

inline GeneralOperator random_hermitian(int d, std::mt19937_64& rng)
{
    GeneralOperator m = random_matrix(d, rng);
    return 0.5 * (m + m.adjoint());
}

inline StateVector random_state(int d, std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    StateVector v(d);
    for (int i = 0; i < d; ++i) v(i) = cplx(n(rng), n(rng));
    return v.normalized();
}

inline GeneralOperator random_density(int d, std::mt19937_64& rng)
{
    GeneralOperator a = random_matrix(d, rng);
    GeneralOperator r = a * a.adjoint();
    return r / r.trace().real();
}

}  // namespace testing
