// Helpers shared by the unit tests: random matrices and small comparisons.
#pragma once

#include "raylink/linalg.hpp"
#include "raylink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace testing {

using raylink::Rng;
using raylink::linalg::Complex;
using raylink::linalg::ComplexMatrix;

inline Complex random_complex(Rng& rng) { return {rng.normal(), rng.normal()}; }

inline ComplexMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng)
{
    ComplexMatrix m(rows, cols);
    for (auto& z : m.entries()) z = random_complex(rng);
    return m;
}

inline ComplexMatrix random_hermitian(std::size_t n, Rng& rng)
{
    const ComplexMatrix a = random_matrix(n, n, rng);
    ComplexMatrix h = a + a.adjoint();
    h *= 0.5;
    return h;
}

/// A^H A for a random rows x n matrix; rank min(rows, n).
inline ComplexMatrix random_gram(std::size_t n, std::size_t rows, Rng& rng)
{
    const ComplexMatrix a = random_matrix(rows, n, rng);
    return a.adjoint() * a;
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.entries().size(); ++i) d = std::max(d, std::abs(a.entries()[i] - b.entries()[i]));
    return d;
}

inline std::vector<Complex> random_unit_vector(std::size_t n, Rng& rng)
{
    std::vector<Complex> v(n);
    double s = 0.0;
    for (auto& z : v) {
        z = random_complex(rng);
        s += std::norm(z);
    }
    for (auto& z : v) z /= std::sqrt(s);
    return v;
}

}  // namespace testing
