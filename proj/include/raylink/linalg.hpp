/**
 * @file   linalg.hpp
 * @brief  Small dense complex linear algebra: Hermitian eigendecomposition,
 *         SVD, Gram-Schmidt and the nearest Hermitian PSD projection.
 *
 * Matrices handled here are at most a few tens of rows (antenna counts), so
 * every routine favors robustness over speed.
 */
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <stdexcept>
#include <vector>

namespace raylink::linalg {

using Complex = std::complex<double>;

/// Dense complex matrix, row-major, double precision.
class ComplexMatrix
{
  public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols);
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> entries);

    static ComplexMatrix identity(std::size_t n);
    static ComplexMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
    /// Builds a matrix from separate real and imaginary grids (both row-major).
    static ComplexMatrix from_parts(std::size_t rows, std::size_t cols,
                                    std::span<const double> re, std::span<const double> im);
    /// Column vector from entries.
    static ComplexMatrix column_vector(std::span<const Complex> v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }
    bool empty() const { return entries_.empty(); }

    Complex& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

    std::span<const Complex> entries() const { return entries_; }
    std::span<Complex> entries() { return entries_; }

    std::vector<double> real_part() const;
    std::vector<double> imag_part() const;

    std::vector<Complex> column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const Complex> v);

    ComplexMatrix adjoint() const;
    Complex trace() const;
    double frobenius_norm() const;
    bool all_finite() const;

    ComplexMatrix& operator+=(const ComplexMatrix& o);
    ComplexMatrix& operator-=(const ComplexMatrix& o);
    ComplexMatrix& operator*=(Complex s);

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
    friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> entries_;
};

/// Thrown when an input violates a documented precondition.
class LinalgError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown by gram_schmidt when a column is (numerically) in the span of the previous ones.
class RankDeficientError : public LinalgError
{
  public:
    RankDeficientError(std::size_t column, const std::string& what)
        : LinalgError(what), column_(column) {}
    std::size_t column() const { return column_; }

  private:
    std::size_t column_;
};

struct HermitianEig
{
    std::vector<double> eigenvalues;  ///< descending
    ComplexMatrix eigenvectors;       ///< columns, orthonormal

    /// V diag(lambda) V^H.
    ComplexMatrix reconstruct() const;
};

struct Svd
{
    ComplexMatrix u;                   ///< rows x k
    std::vector<double> singular;      ///< k values, descending
    ComplexMatrix v;                   ///< cols x k; input = U diag(s) V^H
};

double hermitian_defect(const ComplexMatrix& m);

/// Cyclic complex Jacobi. Requires ||m - m^H||_F <= 1e-8 ||m||_F.
HermitianEig hermitian_eig(const ComplexMatrix& m);

Svd svd(const ComplexMatrix& m);

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns must be
/// linearly independent (pivot tolerance 1e-10 relative to the column norm).
ComplexMatrix gram_schmidt(const ComplexMatrix& columns);

/// Nearest Hermitian positive semi-definite matrix in Frobenius norm:
/// (S + P) / 2 with S the Hermitian part and P its Hermitian polar factor.
ComplexMatrix nearest_hermitian_psd(const ComplexMatrix& m);

/// V diag(f(lambda)) V^H for a Hermitian eigendecomposition.
ComplexMatrix spectral_map(const HermitianEig& eig, double (*f)(double));

std::vector<Complex> matvec(const ComplexMatrix& m, std::span<const Complex> v);
Complex inner(std::span<const Complex> a, std::span<const Complex> b);  ///< a^H b
double norm2(std::span<const Complex> v);

}  // namespace raylink::linalg
