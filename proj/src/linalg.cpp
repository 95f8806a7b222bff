#include "raylink/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace raylink::linalg {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols)
{
}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries))
{
    if (entries_.size() != rows * cols)
        throw LinalgError("ComplexMatrix: entry count does not match rows*cols");
}

ComplexMatrix ComplexMatrix::identity(std::size_t n)
{
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::from_parts(std::size_t rows, std::size_t cols,
                                        std::span<const double> re, std::span<const double> im)
{
    if (re.size() != rows * cols || im.size() != rows * cols)
        throw LinalgError("ComplexMatrix::from_parts: grid size does not match rows*cols");
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < re.size(); ++i) m.entries_[i] = {re[i], im[i]};
    return m;
}

ComplexMatrix ComplexMatrix::column_vector(std::span<const Complex> v)
{
    return {v.size(), 1, std::vector<Complex>(v.begin(), v.end())};
}

std::vector<double> ComplexMatrix::real_part() const
{
    std::vector<double> out(entries_.size());
    std::transform(entries_.begin(), entries_.end(), out.begin(), [](Complex z) { return z.real(); });
    return out;
}

std::vector<double> ComplexMatrix::imag_part() const
{
    std::vector<double> out(entries_.size());
    std::transform(entries_.begin(), entries_.end(), out.begin(), [](Complex z) { return z.imag(); });
    return out;
}

std::vector<Complex> ComplexMatrix::column(std::size_t c) const
{
    std::vector<Complex> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void ComplexMatrix::set_column(std::size_t c, std::span<const Complex> v)
{
    if (v.size() != rows_) throw LinalgError("set_column: length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

ComplexMatrix ComplexMatrix::adjoint() const
{
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
}

Complex ComplexMatrix::trace() const
{
    Complex t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
}

double ComplexMatrix::frobenius_norm() const
{
    double s = 0.0;
    for (const auto& z : entries_) s += std::norm(z);
    return std::sqrt(s);
}

bool ComplexMatrix::all_finite() const
{
    return std::all_of(entries_.begin(), entries_.end(), [](Complex z) {
        return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& o)
{
    if (rows_ != o.rows_ || cols_ != o.cols_) throw LinalgError("matrix sum: shape mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += o.entries_[i];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& o)
{
    if (rows_ != o.rows_ || cols_ != o.cols_) throw LinalgError("matrix difference: shape mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] -= o.entries_[i];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(Complex s)
{
    for (auto& z : entries_) z *= s;
    return *this;
}

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b)
{
    if (a.cols_ != b.rows_) throw LinalgError("matrix product: inner dimensions differ");
    ComplexMatrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const Complex aik = a(i, k);
            if (aik == Complex{}) continue;
            for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

std::vector<Complex> matvec(const ComplexMatrix& m, std::span<const Complex> v)
{
    if (v.size() != m.cols()) throw LinalgError("matvec: length mismatch");
    std::vector<Complex> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        Complex s = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c) * v[c];
        out[r] = s;
    }
    return out;
}

Complex inner(std::span<const Complex> a, std::span<const Complex> b)
{
    Complex s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double norm2(std::span<const Complex> v)
{
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

double hermitian_defect(const ComplexMatrix& m)
{
    const double scale = m.frobenius_norm();
    if (scale == 0.0) return 0.0;
    return (m - m.adjoint()).frobenius_norm() / scale;
}

ComplexMatrix HermitianEig::reconstruct() const
{
    const std::size_t n = eigenvectors.rows();
    const std::size_t k = eigenvalues.size();
    ComplexMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Complex s = 0.0;
            for (std::size_t l = 0; l < k; ++l)
                s += eigenvectors(i, l) * eigenvalues[l] * std::conj(eigenvectors(j, l));
            out(i, j) = s;
        }
    return out;
}

HermitianEig hermitian_eig(const ComplexMatrix& m)
{
    if (!m.square())
        throw LinalgError("hermitian_eig: matrix is not square (" + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ")");
    if (!m.all_finite()) throw LinalgError("hermitian_eig: matrix has non-finite entries");
    const double defect = hermitian_defect(m);
    if (defect > 1e-8)
        throw LinalgError("hermitian_eig: matrix is not Hermitian (relative defect " +
                          std::to_string(defect) + " > 1e-8)");

    const std::size_t n = m.rows();
    ComplexMatrix a = m;
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = a(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const Complex avg = 0.5 * (a(i, j) + std::conj(a(j, i)));
            a(i, j) = avg;
            a(j, i) = std::conj(avg);
        }
    }
    ComplexMatrix v = ComplexMatrix::identity(n);

    const double scale = a.frobenius_norm();
    for (int sweep = 0; sweep < 100 && scale > 0.0; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
        if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double r = std::abs(a(p, q));
                if (r <= 1e-300) continue;
                const Complex phase = a(p, q) / r;  // e^{i phi}
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * r);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // U = diag(1, e^{-i phi}) * [[c, s], [-s, c]] acting on (p, q).
                const Complex upp = c;
                const Complex upq = s;
                const Complex uqp = -s * std::conj(phase);
                const Complex uqq = c * std::conj(phase);

                for (std::size_t k = 0; k < n; ++k) {  // A <- A U
                    const Complex akp = a(k, p), akq = a(k, q);
                    a(k, p) = akp * upp + akq * uqp;
                    a(k, q) = akp * upq + akq * uqq;
                }
                for (std::size_t k = 0; k < n; ++k) {  // A <- U^H A
                    const Complex apk = a(p, k), aqk = a(q, k);
                    a(p, k) = std::conj(upp) * apk + std::conj(uqp) * aqk;
                    a(q, k) = std::conj(upq) * apk + std::conj(uqq) * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {  // V <- V U
                    const Complex vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = vkp * upp + vkq * uqp;
                    v(k, q) = vkp * upq + vkq * uqq;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i).real() > a(j, j).real(); });

    HermitianEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]).real();
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
    }
    return out;
}

Svd svd(const ComplexMatrix& m)
{
    if (!m.all_finite()) throw LinalgError("svd: matrix has non-finite entries");
    const std::size_t k = std::min(m.rows(), m.cols());
    const auto eig = hermitian_eig(m.adjoint() * m);
    const double top = eig.eigenvalues.empty() ? 0.0 : std::max(eig.eigenvalues[0], 0.0);

    Svd out;
    out.u = ComplexMatrix(m.rows(), k);
    out.v = ComplexMatrix(m.cols(), k);
    out.singular.resize(k);
    std::vector<bool> filled(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        const auto vi = eig.eigenvectors.column(i);
        out.v.set_column(i, vi);
        out.singular[i] = std::sqrt(std::max(eig.eigenvalues[i], 0.0));
        if (out.singular[i] > 1e-12 * std::sqrt(top) && out.singular[i] > 0.0) {
            auto ui = matvec(m, vi);
            const double nrm = norm2(ui);
            for (auto& z : ui) z /= nrm;
            out.u.set_column(i, ui);
            filled[i] = true;
        }
    }
    // Complete U with unit vectors orthogonal to the filled columns.
    std::size_t basis = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (filled[i]) continue;
        while (basis < m.rows()) {
            std::vector<Complex> cand(m.rows(), 0.0);
            cand[basis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t j = 0; j < k; ++j) {
                    if (!filled[j]) continue;
                    const auto uj = out.u.column(j);
                    const Complex proj = inner(uj, cand);
                    for (std::size_t r = 0; r < m.rows(); ++r) cand[r] -= proj * uj[r];
                }
            const double nrm = norm2(cand);
            if (nrm > 1e-6) {
                for (auto& z : cand) z /= nrm;
                out.u.set_column(i, cand);
                filled[i] = true;
                break;
            }
        }
    }
    return out;
}

ComplexMatrix gram_schmidt(const ComplexMatrix& columns)
{
    const std::size_t n = columns.rows();
    const std::size_t k = columns.cols();
    if (k > n)
        throw LinalgError("gram_schmidt: more columns (" + std::to_string(k) + ") than rows (" +
                          std::to_string(n) + ")");
    ComplexMatrix q(n, k);
    for (std::size_t j = 0; j < k; ++j) {
        auto col = columns.column(j);
        const double original = norm2(col);
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t i = 0; i < j; ++i) {
                const auto qi = q.column(i);
                const Complex proj = inner(qi, col);
                for (std::size_t r = 0; r < n; ++r) col[r] -= proj * qi[r];
            }
        const double residual = norm2(col);
        if (original == 0.0 || residual <= 1e-10 * original)
            throw RankDeficientError(j, "gram_schmidt: column " + std::to_string(j) +
                                            " is linearly dependent on the previous columns");
        for (auto& z : col) z /= residual;
        q.set_column(j, col);
    }
    return q;
}

ComplexMatrix spectral_map(const HermitianEig& eig, double (*f)(double))
{
    HermitianEig mapped = eig;
    for (auto& l : mapped.eigenvalues) l = f(l);
    return mapped.reconstruct();
}

ComplexMatrix nearest_hermitian_psd(const ComplexMatrix& m)
{
    if (!m.square()) throw LinalgError("nearest_hermitian_psd: matrix is not square");
    if (!m.all_finite()) throw LinalgError("nearest_hermitian_psd: matrix has non-finite entries");
    ComplexMatrix s = m + m.adjoint();
    s *= 0.5;
    const auto eig = hermitian_eig(s);
    const ComplexMatrix polar = spectral_map(eig, [](double l) { return std::abs(l); });
    ComplexMatrix out = s + polar;
    out *= 0.5;
    const std::size_t n = out.rows();
    for (std::size_t i = 0; i < n; ++i) {
        out(i, i) = out(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const Complex avg = 0.5 * (out(i, j) + std::conj(out(j, i)));
            out(i, j) = avg;
            out(j, i) = std::conj(avg);
        }
    }
    return out;
}

}  // namespace raylink::linalg
