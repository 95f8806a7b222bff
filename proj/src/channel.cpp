#include "raylink/channel.hpp"

#include "raylink/log.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace raylink::channel {

void ArrayConfig::validate() const
{
    if (n_x == 0 || n_y == 0) throw std::invalid_argument("ArrayConfig: antenna counts must be positive");
    if (!(spacing_x > 0.0) || !(spacing_y > 0.0))
        throw std::invalid_argument("ArrayConfig: antenna spacing must be positive");
}

GramMatrix::GramMatrix(ComplexMatrix t) : t_(std::move(t))
{
    if (!t_.square()) throw std::invalid_argument("GramMatrix: matrix is not square");
    if (linalg::hermitian_defect(t_) > 1e-10) throw std::invalid_argument("GramMatrix: matrix is not Hermitian");
}

GramMatrix GramMatrix::of_channel(const ComplexMatrix& h)
{
    ComplexMatrix t = h.adjoint() * h;
    const std::size_t n = t.rows();
    for (std::size_t i = 0; i < n; ++i) {
        t(i, i) = t(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) t(j, i) = std::conj(t(i, j));
    }
    return GramMatrix(std::move(t));
}

std::vector<Complex> steering_vector(const ArrayConfig& array, double azimuth, double elevation,
                                     double wavelength)
{
    array.validate();
    const double k = 2.0 * std::numbers::pi / wavelength;
    const double omega_x = k * array.spacing_x * std::sin(azimuth) * std::cos(elevation);
    const double omega_y = k * array.spacing_y * std::sin(azimuth) * std::sin(elevation);
    const double scale = 1.0 / std::sqrt(static_cast<double>(array.size()));
    std::vector<Complex> a(array.size());
    for (std::size_t ix = 0; ix < array.n_x; ++ix)
        for (std::size_t iy = 0; iy < array.n_y; ++iy)
            a[ix * array.n_y + iy] =
                std::polar(scale, static_cast<double>(ix) * omega_x + static_cast<double>(iy) * omega_y);
    return a;
}

ComplexMatrix assemble(const raytrace::PathList& paths, const ArrayConfig& tx_array, const ArrayConfig& rx_array,
                       double wavelength)
{
    const std::size_t nt = tx_array.size();
    const std::size_t nr = rx_array.size();
    ComplexMatrix h(nr, nt);
    if (paths.empty()) {
        warn("assembling a channel from an empty path list");
        return h;
    }
    const double scale = std::sqrt(static_cast<double>(nr * nt));
    for (const auto& p : paths.paths) {
        const auto ar = steering_vector(rx_array, p.aoa_azimuth, p.aoa_elevation, wavelength);
        const auto at = steering_vector(tx_array, p.aod_azimuth, p.aod_elevation, wavelength);
        const Complex g = scale * p.gain;
        for (std::size_t r = 0; r < nr; ++r) {
            const Complex gr = g * ar[r];
            for (std::size_t c = 0; c < nt; ++c) h(r, c) += gr * std::conj(at[c]);
        }
    }
    return h;
}

double quadratic_form(const ComplexMatrix& t, std::span<const Complex> w)
{
    double s = 0.0;
    const std::size_t n = t.rows();
    for (std::size_t i = 0; i < n; ++i) {
        Complex row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += t(i, j) * w[j];
        s += (std::conj(w[i]) * row).real();
    }
    return s;
}

namespace {

void check_covariance(const ComplexMatrix& q, std::size_t n)
{
    if (q.rows() != n || q.cols() != n) throw std::invalid_argument("rate: covariance has the wrong shape");
    if (linalg::hermitian_defect(q) > 1e-8) throw std::invalid_argument("rate: covariance is not Hermitian");
    if (q.trace().real() > 1.0 + 1e-9)
        throw std::invalid_argument("rate: covariance trace exceeds the unit power budget");
}

double logdet_rate(const ComplexMatrix& sqrt_t, const ComplexMatrix& q, double snr)
{
    const ComplexMatrix m = sqrt_t * q * sqrt_t;
    ComplexMatrix herm = m + m.adjoint();
    herm *= 0.5;
    const auto eig = linalg::hermitian_eig(herm);
    double r = 0.0;
    for (double mu : eig.eigenvalues) r += std::log2(1.0 + snr * std::max(mu, 0.0));
    return r;
}

}  // namespace

RateEvaluator::RateEvaluator(const GramMatrix& t)
    : t_(t), eig_(linalg::hermitian_eig(t.matrix()))
{
    sqrt_t_ = linalg::spectral_map(eig_, [](double l) { return std::sqrt(std::max(l, 0.0)); });
    max_eigenvalue_ = eig_.eigenvalues.empty() ? 0.0 : std::max(eig_.eigenvalues.front(), 0.0);
}

double RateEvaluator::rate(const ComplexMatrix& q, double snr) const
{
    check_covariance(q, t_.size());
    return logdet_rate(sqrt_t_, q, snr);
}

double RateEvaluator::beam_rate(std::span<const Complex> w, double snr) const
{
    return std::log2(1.0 + snr * std::max(quadratic_form(t_.matrix(), w), 0.0));
}

double rate(const GramMatrix& t, const ComplexMatrix& q, double snr)
{
    return RateEvaluator(t).rate(q, snr);
}

}  // namespace raylink::channel
