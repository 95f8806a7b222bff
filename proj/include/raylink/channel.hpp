/**
 * @file   channel.hpp
 * @brief  UPA steering vectors, narrowband MIMO channel assembly from ray
 *         paths, Gram matrices and the log-det achievable rate.
 */
#pragma once

#include "raylink/linalg.hpp"
#include "raylink/raytrace.hpp"

#include <cstddef>
#include <vector>

namespace raylink::channel {

using linalg::Complex;
using linalg::ComplexMatrix;

/// Uniform planar array with n_x * n_y isotropic elements.
struct ArrayConfig
{
    std::size_t n_x = 4;
    std::size_t n_y = 4;
    double spacing_x = 0.0025;  ///< meters
    double spacing_y = 0.0025;  ///< meters

    static ArrayConfig half_wavelength(std::size_t n_x, std::size_t n_y, double wavelength)
    {
        return {n_x, n_y, wavelength / 2.0, wavelength / 2.0};
    }
    std::size_t size() const { return n_x * n_y; }
    void validate() const;

    friend bool operator==(const ArrayConfig&, const ArrayConfig&) = default;
};

/// T = H^H H for a channel H. Hermitian PSD by construction.
class GramMatrix
{
  public:
    GramMatrix() = default;
    /// Rejects matrices whose relative Hermitian defect exceeds 1e-10.
    explicit GramMatrix(ComplexMatrix t);
    static GramMatrix of_channel(const ComplexMatrix& h);

    const ComplexMatrix& matrix() const { return t_; }
    std::size_t size() const { return t_.rows(); }

  private:
    ComplexMatrix t_;
};

/// a(theta, phi) = kron(x-axis phases, y-axis phases) / sqrt(N), with
/// Omega_X = k d_x sin(theta) cos(phi), Omega_Y = k d_y sin(theta) sin(phi).
std::vector<Complex> steering_vector(const ArrayConfig& array, double azimuth, double elevation,
                                     double wavelength);

/// H = sqrt(N_R N_T) sum_l alpha_l a_R(aoa_l) a_T(aod_l)^H, shape N_R x N_T.
/// An empty path list yields the zero matrix.
ComplexMatrix assemble(const raytrace::PathList& paths, const ArrayConfig& tx_array,
                       const ArrayConfig& rx_array, double wavelength);

/// log2 det(I + rho T^{1/2} Q T^{1/2}); Q Hermitian PSD with trace <= 1 + 1e-9.
double rate(const GramMatrix& t, const ComplexMatrix& q, double snr);

/// Rate evaluation against a fixed true Gram matrix, caching T^{1/2}.
class RateEvaluator
{
  public:
    explicit RateEvaluator(const GramMatrix& t);

    double rate(const ComplexMatrix& q, double snr) const;
    /// Single-stream rate log2(1 + rho w^H T w) for a unit-norm beam.
    double beam_rate(std::span<const Complex> w, double snr) const;
    double max_eigenvalue() const { return max_eigenvalue_; }
    const std::vector<double>& eigenvalues() const { return eig_.eigenvalues; }
    const linalg::HermitianEig& eig() const { return eig_; }

  private:
    GramMatrix t_;
    linalg::HermitianEig eig_;
    ComplexMatrix sqrt_t_;
    double max_eigenvalue_ = 0.0;
};

/// w^H T w (real part; T Hermitian).
double quadratic_form(const ComplexMatrix& t, std::span<const Complex> w);

}  // namespace raylink::channel
