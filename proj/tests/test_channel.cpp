#include "support.hpp"

#include "raylink/channel.hpp"
#include "raylink/log.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <numbers>

using namespace raylink;
using namespace raylink::channel;
using testing::max_abs_diff;

namespace {

constexpr double kLambda = 0.005;

std::vector<Complex> phases(std::size_t n, double omega)
{
    std::vector<Complex> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(Complex(0, omega * static_cast<double>(i)));
    return v;
}

// Straightforward re-implementation: explicit Kronecker product of the two
// axis phase vectors, then the outer-product sum.
ComplexMatrix assemble_oracle(const raytrace::PathList& paths, const ArrayConfig& tx, const ArrayConfig& rx)
{
    auto steer = [](const ArrayConfig& a, double theta, double phi) {
        const double k = 2 * std::numbers::pi / kLambda;
        const auto x = phases(a.n_x, k * a.spacing_x * std::sin(theta) * std::cos(phi));
        const auto y = phases(a.n_y, k * a.spacing_y * std::sin(theta) * std::sin(phi));
        std::vector<Complex> out;
        for (auto xi : x)
            for (auto yi : y) out.push_back(xi * yi / std::sqrt(double(a.size())));
        return out;
    };
    ComplexMatrix h(rx.size(), tx.size());
    for (const auto& p : paths.paths) {
        const auto ar = steer(rx, p.aoa_azimuth, p.aoa_elevation);
        const auto at = steer(tx, p.aod_azimuth, p.aod_elevation);
        for (std::size_t r = 0; r < rx.size(); ++r)
            for (std::size_t c = 0; c < tx.size(); ++c)
                h(r, c) += std::sqrt(double(rx.size() * tx.size())) * p.gain * ar[r] * std::conj(at[c]);
    }
    return h;
}

raytrace::PathList random_paths(std::size_t n, Rng& rng)
{
    raytrace::PathList list;
    for (std::size_t i = 0; i < n; ++i) {
        raytrace::Path p;
        p.gain = testing::random_complex(rng);
        p.aoa_azimuth = rng.uniform(0, std::numbers::pi / 2);
        p.aoa_elevation = rng.uniform(-std::numbers::pi, std::numbers::pi);
        p.aod_azimuth = rng.uniform(0, std::numbers::pi / 2);
        p.aod_elevation = rng.uniform(-std::numbers::pi, std::numbers::pi);
        list.paths.push_back(p);
    }
    return list;
}

// log2 det(I + rho Q T) by LU.
double det_rate(const ComplexMatrix& t, const ComplexMatrix& q, double rho)
{
    const std::size_t n = t.rows();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(n, n);
    const auto qt = q * t;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) m(r, c) += rho * qt(r, c);
    return std::log2(std::abs(m.determinant()));
}

}  // namespace

TEST_CASE("steering vector closed forms")
{
    const auto a4 = ArrayConfig::half_wavelength(4, 4, kLambda);
    for (double phi : {0.0, 0.7, -2.0}) {
        const auto a = steering_vector(a4, 0.0, phi, kLambda);
        for (auto z : a) CHECK(std::abs(z - Complex(0.25, 0)) < 1e-12);
    }
    const auto a2 = ArrayConfig::half_wavelength(2, 2, kLambda);
    const auto e = steering_vector(a2, std::numbers::pi / 2, 0.0, kLambda);
    const Complex want[4] = {0.5, 0.5, -0.5, -0.5};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(e[i] - want[i]) < 1e-12);
}

TEST_CASE("steering vectors have unit norm and constant modulus")
{
    Rng rng(4);
    const auto arr = ArrayConfig::half_wavelength(4, 4, kLambda);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const auto a = steering_vector(arr, rng.uniform(0, std::numbers::pi), rng.uniform(-4, 4), kLambda);
        worst = std::max(worst, std::abs(linalg::norm2(a) - 1.0));
        for (auto z : a) worst = std::max(worst, std::abs(std::abs(z) - 0.25));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("assemble")
{
    const auto arr = ArrayConfig::half_wavelength(4, 4, kLambda);
    Rng rng(6);
    SUBCASE("single unit path is rank one with Frobenius norm sqrt(NR NT)")
    {
        auto one = random_paths(1, rng);
        one.paths[0].gain = std::polar(1.0, 0.3);
        const auto h = assemble(one, arr, arr, kLambda);
        CHECK(h.frobenius_norm() == doctest::Approx(16.0));
        const auto s = linalg::svd(h);
        CHECK(s.singular[1] < 1e-6 * s.singular[0]);
    }
    SUBCASE("opposite gains cancel")
    {
        auto two = random_paths(1, rng);
        two.paths.push_back(two.paths[0]);
        two.paths[1].gain = -two.paths[0].gain;
        CHECK(assemble(two, arr, arr, kLambda).frobenius_norm() < 1e-12);
    }
    SUBCASE("matches the term-by-term oracle and scales linearly")
    {
        const ArrayConfig tx = ArrayConfig::half_wavelength(4, 2, kLambda);
        for (int trial = 0; trial < 20; ++trial) {
            auto paths = random_paths(3, rng);
            const auto h = assemble(paths, tx, arr, kLambda);
            CHECK(h.rows() == 16);
            CHECK(h.cols() == 8);
            CHECK(max_abs_diff(h, assemble_oracle(paths, tx, arr)) < 1e-12);
            const Complex c(0.3, -1.2);
            for (auto& p : paths.paths) p.gain *= c;
            CHECK(max_abs_diff(assemble(paths, tx, arr, kLambda), h * c) < 1e-12);
        }
    }
    SUBCASE("empty path list gives zeros and warns")
    {
        int warnings = 0;
        auto previous = set_warning_handler([&](const std::string&) { ++warnings; });
        const auto h = assemble(raytrace::PathList{}, arr, arr, kLambda);
        set_warning_handler(previous);
        CHECK(h.frobenius_norm() == 0.0);
        CHECK(warnings == 1);
    }
}

TEST_CASE("rate")
{
    SUBCASE("identity channel closed form")
    {
        const GramMatrix t(ComplexMatrix::identity(16));
        auto q = ComplexMatrix::identity(16);
        q *= 1.0 / 16;
        for (double rho : {0.1, 1.0, 10.0, 100.0})
            CHECK(std::abs(rate(t, q, rho) - 16 * std::log2(1 + rho / 16)) < 1e-9);
        CHECK(rate(t, ComplexMatrix(16, 16), 10.0) == 0.0);
    }
    SUBCASE("matches the determinant form on random rank-3 channels")
    {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            const auto t = testing::random_gram(16, 3, rng);
            auto q = testing::random_gram(16, 16, rng);
            q *= rng.uniform(0.1, 1.0) / q.trace().real();
            const double rho = std::pow(10.0, rng.uniform(-1, 2));
            CHECK(std::abs(rate(GramMatrix(t), q, rho) - det_rate(t, q, rho)) < 1e-9);
        }
    }
    SUBCASE("beam rate and monotonicity")
    {
        Rng rng(8);
        const GramMatrix t(testing::random_gram(16, 4, rng));
        const RateEvaluator ev(t);
        const auto w = testing::random_unit_vector(16, rng);
        const auto q = ComplexMatrix::column_vector(w) * ComplexMatrix::column_vector(w).adjoint();
        double previous = 0.0;
        for (double rho : {0.01, 0.1, 1.0, 10.0, 100.0}) {
            const double r = ev.rate(q, rho);
            CHECK(std::abs(r - std::log2(1 + rho * quadratic_form(t.matrix(), w))) < 1e-9);
            CHECK(std::abs(ev.beam_rate(w, rho) - r) < 1e-9);
            CHECK(r >= previous);
            previous = r;
        }
    }
    SUBCASE("power constraint")
    {
        const GramMatrix t(ComplexMatrix::identity(4));
        CHECK_THROWS(rate(t, ComplexMatrix::identity(4), 1.0));
    }
}

TEST_CASE("gram matrix validation")
{
    ComplexMatrix m(2, 2);
    m(0, 1) = 1.0;
    CHECK_THROWS(GramMatrix(m));
    Rng rng(9);
    const auto h = testing::random_matrix(16, 16, rng);
    const auto t = GramMatrix::of_channel(h);
    CHECK(linalg::hermitian_defect(t.matrix()) < 1e-12);
}
