#include <doctest.h>

#include "imisac/metrics.hpp"
#include "imisac/random.hpp"
#include "support.hpp"

#include <cmath>
#include <vector>

using namespace imisac;
using namespace imisac::test;

namespace
{
    // sum_s |sum_n conj(a_n) E(n, s)|^2 by explicit loops.
    double pattern_oracle(const CMatrix &E, const CVector &a)
    {
        double total = 0.0;
        for (Eigen::Index s = 0; s < E.cols(); ++s)
        {
            double re = 0.0, im = 0.0;
            for (Eigen::Index n = 0; n < E.rows(); ++n)
            {
                const cplx t = std::conj(a(n)) * E(n, s);
                re += t.real();
                im += t.imag();
            }
            total += re * re + im * im;
        }
        return total;
    }
}

TEST_CASE("single-user rate")
{
    CMatrix H(1, 1), E(1, 1);
    H(0, 0) = std::polar(1.0, 0.4);
    E(0, 0) = std::polar(1.0, -1.1);
    const std::vector<int> map{0};
    const RateReport r = sum_rate(H, E, 1.0, map);
    CHECK(r.sinr[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.sum_rate == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sum_rate(H, CMatrix::Zero(1, 1), 1.0, map).sum_rate == 0.0);
}

TEST_CASE("zero-forcing removes interference")
{
    Rng rng(21);
    const CMatrix H = random_matrix(rng, 2, 6);
    const CMatrix E = H.completeOrthogonalDecomposition().pseudoInverse();
    const CMatrix A = H * E;
    CHECK(std::norm(A(0, 1)) < 1e-20);
    CHECK(std::norm(A(1, 0)) < 1e-20);
    const double sigma2 = 0.3;
    const RateReport r = sum_rate(H, E, sigma2, identity_stream_map(2));
    for (int u = 0; u < 2; ++u)
        CHECK(r.sinr[u] == doctest::Approx(std::norm(A(u, u)) / sigma2).epsilon(1e-9));
}

TEST_CASE("stream map must be a permutation")
{
    Rng rng(22);
    const CMatrix H = random_matrix(rng, 2, 4), E = random_matrix(rng, 4, 2);
    const std::vector<int> bad{0, 0};
    CHECK_THROWS_AS(sum_rate(H, E, 1.0, bad), Error);
    const std::vector<int> swapped{1, 0};
    const RateReport a = sum_rate(H, E, 1.0, swapped);
    CMatrix Es(4, 2);
    Es << E.col(1), E.col(0);
    const RateReport b = sum_rate(H, Es, 1.0, identity_stream_map(2));
    CHECK(a.sum_rate == doctest::Approx(b.sum_rate).epsilon(1e-14));
}

TEST_CASE("beam pattern closed forms")
{
    Rng rng(23);
    const auto pos = planar_layout(16, 0.005, 0.0);
    const CVector a = farfield_steering(pos, {0.3, 0.1}, 0.01);
    const CMatrix E = a / a.norm();
    CHECK(beam_pattern(E, a) == doctest::Approx(16.0).epsilon(1e-14));

    CVector v = random_vector(rng, 16);
    v -= a * (a.dot(v) / a.squaredNorm());
    CHECK(beam_pattern(v, a) < 1e-24);
}

TEST_CASE("beam pattern matches the loop oracle")
{
    Rng rng(24);
    for (int trial = 0; trial < 50; ++trial)
    {
        const int N = 1 + static_cast<int>(rng.uniform() * 64);
        const int S = 1 + static_cast<int>(rng.uniform() * 8);
        const CMatrix E = random_matrix(rng, N, S);
        const CVector a = random_vector(rng, N);
        const double ref = pattern_oracle(E, a);
        CHECK(std::abs(beam_pattern(E, a) - ref) <= 1e-10 * std::max(1.0, ref));
    }
}

TEST_CASE("scaling E scales the pattern and SINR consistently")
{
    Rng rng(25);
    const CMatrix H = random_matrix(rng, 3, 8), E = random_matrix(rng, 8, 3);
    const CVector a = random_vector(rng, 8);
    const double c = 1.7, sigma2 = 0.4;
    CHECK(beam_pattern(c * E, a) == doctest::Approx(c * c * beam_pattern(E, a)).epsilon(1e-14));

    const RateReport r = sum_rate(H, c * E, sigma2, identity_stream_map(3));
    const CMatrix A = H * E;
    for (int u = 0; u < 3; ++u)
    {
        double interference = 0.0;
        for (int s = 0; s < 3; ++s)
            if (s != u)
                interference += std::norm(A(u, s));
        const double expect = c * c * std::norm(A(u, u)) / (c * c * interference + sigma2);
        CHECK(r.sinr[u] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("sum rate is invariant under a unitary rotation of the aperture")
{
    Rng rng(26);
    const CMatrix H = random_matrix(rng, 2, 6), E = random_matrix(rng, 6, 2);
    const CMatrix U = random_matrix(rng, 6, 6).householderQr().householderQ();
    const double a = sum_rate(H, E, 0.2, identity_stream_map(2)).sum_rate;
    const double b = sum_rate(H * U.adjoint(), U * E, 0.2, identity_stream_map(2)).sum_rate;
    CHECK(std::abs(a - b) < 1e-9);
}

TEST_CASE("beam-pattern MSE")
{
    const std::vector<double> p{1.0, 4.0, 2.0};
    CHECK(beampattern_mse(p, p).mse < 1e-30);

    const std::vector<double> zero{0.0, 0.0, 0.0};
    const MseReport z = beampattern_mse(p, zero);
    CHECK(z.scale == 0.0);
    CHECK(z.mse == doctest::Approx((1.0 + 16.0 + 4.0) / 3.0).epsilon(1e-15));

    // alpha = (1 + 0 + 2) / (1 + 0 + 1) = 1.5; residuals -0.5, 4, 0.5.
    const std::vector<double> m{1.0, 0.0, 1.0};
    const MseReport r = beampattern_mse(p, m);
    CHECK(r.scale == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(std::abs(r.mse - (0.25 + 16.0 + 0.25) / 3.0) < 1e-12);

    const std::vector<double> neg{1.0, -1.0, 0.0};
    CHECK_THROWS_AS(beampattern_mse(p, neg), Error);
    CHECK_THROWS_AS(beampattern_mse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("ISAC objective")
{
    const std::vector<double> pw{2.0, 3.0};
    CHECK(isac_objective(1.0, 5.0, 4.0, pw, 1.0) == doctest::Approx(1.25));
    CHECK(isac_objective(0.0, 5.0, 4.0, pw, 4.0) == doctest::Approx(0.5));
    const std::vector<double> one{1.0};
    CHECK(isac_objective(0.5, 2.0, 2.0, one, 1.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(isac_objective(0.5, 1.0, 0.0, one, 1.0), Error);

    // Nondecreasing in rate and in worst-target power.
    Rng rng(27);
    for (int t = 0; t < 100; ++t)
    {
        const double w = rng.uniform();
        const double r = rng.uniform(0.0, 10.0);
        const std::vector<double> p1{rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)};
        std::vector<double> p2 = p1;
        p2[t % 2] += rng.uniform();
        const double base = isac_objective(w, r, 3.0, p1, 2.0);
        CHECK(isac_objective(w, r + rng.uniform(), 3.0, p1, 2.0) >= base);
        CHECK(isac_objective(w, r, 3.0, p2, 2.0) >= base);
    }
}

TEST_CASE("isotropic baseline")
{
    Rng rng(28);
    const CMatrix E = random_matrix(rng, 10, 2);
    const CVector a = farfield_steering(linear_layout(10, 0.005, 0.0), {0.2, 0.0}, 0.01);
    CHECK(isotropic_power(E, a) == doctest::Approx(E.squaredNorm()).epsilon(1e-14));
}
