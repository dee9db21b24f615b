#include <doctest.h>

#include "imisac/channel.hpp"
#include "imisac/random.hpp"

#include <cmath>

using namespace imisac;

namespace
{
    constexpr double kLambda = 0.01;

    double wrapped(double x) { return std::remainder(x, kTwoPi); }
}

TEST_CASE("broadside steering is all ones")
{
    const auto pos = planar_layout(16, 0.5 * kLambda, 0.0);
    const CVector a = farfield_steering(pos, {0.0, 0.0}, kLambda);
    CHECK((a - CVector::Ones(16)).norm() < 1e-15);
}

TEST_CASE("endfire on a half-wavelength pair")
{
    const std::vector<Vec3> pos{{0.0, 0.0, 0.0}, {0.5 * kLambda, 0.0, 0.0}};
    const CVector a = farfield_steering(pos, {kPi / 2, 0.0}, kLambda);
    CHECK(std::abs(a(0) - 1.0) < 1e-15);
    CHECK(std::abs(a(1) + 1.0) < 1e-15);
}

TEST_CASE("steering matches a per-element path-difference oracle")
{
    const auto pos = linear_layout(8, 0.37 * kLambda, 0.0);
    const double theta = kPi / 6;
    const CVector a = farfield_steering(pos, {theta, 0.0}, kLambda);
    for (int n = 0; n < 8; ++n)
    {
        const double path = pos[n].x() * std::sin(theta);
        CHECK(std::abs(a(n) - std::polar(1.0, kTwoPi * path / kLambda)) < 1e-12);
        CHECK(std::abs(std::abs(a(n)) - 1.0) < 1e-15);
    }
}

TEST_CASE("near-field steering")
{
    SUBCASE("single element is one")
    {
        const std::vector<Vec3> pos{{0.0, 0.0, 0.0}};
        const CVector a = nearfield_steering(pos, {0.0, 0.0, 3.0}, kLambda);
        CHECK(a(0) == cplx{1.0, 0.0});
    }
    SUBCASE("approaches far field beyond the Rayleigh distance")
    {
        const auto pos = linear_layout(32, 0.5 * kLambda, 0.0);
        const GeometryContext g{pos, kLambda};
        const double r = 10.0 * g.rayleigh_distance();
        const CVector near = nearfield_steering(pos, {0.0, 0.0, r}, kLambda);
        const CVector far = farfield_steering(pos, {0.0, 0.0}, kLambda);
        CHECK(max_phase_error(near, far) < 0.05);
    }
    SUBCASE("separates two ranges along the same angle")
    {
        const auto pos = linear_layout(128, 0.25 * kLambda, 0.0);
        const GeometryContext g{pos, kLambda};
        const Vec3 u = Direction{0.3, 0.0}.unit();
        const CVector a1 = nearfield_steering(pos, 0.05 * g.rayleigh_distance() * u, kLambda);
        const CVector a2 = nearfield_steering(pos, 0.4 * g.rayleigh_distance() * u, kLambda);
        CHECK(std::abs(a1.dot(a2)) / 128.0 < 0.99);
    }
    SUBCASE("coincident source is rejected")
    {
        const std::vector<Vec3> pos{{0.0, 0.0, 0.0}, {kLambda, 0.0, 0.0}};
        CHECK_THROWS_AS(nearfield_steering(pos, pos[1], kLambda), Error);
    }
}

TEST_CASE("Rayleigh distance is 2 D^2 / lambda")
{
    const std::vector<Vec3> pos{{0.0, 0.0, 0.0}, {0.03, 0.04, 0.0}, {0.01, 0.0, 0.0}};
    const GeometryContext g{pos, kLambda};
    CHECK(g.aperture_size() == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(g.rayleigh_distance() == 2.0 * g.aperture_size() * g.aperture_size() / kLambda);
}

TEST_CASE("near-to-far phase error shrinks with range")
{
    const auto pos = linear_layout(64, 0.25 * kLambda, 0.0);
    const GeometryContext g{pos, kLambda};
    const Direction dir{0.4, 0.0};
    const CVector far = farfield_steering(pos, dir, kLambda);
    double prev = INFINITY;
    for (double m : {1.0, 2.0, 5.0, 10.0})
    {
        const CVector near = nearfield_steering(pos, m * g.rayleigh_distance() * dir.unit(), kLambda);
        // Spherical phases are referenced to element 0; align the planar one likewise.
        const CVector ref = far * std::conj(far(0));
        const double e = max_phase_error(near, ref);
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("diffraction kernel")
{
    const double area = 0.25 * kLambda * kLambda;
    SUBCASE("face-to-face pair matches the closed form")
    {
        const double d = 0.7 * kLambda;
        const cplx w = diffraction_coefficient({0, 0, 0}, {0, 0, d}, kLambda, area);
        const cplx expect = (area / d) * cplx(1.0 / (kTwoPi * d), -1.0 / kLambda) * std::polar(1.0, kTwoPi * d / kLambda);
        CHECK(std::abs(w - expect) <= 1e-14 * std::abs(expect));
    }
    SUBCASE("magnitude decreases with distance at fixed obliquity")
    {
        double prev = INFINITY;
        for (double d : {0.2, 0.5, 1.0, 2.0, 5.0})
        {
            const double m = std::abs(diffraction_coefficient({0, 0, 0}, {0.3 * d * kLambda, 0, d * kLambda}, kLambda, area));
            CHECK(m < prev);
            prev = m;
        }
    }
    SUBCASE("phase shift under a wavelength change")
    {
        const double d = 1.3 * kLambda;
        const double l2 = 1.1 * kLambda;
        const cplx w1 = diffraction_coefficient({0, 0, 0}, {0, 0, d}, kLambda, area);
        const cplx w2 = diffraction_coefficient({0, 0, 0}, {0, 0, d}, l2, area);
        // Remove the near-field term's phase so only the propagation phase remains.
        const double k1 = std::arg(cplx(1.0 / (kTwoPi * d), -1.0 / kLambda));
        const double k2 = std::arg(cplx(1.0 / (kTwoPi * d), -1.0 / l2));
        const double shift = std::arg(w1) - k1 - (std::arg(w2) - k2);
        CHECK(std::abs(wrapped(shift - d * kTwoPi * (1.0 / kLambda - 1.0 / l2))) < 1e-12);
    }
    SUBCASE("reciprocity between parallel layers")
    {
        const auto a = planar_layout(9, 0.5 * kLambda, 0.0);
        const auto b = planar_layout(9, 0.5 * kLambda, 0.5 * kLambda);
        const CMatrix W = sim_diffraction_matrix(a, b, kLambda, area);
        for (int n = 0; n < 9; ++n)
            for (int m = 0; m < 9; ++m)
                CHECK(std::abs(W(m, n) - W(n, m)) < 1e-15 * std::abs(W(m, n)) + 1e-300);
    }
    SUBCASE("receiving layer must sit above")
    {
        const auto a = planar_layout(4, 0.5 * kLambda, 0.0);
        CHECK_THROWS_AS(sim_diffraction_matrix(a, a, kLambda, area), Error);
    }
}

TEST_CASE("waveguide entries")
{
    CHECK(waveguide_entry(0.58, 100.0, 0.0) == cplx{1.0, 0.0});
    const double lg = 0.02;
    CHECK(std::abs(waveguide_entry(0.0, kTwoPi / lg, lg / 2) + 1.0) < 1e-15);
    const cplx w = waveguide_entry(10.0, 100.0, 0.1);
    CHECK(std::abs(w - std::exp(-1.0) * std::polar(1.0, -10.0)) < 1e-15);
    CHECK(std::abs(w) == doctest::Approx(0.3679).epsilon(1e-4));
}

TEST_CASE("waveguide feed follows the block structure")
{
    ArchitectureOptions opt;
    opt.kind = ArchKind::DMA;
    opt.elements_per_layer = {12};
    opt.num_rf_chains = 3;
    const ArchitectureSpec spec = make_architecture(opt);
    const FeedingMatrix f = waveguide_feed(spec, 0.58, 900.0);
    REQUIRE(f.T.rows() == 12);
    REQUIRE(f.T.cols() == 3);
    for (int n = 0; n < 12; ++n)
        for (int k = 0; k < 3; ++k)
            CHECK((f.T(n, k) != cplx{0.0, 0.0}) == (spec.waveguide_of(0, n) == k));
}

TEST_CASE("user channels")
{
    const auto pos = planar_layout(16, 0.5 * kLambda, 0.0);
    const GeometryContext g{pos, kLambda};
    const std::vector<Vec3> users{{1.0, 0.0, 5.0}, {-2.0, 0.5, 8.0}};

    SUBCASE("same seed is bit-identical")
    {
        const ChannelModel m{ChannelModel::Kind::Rician, 3.0};
        const ChannelSet a = generate_user_channels(g, users, m, 42);
        const ChannelSet b = generate_user_channels(g, users, m, 42);
        CHECK(a.H == b.H);
        const ChannelSet c = generate_user_channels(g, users, m, 43);
        CHECK(a.H != c.H);
    }
    SUBCASE("Rician approaches LoS as K grows")
    {
        const CMatrix los = generate_user_channels(g, users, {ChannelModel::Kind::LoS, 0.0}, 1).H;
        const CMatrix ric = generate_user_channels(g, users, {ChannelModel::Kind::Rician, 1e6}, 1).H;
        for (Eigen::Index u = 0; u < 2; ++u)
            CHECK((ric.row(u) - los.row(u)).norm() / los.row(u).norm() < 1e-3);
    }
    SUBCASE("LoS rows carry free-space gain")
    {
        const CMatrix los = generate_user_channels(g, users, {ChannelModel::Kind::LoS, 0.0}, 1).H;
        const double d0 = (pos[0] - users[0]).norm();
        CHECK(std::abs(los(0, 0)) == doctest::Approx(kLambda / (4 * kPi * d0)).epsilon(1e-14));
    }
    SUBCASE("Rayleigh second moment")
    {
        const std::vector<Vec3> one{{0.0, 0.0, 5.0}};
        const std::vector<Vec3> single{{0.0, 0.0, 0.0}};
        const GeometryContext g1{single, kLambda};
        double acc = 0.0;
        const int trials = 10000;
        for (int t = 0; t < trials; ++t)
            acc += std::norm(generate_user_channels(g1, one, {ChannelModel::Kind::Rayleigh, 0.0}, seed_for(7, Stream::Channel, t)).H(0, 0));
        CHECK(std::abs(acc / trials - 1.0) < 0.05);
    }
}
