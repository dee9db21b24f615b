#include <doctest.h>

#include "imisac/metrics.hpp"
#include "imisac/random.hpp"
#include "imisac/waveform.hpp"
#include "support.hpp"

#include <cmath>

using namespace imisac;
using namespace imisac::test;

namespace
{
    TimeModulationPattern random_pattern(Rng &rng, int N, int P)
    {
        TimeModulationPattern t;
        t.sequences.resize(N, P);
        for (int n = 0; n < N; ++n)
            for (int p = 0; p < P; ++p)
                t.sequences(n, p) = std::polar(1.0, rng.phase());
        return t;
    }

    // Single-chain, single-layer chain with an all-ones feed.
    struct Plain
    {
        ArchitectureSpec spec;
        std::vector<FeedingMatrix> feeds;
        ReconfigState state;
        BasebandProcessor V = BasebandProcessor::equal_power(1, 1, 1.0);
    };

    Plain plain(int N)
    {
        Plain p;
        ArchitectureOptions opt;
        opt.kind = ArchKind::Custom;
        opt.elements_per_layer = {N};
        p.spec = make_architecture(opt);
        p.feeds = {{0, CMatrix::Ones(N, 1), FeedTopology::DenseDiffraction}};
        p.state = initial_state(p.spec);
        return p;
    }

    double parseval_gap(const TimeModulationPattern &t, const HarmonicDecomposition &h)
    {
        double worst = 0.0;
        for (int n = 0; n < t.elements(); ++n)
            worst = std::max(worst, std::abs(h.coefficients.row(n).squaredNorm() -
                                             t.sequences.row(n).squaredNorm() / t.slots()));
        return worst;
    }
}

TEST_CASE("constant pattern has only a DC term")
{
    Rng rng(61);
    const CVector q = CVector::Constant(3, std::polar(1.0, 0.7));
    const auto h = harmonic_coefficients(constant_pattern(0, q, 8, ConstraintFamily::unit_modulus()));
    for (int n = 0; n < 3; ++n)
    {
        CHECK(std::abs(h.coefficients(n, 0) - q(n)) < 1e-15);
        for (int k = 1; k < 8; ++k)
            CHECK(std::abs(h.coefficients(n, k)) < 1e-15);
    }
}

TEST_CASE("alternating sign moves everything to the first harmonic")
{
    TimeModulationPattern t;
    t.sequences.resize(1, 2);
    t.sequences << 1.0, -1.0;
    const auto h = harmonic_coefficients(t);
    CHECK(h.coefficients(0, 0) == cplx{0.0, 0.0});
    CHECK(h.coefficients(0, 1) == cplx{1.0, 0.0});
    CHECK(h.harmonic(3)(0) == h.coefficients(0, 1));
    CHECK(h.harmonic(-1)(0) == h.coefficients(0, 1));
}

TEST_CASE("Parseval per element")
{
    Rng rng(62);
    for (int P = 1; P <= 16; ++P)
    {
        const auto t = random_pattern(rng, 5, P);
        CHECK(parseval_gap(t, harmonic_coefficients(t)) <= 1e-12);
    }
}

TEST_CASE("circular shift multiplies coefficients by a unit root")
{
    Rng rng(63);
    for (int P : {2, 4, 5, 8, 16})
    {
        const auto t = random_pattern(rng, 3, P);
        const auto h = harmonic_coefficients(t);
        for (int s = 1; s < P; ++s)
        {
            TimeModulationPattern u = t;
            for (int p = 0; p < P; ++p)
                u.sequences.col((p + s) % P) = t.sequences.col(p);
            const auto hs = harmonic_coefficients(u);
            for (int k = 0; k < P; ++k)
            {
                const cplx rot = std::polar(1.0, -kTwoPi * k * s / P);
                CHECK((hs.coefficients.col(k) - rot * h.coefficients.col(k)).norm() < 1e-14);
            }
        }
    }
}

TEST_CASE("DC magnitude bound for unit-modulus sequences")
{
    Rng rng(64);
    for (int t = 0; t < 200; ++t)
    {
        const auto p = random_pattern(rng, 1, 2 + t % 7);
        CHECK(std::abs(harmonic_coefficients(p).coefficients(0, 0)) < 1.0);
    }
    const auto c = constant_pattern(0, CVector::Constant(1, std::polar(1.0, 2.0)), 6, ConstraintFamily::unit_modulus());
    CHECK(std::abs(harmonic_coefficients(c).coefficients(0, 0)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("harmonic beam patterns")
{
    const int N = 6;
    Plain s = plain(N);
    const CVector ones = CVector::Ones(N);

    SUBCASE("constant pattern has no first harmonic")
    {
        const auto t = constant_pattern(0, ones, 4, ConstraintFamily::unit_modulus());
        CHECK(harmonic_beam_pattern(s.spec, s.feeds, s.V, s.state, t, harmonic_coefficients(t), 1, ones) < 1e-28);
    }
    SUBCASE("alternating pattern forms a coherent first-harmonic beam")
    {
        TimeModulationPattern t;
        t.sequences.resize(N, 2);
        t.sequences.col(0).setOnes();
        t.sequences.col(1).setConstant(-1.0);
        const double p = harmonic_beam_pattern(s.spec, s.feeds, s.V, s.state, t, harmonic_coefficients(t), 1, ones);
        CHECK(p == doctest::Approx(N * N).epsilon(1e-15));
    }
    SUBCASE("harmonic powers add up to the time-domain correlation")
    {
        Rng rng(65);
        const int P = 8;
        const auto t = random_pattern(rng, N, P);
        const auto h = harmonic_coefficients(t);
        const CVector a = random_vector(rng, N);
        double total = 0.0;
        for (int k = 0; k < P; ++k)
            total += harmonic_beam_pattern(s.spec, s.feeds, s.V, s.state, t, h, k, a);
        cplx oracle = 0.0;
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < N; ++m)
            {
                cplx corr = 0.0;
                for (int p = 0; p < P; ++p)
                    corr += t.sequences(n, p) * std::conj(t.sequences(m, p));
                oracle += std::conj(a(n)) * a(m) * corr / static_cast<double>(P);
            }
        CHECK(std::abs(total - oracle.real()) < 1e-12 * std::max(1.0, total));
        CHECK(std::abs(oracle.imag()) < 1e-12 * std::max(1.0, total));
    }
    SUBCASE("DC of a constant pattern equals the static pattern")
    {
        Rng rng(66);
        ReconfigState st = s.state;
        st.layers[0] = unit_layer(rng, N);
        const auto t = constant_pattern(0, st.layers[0].q, 5, ConstraintFamily::unit_modulus());
        const CVector a = random_vector(rng, N);
        const double dc = harmonic_beam_pattern(s.spec, s.feeds, s.V, st, t, harmonic_coefficients(t), 0, a);
        const double stat = beam_pattern(build_effective_matrix(s.spec, s.V, s.feeds, st).E, a);
        CHECK(std::abs(dc - stat) < 1e-12 * std::max(1.0, stat));
    }
}

TEST_CASE("only the radiating layer may be modulated")
{
    Rng rng(67);
    const Chain c = random_chain(rng, {1, 4, 4}, 1);
    TimeModulationPattern t = constant_pattern(0, CVector::Ones(4), 2, ConstraintFamily::unit_modulus());
    try
    {
        harmonic_beam_pattern(c.spec, c.feeds, c.V, c.state, t, harmonic_coefficients(t), 0, CVector::Ones(4));
        FAIL("expected an error");
    }
    catch (const Error &e)
    {
        CHECK(e.code() == ErrorCode::UnsupportedMultiLayerModulation);
    }
    t.layer = 1;
    CHECK_NOTHROW(harmonic_beam_pattern(c.spec, c.feeds, c.V, c.state, t, harmonic_coefficients(t), 0, CVector::Ones(4)));
}

TEST_CASE("split pattern design")
{
    ArchitectureOptions opt;
    opt.kind = ArchKind::RIS;
    opt.elements_per_layer = {16};
    const ArchitectureSpec spec = make_architecture(opt);
    Rng rng(68);
    std::vector<double> phases(16);
    for (auto &p : phases)
        p = rng.uniform(-kPi, kPi);
    const Direction sense{0.5, 0.0};

    SUBCASE("no sensing weight keeps the communication phases")
    {
        const SplitDesign d = design_split_pattern(spec, phases, sense, 8, 1, {1.0, 0.0});
        for (int n = 0; n < 16; ++n)
        {
            CHECK(std::abs(d.c0(n) - std::polar(1.0, phases[n])) < 1e-15);
            for (int p = 1; p < 8; ++p)
                CHECK(d.pattern.sequences(n, p) == d.pattern.sequences(n, 0));
        }
    }
    SUBCASE("no communication weight forms a first-harmonic beam")
    {
        for (int N : {4, 9, 16})
        {
            ArchitectureOptions o = opt;
            o.elements_per_layer = {N};
            const ArchitectureSpec sp = make_architecture(o);
            const std::vector<double> ph(static_cast<std::size_t>(N), 0.0);
            const SplitDesign d = design_split_pattern(sp, ph, sense, 8, 2, {0.0, 1.0});
            CHECK(d.sense_gain >= 0.8 * N * N);
        }
    }
    SUBCASE("balanced design is feasible and conserves power")
    {
        const SplitDesign d = design_split_pattern(spec, phases, sense, 8, 3);
        CHECK(d.pattern.max_violation() <= 1e-12);
        const auto h = harmonic_coefficients(d.pattern);
        CHECK(parseval_gap(d.pattern, h) <= 1e-12);
        CHECK(d.sense_gain > 0.0);
        CHECK(d.c0.norm() > 0.0);
    }
    SUBCASE("unreachable magnitude is infeasible")
    {
        try
        {
            design_split_pattern(spec, phases, sense, 8, 3, {}, 1.5);
            FAIL("expected an error");
        }
        catch (const Error &e)
        {
            CHECK(e.code() == ErrorCode::InfeasibleSplit);
        }
    }
}
