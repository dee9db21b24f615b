// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/channel.hpp"
#include "imisac/random.hpp"

#include <algorithm>
#include <cmath>

namespace imisac
{
    namespace
    {
        void require_wavelength(double wavelength)
        {
            if (!(wavelength > 0.0) || !std::isfinite(wavelength))
                fail(ErrorCode::InvalidWavelength, "wavelength must be positive and finite");
        }

        double spectral_norm(const CMatrix &m)
        {
            if (m.size() == 0)
                return 0.0;
            Eigen::JacobiSVD<CMatrix> svd(m);
            return svd.singularValues()(0);
        }
    }

    Vec3 Direction::unit() const
    {
        const double ce = std::cos(elevation);
        return {ce * std::sin(azimuth), std::sin(elevation), ce * std::cos(azimuth)};
    }

    double GeometryContext::aperture_size() const
    {
        double d = 0.0;
        for (std::size_t i = 0; i < positions.size(); ++i)
            for (std::size_t k = i + 1; k < positions.size(); ++k)
                d = std::max(d, (positions[i] - positions[k]).norm());
        return d;
    }

    double GeometryContext::rayleigh_distance() const
    {
        const double D = aperture_size();
        return 2.0 * D * D / wavelength;
    }

    CVector farfield_steering(std::span<const Vec3> positions, Direction direction, double wavelength)
    {
        require_wavelength(wavelength);
        if (positions.empty())
            fail(ErrorCode::InvalidArgument, "steering vector needs at least one element");
        const Vec3 u = direction.unit();
        CVector a(static_cast<Eigen::Index>(positions.size()));
        for (std::size_t n = 0; n < positions.size(); ++n)
            a(static_cast<Eigen::Index>(n)) = std::polar(1.0, kTwoPi * positions[n].dot(u) / wavelength);
        return a;
    }

    CVector nearfield_steering(std::span<const Vec3> positions, const Vec3 &source, double wavelength)
    {
        require_wavelength(wavelength);
        if (positions.empty())
            fail(ErrorCode::InvalidArgument, "steering vector needs at least one element");
        std::vector<double> dist(positions.size());
        for (std::size_t n = 0; n < positions.size(); ++n)
        {
            dist[n] = (positions[n] - source).norm();
            if (dist[n] < 1e-9)
                fail(ErrorCode::CoincidentSource, "source coincides with element " + std::to_string(n));
        }
        CVector a(static_cast<Eigen::Index>(positions.size()));
        for (std::size_t n = 0; n < positions.size(); ++n)
            a(static_cast<Eigen::Index>(n)) = std::polar(1.0, -kTwoPi * (dist[n] - dist[0]) / wavelength);
        return a;
    }

    double max_phase_error(const CVector &a, const CVector &b)
    {
        if (a.size() != b.size())
            fail(ErrorCode::DimensionMismatch, "steering vectors differ in length");
        double worst = 0.0;
        for (Eigen::Index n = 0; n < a.size(); ++n)
            worst = std::max(worst, std::abs(std::arg(a(n) * std::conj(b(n)))));
        return worst;
    }

    cplx diffraction_coefficient(const Vec3 &from, const Vec3 &to, double wavelength, double element_area)
    {
        const Vec3 delta = to - from;
        const double d = delta.norm();
        const double cos_chi = std::abs(delta.z()) / d;
        const cplx obliquity = 1.0 / (kTwoPi * d) - kJ / wavelength;
        return (element_area * cos_chi / d) * obliquity * std::polar(1.0, kTwoPi * d / wavelength);
    }

    CMatrix sim_diffraction_matrix(std::span<const Vec3> from, std::span<const Vec3> to, double wavelength,
                                   double element_area)
    {
        require_wavelength(wavelength);
        if (from.empty() || to.empty())
            fail(ErrorCode::InvalidArgument, "diffraction matrix needs nonempty layers");
        double min_gap = std::numeric_limits<double>::infinity();
        for (const auto &p : to)
            for (const auto &s : from)
                min_gap = std::min(min_gap, p.z() - s.z());
        if (!(min_gap > 0.0))
            fail(ErrorCode::NonPositiveSpacing, "receiving layer must sit at positive spacing above the source layer");

        CMatrix W(static_cast<Eigen::Index>(to.size()), static_cast<Eigen::Index>(from.size()));
        for (std::size_t n = 0; n < to.size(); ++n)
            for (std::size_t m = 0; m < from.size(); ++m)
                W(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) =
                    diffraction_coefficient(from[m], to[n], wavelength, element_area);
        return W;
    }

    cplx waveguide_entry(double alpha, double beta, double arclength)
    {
        return std::exp(-cplx{alpha, beta} * arclength);
    }

    double guided_phase_constant(double carrier_frequency, double relative_permittivity)
    {
        return kTwoPi * carrier_frequency * std::sqrt(relative_permittivity) / kSpeedOfLight;
    }

    FeedingMatrix waveguide_feed(const ArchitectureSpec &spec, double alpha, double beta)
    {
        if (spec.layers.empty())
            fail(ErrorCode::InvalidArgument, "architecture has no layers");
        if (alpha < 0.0)
            fail(ErrorCode::InvalidArgument, "waveguide attenuation must be nonnegative");
        const auto &layer = spec.layers.front();
        const int K = spec.num_rf_chains;
        const int N = layer.elements;
        if (static_cast<int>(layer.positions.size()) != N)
            fail(ErrorCode::DimensionMismatch, "layer 0: position count differs from element count");

        FeedingMatrix feed;
        feed.layer = 0;
        feed.topology = FeedTopology::BlockDiagonalWaveguide;
        feed.T = CMatrix::Zero(N, K);

        std::vector<double> arclength(static_cast<std::size_t>(K), 0.0);
        std::vector<int> last(static_cast<std::size_t>(K), -1);
        for (int n = 0; n < N; ++n)
        {
            const int k = spec.waveguide_of(0, n);
            if (k < 0 || k >= K)
                fail(ErrorCode::UnassignedElement, "element " + std::to_string(n) + " is not on a waveguide");
            auto &rho = arclength[static_cast<std::size_t>(k)];
            auto &prev = last[static_cast<std::size_t>(k)];
            if (prev >= 0)
                rho += (layer.positions[static_cast<std::size_t>(n)] - layer.positions[static_cast<std::size_t>(prev)]).norm();
            prev = n;
            feed.T(n, k) = waveguide_entry(alpha, beta, rho);
        }
        return feed;
    }

    std::vector<FeedingMatrix> build_feeds(const ArchitectureSpec &spec, const FeedOptions &options)
    {
        const double lambda = spec.wavelength();
        const double spacing = spec.element_spacing_wl * lambda;
        const double area = options.element_area.value_or(spacing * spacing);
        const double beta = options.beta.value_or(guided_phase_constant(spec.carrier_frequency, options.relative_permittivity));

        std::vector<FeedingMatrix> feeds;
        for (int l = 0; l < spec.num_layers(); ++l)
        {
            const auto &layer = spec.layers[static_cast<std::size_t>(l)];
            FeedingMatrix f;
            f.layer = l;
            f.topology = layer.feeding;
            switch (layer.feeding)
            {
            case FeedTopology::ScalarCarrier:
                if (l != 0 || spec.num_rf_chains != 1)
                    fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + ": ScalarCarrier needs a single RF chain feeding layer 0");
                f.T = CMatrix::Constant(layer.elements, 1, cplx{spec.carrier_attenuation, 0.0});
                break;
            case FeedTopology::BlockDiagonalWaveguide:
                if (l != 0)
                    fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + ": waveguide feeding only applies to layer 0");
                f = waveguide_feed(spec, options.alpha, beta);
                break;
            case FeedTopology::DenseDiffraction:
            {
                const auto &from = l == 0 ? spec.source_positions : spec.layers[static_cast<std::size_t>(l - 1)].positions;
                f.T = sim_diffraction_matrix(from, layer.positions, lambda, area);
                break;
            }
            }
            if (spec.normalization == PowerNormalization::PerLayer)
            {
                const double s = spectral_norm(f.T);
                if (s > 0.0)
                    f.T /= s;
            }
            feeds.push_back(std::move(f));
        }
        return feeds;
    }

    std::string_view to_string(ChannelModel::Kind k)
    {
        switch (k)
        {
        case ChannelModel::Kind::LoS: return "LoS";
        case ChannelModel::Kind::Rician: return "Rician";
        case ChannelModel::Kind::Rayleigh: return "Rayleigh";
        }
        return "LoS";
    }

    std::optional<ChannelModel::Kind> parse_channel_kind(std::string_view s)
    {
        for (auto k : {ChannelModel::Kind::LoS, ChannelModel::Kind::Rician, ChannelModel::Kind::Rayleigh})
            if (to_string(k) == s)
                return k;
        return std::nullopt;
    }

    double free_space_gain(double wavelength, double distance)
    {
        return wavelength / (4.0 * kPi * distance);
    }

    ChannelSet generate_user_channels(const GeometryContext &geometry, std::span<const Vec3> users,
                                      const ChannelModel &model, std::uint64_t seed)
    {
        require_wavelength(geometry.wavelength);
        if (users.empty())
            fail(ErrorCode::InvalidArgument, "user list is empty");
        if (model.kind == ChannelModel::Kind::Rician && !(model.k_factor >= 0.0))
            fail(ErrorCode::InvalidArgument, "Rician K-factor must be nonnegative");

        const auto N = static_cast<Eigen::Index>(geometry.positions.size());
        const auto U = static_cast<Eigen::Index>(users.size());
        ChannelSet out;
        out.wavelength = geometry.wavelength;
        out.H.resize(U, N);

        const double rayleigh = geometry.rayleigh_distance();
        bool near = false;
        Rng rng(seed);
        for (Eigen::Index u = 0; u < U; ++u)
        {
            const Vec3 &user = users[static_cast<std::size_t>(u)];
            if (model.kind == ChannelModel::Kind::Rayleigh)
            {
                for (Eigen::Index n = 0; n < N; ++n)
                    out.H(u, n) = rng.complex_normal(1.0);
                continue;
            }
            const double d0 = (geometry.positions.front() - user).norm();
            near = near || d0 < rayleigh;
            const double gain = free_space_gain(geometry.wavelength, d0);
            const CVector los = gain * nearfield_steering(geometry.positions, user, geometry.wavelength).conjugate();
            if (model.kind == ChannelModel::Kind::LoS)
            {
                out.H.row(u) = los.transpose();
                continue;
            }
            const double K = model.k_factor;
            const double w_los = std::sqrt(K / (K + 1.0));
            const double w_nlos = std::sqrt(1.0 / (K + 1.0));
            for (Eigen::Index n = 0; n < N; ++n)
                out.H(u, n) = w_los * los(n) + w_nlos * gain * rng.complex_normal(1.0);
        }
        out.regime = near ? FieldRegime::NearField : FieldRegime::FarField;
        return out;
    }
}
