// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------
//
// Propagation operators: steering vectors, user channels, inter-layer
// diffraction and waveguide feeds.
//
// Angle convention: a direction (azimuth, elevation) maps to the unit vector
//     u = (cos(el) sin(az), sin(el), cos(el) cos(az)),
// so (0, 0) is the +z normal of an aperture lying in the xy-plane and the
// azimuth sweeps the x-z plane.

#pragma once

#include "imisac/framework.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace imisac
{
    struct Direction
    {
        double azimuth = 0.0;   // rad
        double elevation = 0.0; // rad

        Vec3 unit() const;
    };

    enum class FieldRegime { FarField, NearField };

    struct ChannelSet
    {
        CMatrix H; // U x N_L, row u is h_u^H
        std::vector<CVector> target_steering;
        double noise_power = 1.0; // sigma^2, watts
        double wavelength = 0.0;  // meters
        FieldRegime regime = FieldRegime::FarField;

        int num_users() const { return static_cast<int>(H.rows()); }
    };

    struct GeometryContext
    {
        std::vector<Vec3> positions; // radiating aperture, meters
        double wavelength = 0.0;

        // Largest element-to-element distance D.
        double aperture_size() const;
        // 2 D^2 / lambda.
        double rayleigh_distance() const;
    };

    // Entry n = exp(j 2 pi (p_n . u) / lambda).
    CVector farfield_steering(std::span<const Vec3> positions, Direction direction, double wavelength);

    // Entry n = exp(-j 2 pi (d_n - d_0) / lambda); d_0 is the distance to the first element.
    CVector nearfield_steering(std::span<const Vec3> positions, const Vec3 &source, double wavelength);

    // Largest |wrapped phase| of a_n conj(b_n) over n.
    double max_phase_error(const CVector &a, const CVector &b);

    // Rayleigh-Sommerfeld coefficient from a source element to a receiving
    // element of area A whose normal is z:
    //     (A cos(chi) / d) (1 / (2 pi d) - j / lambda) exp(j 2 pi d / lambda),
    // with cos(chi) = |dz| / d.
    cplx diffraction_coefficient(const Vec3 &from, const Vec3 &to, double wavelength, double element_area);

    // Dense N_to x N_from diffraction feed between two parallel layers.
    // The receiving layer must lie strictly above (+z) the transmitting one.
    CMatrix sim_diffraction_matrix(std::span<const Vec3> from, std::span<const Vec3> to, double wavelength,
                                   double element_area);

    inline constexpr double kDefaultWaveguideAlpha = 0.58;      // nepers / m
    inline constexpr double kDefaultWaveguidePermittivity = 2.2; // relative

    // exp(-(alpha + j beta) rho).
    cplx waveguide_entry(double alpha, double beta, double arclength);

    // Block-diagonal N_1 x K feed. Elements on one waveguide are visited in index
    // order; the first one sits at the feed point and rho accumulates along the
    // polyline through the element positions.
    FeedingMatrix waveguide_feed(const ArchitectureSpec &spec, double alpha, double beta);

    // Guided phase constant 2 pi f sqrt(eps_r) / c.
    double guided_phase_constant(double carrier_frequency, double relative_permittivity);

    struct FeedOptions
    {
        double alpha = kDefaultWaveguideAlpha;
        double relative_permittivity = kDefaultWaveguidePermittivity;
        std::optional<double> beta;         // overrides the permittivity-derived value
        std::optional<double> element_area; // default (element spacing)^2
    };

    // One FeedingMatrix per layer following each layer's topology. With
    // PerLayer normalization every T_l is scaled to unit spectral norm.
    std::vector<FeedingMatrix> build_feeds(const ArchitectureSpec &spec, const FeedOptions &options = {});

    struct ChannelModel
    {
        enum class Kind { LoS, Rician, Rayleigh };
        Kind kind = Kind::LoS;
        double k_factor = 10.0; // linear, Rician only
    };

    std::string_view to_string(ChannelModel::Kind k);
    std::optional<ChannelModel::Kind> parse_channel_kind(std::string_view s);

    // LoS rows are (lambda / (4 pi d_0)) times the conjugated spherical steering
    // vector toward the user (d_0: distance to the first element). Rician mixes
    //     sqrt(K/(K+1)) h_LoS + sqrt(1/(K+1)) beta g,   g ~ CN(0, I).
    // Rayleigh rows are unit-variance i.i.d. CN(0, 1) small-scale fading.
    ChannelSet generate_user_channels(const GeometryContext &geometry, std::span<const Vec3> users,
                                      const ChannelModel &model, std::uint64_t seed);

    // Free-space amplitude factor lambda / (4 pi d).
    double free_space_gain(double wavelength, double distance);
}
