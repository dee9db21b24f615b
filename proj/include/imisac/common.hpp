// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace imisac
{
    using cplx = std::complex<double>;
    using CMatrix = Eigen::MatrixXcd;
    using CVector = Eigen::VectorXcd;
    using RVector = Eigen::VectorXd;
    using Vec3 = Eigen::Vector3d;

    inline constexpr double kPi = std::numbers::pi;
    inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
    inline constexpr double kSpeedOfLight = 299792458.0;
    inline constexpr cplx kJ{0.0, 1.0};

    // Stable, machine-readable error codes. The string form is part of the CLI contract.
    enum class ErrorCode
    {
        InvalidArgument,
        DimensionMismatch,
        ConstraintViolation,
        LayerOutOfRange,
        InvalidWavelength,
        CoincidentSource,
        NonPositiveSpacing,
        UnassignedElement,
        StreamMapInvalid,
        EmptyGrid,
        NonPositiveReference,
        NonFiniteObjective,
        StepSizeUnderflow,
        SingularEffectiveChannel,
        InsufficientObservations,
        RankDeficient,
        UnsupportedMultiLayerModulation,
        InfeasibleSplit,
        ParseError,
        ValidationError,
        HeterogeneousResults,
        IoError,
    };

    std::string_view error_code_name(ErrorCode code);

    class Error : public std::runtime_error
    {
    public:
        Error(ErrorCode code, const std::string &message)
            : std::runtime_error(message), code_(code) {}

        ErrorCode code() const noexcept { return code_; }
        std::string_view code_name() const { return error_code_name(code_); }

    private:
        ErrorCode code_;
    };

    [[noreturn]] inline void fail(ErrorCode code, const std::string &message)
    {
        throw Error(code, message);
    }

    std::string_view library_version();
}
