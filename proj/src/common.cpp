// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/common.hpp"
#include "imisac/random.hpp"

#include <cmath>

namespace imisac
{
    std::string_view library_version() { return "0.3.0"; }

    std::string_view error_code_name(ErrorCode code)
    {
        switch (code)
        {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ConstraintViolation: return "ConstraintViolation";
        case ErrorCode::LayerOutOfRange: return "LayerOutOfRange";
        case ErrorCode::InvalidWavelength: return "InvalidWavelength";
        case ErrorCode::CoincidentSource: return "CoincidentSource";
        case ErrorCode::NonPositiveSpacing: return "NonPositiveSpacing";
        case ErrorCode::UnassignedElement: return "UnassignedElement";
        case ErrorCode::StreamMapInvalid: return "StreamMapInvalid";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::NonPositiveReference: return "NonPositiveReference";
        case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
        case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
        case ErrorCode::SingularEffectiveChannel: return "SingularEffectiveChannel";
        case ErrorCode::InsufficientObservations: return "InsufficientObservations";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::UnsupportedMultiLayerModulation: return "UnsupportedMultiLayerModulation";
        case ErrorCode::InfeasibleSplit: return "InfeasibleSplit";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::HeterogeneousResults: return "HeterogeneousResults";
        case ErrorCode::IoError: return "IoError";
        }
        return "Unknown";
    }

    std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_for(std::uint64_t master, Stream stream, std::uint64_t index)
    {
        const auto s = static_cast<std::uint64_t>(stream);
        return splitmix64(splitmix64(master ^ (s * 0x9E3779B97F4A7C15ULL)) + index);
    }

    double Rng::uniform()
    {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double Rng::normal()
    {
        if (has_spare_)
        {
            has_spare_ = false;
            return spare_;
        }
        // Box-Muller; 1 - u keeps the log argument in (0, 1].
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(kTwoPi * u2);
        has_spare_ = true;
        return r * std::cos(kTwoPi * u2);
    }

    cplx Rng::complex_normal(double variance)
    {
        const double s = std::sqrt(0.5 * variance);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    CMatrix Rng::complex_normal(Eigen::Index rows, Eigen::Index cols, double variance)
    {
        CMatrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                m(r, c) = complex_normal(variance);
        return m;
    }
}
