// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imisac
{
    namespace
    {
        // Points this close to the circle are returned unchanged, which keeps
        // every projection an exact fixed point on its own output.
        constexpr double kOnCircle = 4.0 * std::numeric_limits<double>::epsilon();
    }

    cplx project_unit_modulus(cplx w)
    {
        const double r = std::abs(w);
        if (r == 0.0)
            return {1.0, 0.0};
        if (std::abs(r - 1.0) <= kOnCircle)
            return w;
        return w / r;
    }

    double lorentzian_parameter(cplx w)
    {
        const cplx d = w - 0.5 * kJ;
        if (d == cplx{0.0, 0.0})
            return 0.0;
        return std::arg(d);
    }

    cplx project_lorentzian(cplx w)
    {
        if (std::abs(std::abs(w - 0.5 * kJ) - 0.5) <= kOnCircle)
            return w;
        return lorentzian_point(lorentzian_parameter(w));
    }

    double project_amplitude(cplx w, const ConstraintFamily &family)
    {
        const double r = std::abs(w);
        switch (family.kind)
        {
        case ConstraintFamily::Kind::AmplitudeRange:
            return std::clamp(r, family.lo, family.hi);
        case ConstraintFamily::Kind::AmplitudeSet:
        {
            if (family.levels.empty())
                fail(ErrorCode::InvalidArgument, "amplitude set is empty");
            double best = family.levels.front();
            double best_dist = std::abs(r - best);
            for (double level : family.levels)
            {
                const double d = std::abs(r - level);
                if (d < best_dist || (d == best_dist && level < best))
                {
                    best = level;
                    best_dist = d;
                }
            }
            return best;
        }
        default:
            fail(ErrorCode::InvalidArgument, "project_amplitude needs an amplitude family");
        }
    }
}
