// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#pragma once

#include "imisac/framework.hpp"

namespace imisac
{
    // w / |w|; the origin maps to 1.
    cplx project_unit_modulus(cplx w);

    // Nearest point of the circle {j/2 + e^{j psi} / 2}. The center j/2 maps to
    // psi = 0, i.e. (1 + j) / 2.
    cplx project_lorentzian(cplx w);

    // Circle parameter psi of a point on (or projected onto) the Lorentzian circle.
    double lorentzian_parameter(cplx w);
    inline cplx lorentzian_point(double psi) { return 0.5 * (kJ + std::polar(1.0, psi)); }

    // Amplitude families act on |w| and drop the phase. Ranges clamp, sets take
    // the nearest level with ties going to the smaller level.
    double project_amplitude(cplx w, const ConstraintFamily &family);
}
