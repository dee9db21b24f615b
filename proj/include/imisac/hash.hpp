// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#pragma once

#include "imisac/common.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace imisac
{
    // Canonical little-endian byte stream hashed with 64-bit FNV-1a.
    // Doubles are written as their IEEE-754 bit patterns, so hashes are
    // sensitive to every bit of every matrix entry.
    class Hasher
    {
    public:
        Hasher &add(std::uint64_t v);
        Hasher &add(std::int64_t v) { return add(static_cast<std::uint64_t>(v)); }
        Hasher &add(int v) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
        Hasher &add(double v);
        Hasher &add(cplx v) { return add(v.real()).add(v.imag()); }
        Hasher &add(std::string_view s);
        Hasher &add(const CMatrix &m);
        Hasher &add(const RVector &v);
        Hasher &add(const Vec3 &v) { return add(v.x()).add(v.y()).add(v.z()); }

        std::uint64_t value() const { return state_; }
        std::string hex() const;

    private:
        void bytes(std::span<const unsigned char> data);
        std::uint64_t state_ = 0xcbf29ce484222325ULL;
    };

    std::string to_hex(std::uint64_t v);
}
