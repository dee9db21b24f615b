// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/hash.hpp"

#include <array>
#include <bit>
#include <cstdio>

namespace imisac
{
    void Hasher::bytes(std::span<const unsigned char> data)
    {
        for (unsigned char b : data)
        {
            state_ ^= b;
            state_ *= 0x100000001b3ULL;
        }
    }

    Hasher &Hasher::add(std::uint64_t v)
    {
        std::array<unsigned char, 8> le{};
        for (int i = 0; i < 8; ++i)
            le[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
        bytes(le);
        return *this;
    }

    Hasher &Hasher::add(double v)
    {
        return add(std::bit_cast<std::uint64_t>(v));
    }

    Hasher &Hasher::add(std::string_view s)
    {
        add(static_cast<std::uint64_t>(s.size()));
        bytes({reinterpret_cast<const unsigned char *>(s.data()), s.size()});
        return *this;
    }

    // Row-major, dimensions first.
    Hasher &Hasher::add(const CMatrix &m)
    {
        add(static_cast<std::uint64_t>(m.rows())).add(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                add(m(r, c));
        return *this;
    }

    Hasher &Hasher::add(const RVector &v)
    {
        add(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i)
            add(v(i));
        return *this;
    }

    std::string Hasher::hex() const { return to_hex(state_); }

    std::string to_hex(std::uint64_t v)
    {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
        return buf;
    }
}
