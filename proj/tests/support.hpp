// Shared fixtures for the unit tests.
#pragma once

#include "imisac/channel.hpp"
#include "imisac/framework.hpp"
#include "imisac/optimize.hpp"
#include "imisac/random.hpp"

#include <vector>

namespace imisac::test
{
    inline CMatrix random_matrix(Rng &rng, Eigen::Index rows, Eigen::Index cols)
    {
        return rng.complex_normal(rows, cols);
    }

    inline CVector random_vector(Rng &rng, Eigen::Index n)
    {
        return rng.complex_normal(n, 1).col(0);
    }

    inline LayerState unit_layer(Rng &rng, int n)
    {
        LayerState l{ConstraintFamily::unit_modulus(), CVector(n)};
        for (int i = 0; i < n; ++i)
            l.q(i) = std::polar(1.0, rng.phase());
        return l;
    }

    // Custom chain with explicit feeds: sizes[0] = K, sizes[l] = N_l.
    struct Chain
    {
        ArchitectureSpec spec;
        std::vector<FeedingMatrix> feeds;
        ReconfigState state;
        BasebandProcessor V;
    };

    inline Chain random_chain(Rng &rng, const std::vector<int> &sizes, int streams)
    {
        Chain c;
        ArchitectureOptions opt;
        opt.kind = ArchKind::Custom;
        opt.elements_per_layer.assign(sizes.begin() + 1, sizes.end());
        opt.num_rf_chains = sizes.front();
        opt.num_streams = streams;
        c.spec = make_architecture(opt);
        for (std::size_t l = 1; l < sizes.size(); ++l)
        {
            c.feeds.push_back({static_cast<int>(l - 1), random_matrix(rng, sizes[l], sizes[l - 1]),
                               FeedTopology::DenseDiffraction});
            c.state.layers.push_back(unit_layer(rng, sizes[l]));
        }
        c.V = {random_matrix(rng, sizes.front(), streams), 1.0};
        c.V.total_power_budget = c.V.power();
        return c;
    }

    // Scenario over a chain with i.i.d. user channels and far-field targets.
    inline Scenario random_scenario(Rng &rng, const std::vector<int> &sizes, int streams, int users, int targets,
                                    double noise = 0.1)
    {
        Chain c = random_chain(rng, sizes, streams);
        Scenario sc;
        sc.spec = c.spec;
        sc.feeds = c.feeds;
        sc.baseband = c.V;
        sc.channels.H = random_matrix(rng, users, sizes.back());
        sc.channels.noise_power = noise;
        sc.channels.wavelength = sc.spec.wavelength();
        for (int t = 0; t < targets; ++t)
            sc.channels.target_steering.push_back(farfield_steering(
                sc.spec.layers.back().positions, {rng.uniform(-1.0, 1.0), 0.0}, sc.spec.wavelength()));
        return sc;
    }
}
