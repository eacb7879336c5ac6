// SPDX-License-Identifier: Apache-2.0
//
// thzsim: multi-user terahertz link-level simulator and semantic beamforming toolkit
// Copyright (C) 2026 The thzsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "scenario.hpp"

#include <algorithm>
#include <cmath>

namespace thzsim::detail {
namespace {

constexpr std::uint64_t kTagDrop = 0x64726f70ULL;
constexpr std::uint64_t kTagNlos = 0x6e6c6f73ULL;
constexpr std::uint64_t kTagPilot = 0x70696c6fULL;
constexpr std::uint64_t kTagGraph = 0x67726170ULL;
constexpr std::uint64_t kTagWeights = 0x77656967ULL;
constexpr std::uint64_t kTagContent = 0x636f6e74ULL;

ThzLinkConfig at_distance(ThzLinkConfig cfg, double d)
{
    cfg.distance = d;
    return cfg;
}

}  // namespace

ChannelScenario::ChannelScenario(const ExperimentConfig& config, int num_users, std::uint64_t seed)
    : config_(&config), seed_(seed)
{
    const auto& mob = config.mobility;
    const auto& link = config.link;
    const double max_doppler = mobility_to_doppler(mob.speed, link.carrier_freq, 0.0);
    aging_ = std::clamp(std::cyl_bessel_j(0.0, 2.0 * kPi * max_doppler * mob.uplink_delay), 0.0, 1.0);
    normalization_ = std::sqrt(config.tx_power / link.noise_variance);

    // User k's drop depends only on (seed, k), so adding users never moves the others.
    for (int k = 0; k < num_users; ++k)
    {
        Rng rng = make_stream(seed, {static_cast<std::uint64_t>(k), kTagDrop});
        UserDrop u;
        const double r = uniform(rng, mob.min_distance, mob.max_distance);
        const double theta = uniform(rng, -mob.max_angle, mob.max_angle);
        const double heading = uniform(rng, 0.0, 2.0 * kPi);
        u.x0 = r * std::cos(theta);
        u.y0 = r * std::sin(theta);
        u.vx = mob.speed * std::cos(heading);
        u.vy = mob.speed * std::sin(heading);
        u.los_phase_delay = r / kSpeedOfLight;
        Rng nlos_rng = make_stream(seed, {static_cast<std::uint64_t>(k), kTagNlos});
        const double max_excess = (link.num_taps - 1) * link.sample_period;
        u.nlos = draw_nlos_paths(at_distance(link, r), los_gain(at_distance(link, r), u.los_phase_delay), nlos_rng,
                                 max_excess);
        for (auto& p : u.nlos)
            p.doppler = mobility_to_doppler(mob.speed, link.carrier_freq, heading - (p.aoa + kPi));
        drops_.push_back(std::move(u));
    }
}

CMat ChannelScenario::true_channel(int k, int t) const
{
    const auto& cfg = *config_;
    const UserDrop& u = drops_.at(static_cast<std::size_t>(k));
    const double time = t * cfg.mobility.slot_duration + cfg.mobility.uplink_delay;
    const double x = u.x0 + u.vx * time;
    const double y = u.y0 + u.vy * time;
    const double r = std::hypot(x, y);
    const double theta = std::atan2(y, x);

    std::vector<PathParams> paths;
    PathParams los;
    los.gain = los_gain(at_distance(cfg.link, r), u.los_phase_delay);
    los.aod = theta;
    los.aoa = theta;
    // Moving away (positive radial speed) lowers the received frequency.
    const double radial = (x * u.vx + y * u.vy) / r;
    los.doppler = -cfg.link.carrier_freq * radial / kSpeedOfLight;
    paths.push_back(los);
    paths.insert(paths.end(), u.nlos.begin(), u.nlos.end());

    std::vector<CMat> taps;
    taps.reserve(static_cast<std::size_t>(cfg.link.num_taps));
    for (int l = 0; l < cfg.link.num_taps; ++l)
        taps.push_back(generate_tap(cfg.link, cfg.geometry, paths, l, time));
    return subcarrier_channel(taps, 0, cfg.link.num_subcarriers);
}

ChannelRealization ChannelScenario::estimate(int k, int t) const
{
    Rng rng = make_stream(seed_, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(t), kTagPilot});
    ChannelRealization r = estimate_channel(true_channel(k, t), config_->pilot_snr_db, aging_, rng);
    r.time_index = t;
    return r;
}

CausalWorld make_causal_world(const ExperimentConfig& config, std::uint64_t seed)
{
    CausalWorld w;
    Rng graph_rng = make_stream(seed, {kTagGraph});
    w.graph = erdos_renyi_dag(config.causal.num_nodes, config.causal.edge_probability, graph_rng);
    w.graph.beam_intervention_flags.assign(static_cast<std::size_t>(config.semantic_dim), 0);
    Rng weight_rng = make_stream(seed, {kTagWeights});
    w.transition = random_linear_gaussian(w.graph, weight_rng);
    w.transition.observation_variance = config.causal.observation_variance;
    return w;
}

Episode user_content(const CausalWorld& world, std::uint64_t seed, int user, int steps,
                     std::span<const int> targets, int environment)
{
    Rng rng = make_stream(seed, {static_cast<std::uint64_t>(user), static_cast<std::uint64_t>(environment),
                                 kTagContent});
    return simulate_episode(world.graph, world.transition, steps, targets, environment, rng);
}

}  // namespace thzsim::detail
