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

// Per-(K, seed) world shared by the experiment runner and episode export:
// user drops, mobility, multipath channels and the causal content process.
#pragma once

#include "thzsim/causal_dynamics.hpp"
#include "thzsim/sim_harness.hpp"

#include <cstdint>
#include <vector>

namespace thzsim::detail {

struct UserDrop
{
    double x0 = 0.0, y0 = 0.0;     ///< BS at the origin, broadside along +x
    double vx = 0.0, vy = 0.0;
    double los_phase_delay = 0.0;  ///< fixed carrier phase reference; Doppler rotates it
    std::vector<PathParams> nlos;  ///< fixed over the run
};

class ChannelScenario
{
public:
    ChannelScenario(const ExperimentConfig& config, int num_users, std::uint64_t seed);

    /// True channel of user k during the downlink of slot t (raw units).
    CMat true_channel(int k, int t) const;
    /// LMMSE estimate from the slot-t uplink pilot, aged over the uplink-downlink delay.
    ChannelRealization estimate(int k, int t) const;
    /// Gauss-Markov correlation J0(2 pi nu_max tau) over the uplink-downlink delay.
    double aging() const { return aging_; }
    /// sqrt(p / sigma^2): multiplies raw channels so the solvers see unit noise and power.
    double normalization() const { return normalization_; }
    int num_users() const { return static_cast<int>(drops_.size()); }

private:
    const ExperimentConfig* config_;
    std::uint64_t seed_;
    std::vector<UserDrop> drops_;
    double aging_ = 1.0;
    double normalization_ = 1.0;
};

/// Ground-truth causal world of one seed: ER graph shared by every user.
struct CausalWorld
{
    CausalGraphModel graph;
    TransitionModel transition;
};

CausalWorld make_causal_world(const ExperimentConfig& config, std::uint64_t seed);

/// Latent/observation trajectory of one user over slots 0..steps.
Episode user_content(const CausalWorld& world, std::uint64_t seed, int user,
                     int steps, std::span<const int> targets, int environment);

}  // namespace thzsim::detail
