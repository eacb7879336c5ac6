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

// episodes/v1: one directory per environment holding flat little-endian
// float64 blobs in row-major order; complex arrays carry a trailing
// dimension of 2 (re, im). manifest.json at the root lists every array.
#pragma once

#include "thzsim/causal_dynamics.hpp"
#include "thzsim/sim_harness.hpp"

#include <string>
#include <vector>

namespace thzsim {

inline constexpr const char* kEpisodeSchema = "episodes/v1";

struct EnvironmentEpisode
{
    int environment = 0;
    std::vector<int> targets;   ///< intervened nodes; empty for environment 0
    Episode episode;            ///< X (observations), latent and per-step flags
    Mat states;                 ///< T x D semantic states z
    std::vector<CMat> channels; ///< H_t, N x M
    std::vector<CMat> beams;    ///< V_t, M x D
    std::vector<CVec> received; ///< Y_t = H_t V_t z_t + n_t, N entries
};

/// Simulates environments 0..L for user 0 of the first seed and writes them under `dir`.
void export_episodes(const ExperimentConfig& config, const std::string& dir);

std::vector<EnvironmentEpisode> load_episodes(const std::string& dir);

}  // namespace thzsim
