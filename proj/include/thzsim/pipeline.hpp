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

#pragma once

#include "thzsim/gev_beamformer.hpp"
#include "thzsim/maxmin_semantics.hpp"

#include <cstdint>
#include <vector>

namespace thzsim {

struct PipelineConfig
{
    double lambda = 0.9;              ///< weight of the instantaneous beamformer
    double beta = 0.7;                ///< weight of the instantaneous semantic state
    SemanticThresholds thresholds;
    double z_max = 1.0;
    int outer_rounds = 2;
    AlternatingOptions alternating;
    /// Per-slot designs run a bisection every outer round; restarts and temperature
    /// continuation cost several times the runtime there for no measurable gain.
    FeasibilityOptions feasibility{.min_temperature = 0.02, .restarts = 0};
    double bisection_relative_tol = 1.0 / 256.0; ///< tol_alpha = this * alpha^u
    bool robust = true;               ///< account for the channel estimation error
};

/// Per-user inputs at one slot; channels are normalized to unit noise and power.
struct UserContext
{
    CMat channel_estimate;
    Vec z_tilde;                      ///< causal prediction of the semantic state
    Mat z_covariance;                 ///< its predictive covariance
    CMat static_beam;                 ///< mode codewords scaled to unit Frobenius norm
    StaticBeamMoments static_moments; ///< posterior moments on the same scale
};

struct PipelineResult
{
    std::vector<CMat> beamformers;    ///< lambda V-hat + (1 - lambda) V~
    std::vector<CMat> combiners;
    std::vector<Vec> states;
    std::vector<double> design_weights;
    double alpha = 0.0;
    int iterations = 0;               ///< alternating + bisection iterations
    bool chance_relaxed = false;      ///< alpha = 0 infeasible under the chance constraint
};

/// Semantic weight of a user from sigma points of its predictive distribution.
double design_weight(const Vec& z_tilde, const Mat& z_covariance, double similarity_scale);

PipelineResult full_pipeline_step(std::span<const UserContext> users, double error_variance, double noise_variance,
                                  const PipelineConfig& config);

struct UserMetrics
{
    double semantic_information = 0.0;
    double reliability = 0.0;
    double distortion = 0.0;
};

struct EvaluationOptions
{
    int noise_draws = 200;
    int num_candidates = 16;
    double z_max = 1.0;
    SemanticThresholds thresholds;
};

/// Receiver-side prior on each user's semantic state.
struct SemanticPrior
{
    Vec mean;
    Mat covariance;
};

/// Transmit over the true channels, decode with the LMMSE receiver (interference
/// treated as Gaussian) and score. Noise draws come from streams keyed by
/// (stream_seed, user) so every scheme sees the same draws.
std::vector<UserMetrics> evaluate_transmission(std::span<const CMat> true_channels, std::span<const CMat> beamformers,
                                               std::span<const CMat> combiners, std::span<const Vec> states,
                                               std::span<const SemanticPrior> priors, double noise_variance,
                                               const EvaluationOptions& options, std::uint64_t stream_seed);

}  // namespace thzsim
