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

#include "thzsim/array_channel.hpp"
#include "thzsim/baselines.hpp"
#include "thzsim/pipeline.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace thzsim {

inline constexpr const char* kConfigSchema = "thzsim-config/v1";

struct MobilityConfig
{
    double speed = 25.0;             ///< m/s (90 km/h)
    double min_distance = 5.0;       ///< m
    double max_distance = 15.0;
    double max_angle = kPi / 3.0;    ///< users in [-max_angle, max_angle]
    double slot_duration = 1e-4;     ///< s between slots
    double uplink_delay = 4e-6;      ///< s between pilot and downlink
};

struct CausalConfig
{
    int num_nodes = 4;               ///< S modality nodes
    double edge_probability = 0.3;   ///< ER graph
    int warmup_steps = 300;          ///< episode used to learn the structure
    double content_scale = 2.5;      ///< z = clip(x[0:D] / scale)
    double observation_variance = 0.05;
    double forgetting = 0.9;
    double codeword_sharpness = 1.0;
    std::string model_path;          ///< optional cgm-model/v1 file replacing the learned model
    int intervened_environments = 1; ///< for episode export
    std::vector<std::vector<int>> intervention_targets{{1}};
};

struct ExperimentConfig
{
    ThzLinkConfig link;
    ArrayGeometry geometry;
    int semantic_dim = 2;
    MobilityConfig mobility;
    CausalConfig causal;
    PipelineConfig pipeline;
    EvaluationOptions evaluation;
    double tx_power = 1e-5;          ///< W per user
    double pilot_snr_db = 20.0;
    int dft_window = 2;
    std::vector<SchemeKind> schemes{SchemeKind::proposed, SchemeKind::perfect_csi, SchemeKind::dft_tracking,
                                    SchemeKind::naive_zf};
    std::vector<int> users{2, 4, 6};
    std::vector<std::uint64_t> seeds; ///< explicit seed list
    int steps = 200;

    /// Collects every violation and throws one std::invalid_argument listing them.
    void validate() const;
};

ExperimentConfig preset_config(const std::string& name);
ExperimentConfig load_config(const std::string& path, const std::string& preset = "desk");
/// Overlay a JSON document on `base`.
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base);
std::string config_to_json(const ExperimentConfig& config);
std::vector<std::uint64_t> seed_range(int count);

struct ExperimentRecord
{
    SchemeKind scheme = SchemeKind::proposed;
    int num_users = 0;
    std::uint64_t seed = 0;
    int t = 0;
    int user = -1;                   ///< -1: aggregate over users
    double semantic_information = 0.0;
    double min_semantic_information = 0.0;
    double semantic_reliability = 0.0;
    double distortion = 0.0;
    int iterations = 0;
    double wall_time = 0.0;          ///< seconds; not part of records.csv
};

/// Deterministic given the config: records are sorted by (scheme order, K, seed, t, user).
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config);

std::string records_csv(std::span<const ExperimentRecord> records);
std::string timing_csv(std::span<const ExperimentRecord> records);

struct MetricSummary
{
    double mean = 0.0;
    double ci95 = 0.0;               ///< half-width, Student t over per-seed means
};

struct SummaryRow
{
    SchemeKind scheme = SchemeKind::proposed;
    int num_users = 0;
    int num_seeds = 0;
    MetricSummary reliability;
    MetricSummary information;
    MetricSummary min_information;
    MetricSummary distortion;
    double iterations = 0.0;
};

/// Mean and 95% Student-t half-width of a sample (0 for a single value).
MetricSummary mean_ci95(std::span<const double> values);

/// Per-(scheme, K) means over seeds of the per-seed time averages of the
/// aggregate rows. Schemes ordered by overall mean min-user information.
std::vector<SummaryRow> summarize(std::span<const ExperimentRecord> records);
std::string summary_csv(std::span<const SummaryRow> rows);
std::string summary_json(std::span<const SummaryRow> rows);

/// Writes records.csv, summary.csv, summary.json and timing.csv into `dir`.
void write_outputs(const std::string& dir, std::span<const ExperimentRecord> records);

}  // namespace thzsim
