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

#include "thzsim/semantic_metrics.hpp"

#include <span>
#include <string>
#include <vector>

namespace thzsim {

using IntMat = Eigen::MatrixXi;

/// DAG over the modality nodes. adjacency(i, j) = 1 means node i at t-1
/// drives node j at t. Self-loops are not allowed.
struct CausalGraphModel
{
    IntMat adjacency;
    std::vector<int> intervention_flags;      ///< per node, 1 = conditional replaced in intervened environments
    std::vector<int> beam_intervention_flags; ///< per beam column
    Mat edge_posterior;                       ///< sigma(alpha_ij); empty when not learned
    Vec intervention_posterior;               ///< sigma(beta_j); empty when not learned

    int num_nodes() const { return static_cast<int>(adjacency.rows()); }
    /// Throws std::invalid_argument naming a cycle when the graph is not a DAG.
    std::vector<int> topological_order() const;
    bool is_dag() const;
    void validate() const;
    /// All-ones M x D mask with intervened beam columns zeroed.
    Mat beam_column_mask(Eigen::Index num_antennas) const;
    std::vector<int> parents(int node) const;
    int num_edges() const { return adjacency.sum(); }
};

CausalGraphModel empty_graph(int nodes);
CausalGraphModel chain_graph(int nodes);
/// Erdos-Renyi DAG: each pair ordered by a random permutation gets an edge with probability p.
CausalGraphModel erdos_renyi_dag(int nodes, double p, Rng& rng);

/// Linear-Gaussian transition s_t = (weights .* adjacency)^T s_{t-1} + bias + shift .* flags + noise
/// with observations x_t = s_t + observation noise.
struct TransitionModel
{
    Mat weights;              ///< (i, j): weight of parent i into node j
    Vec bias;
    Vec noise_variance;
    Vec intervention_shift;   ///< mean shift of p' per node
    Vec initial_mean;
    Vec initial_variance;
    double observation_variance = 0.05;

    int num_nodes() const { return static_cast<int>(bias.size()); }
    void validate(const CausalGraphModel& graph) const;
    /// Effective transition matrix A with s_t = A s_{t-1} + ...
    Mat transition_matrix(const CausalGraphModel& graph) const;
    Vec transition_mean(const CausalGraphModel& graph, const Vec& prev, std::span<const int> interventions) const;
};

/// Weights drawn as +-U[lo, hi] on existing edges, unit noise, zero bias,
/// shift = shift_sigmas * noise std.
TransitionModel random_linear_gaussian(const CausalGraphModel& graph, Rng& rng, double lo = 0.5, double hi = 1.0,
                                       double shift_sigmas = 2.0);

/// `interventions` is empty (observational) or one flag per node.
Vec sample_transition(const CausalGraphModel& graph, const TransitionModel& model, const Vec& prev,
                      std::span<const int> interventions, Rng& rng);
double node_log_density(const CausalGraphModel& graph, const TransitionModel& model, int node, const Vec& prev,
                        const Vec& next, std::span<const int> interventions);
double transition_log_density(const CausalGraphModel& graph, const TransitionModel& model, const Vec& prev,
                              const Vec& next, std::span<const int> interventions);

/// One environment's trajectory.
struct Episode
{
    Mat observations;                        ///< T x S
    Mat latent;                              ///< T x S, may be empty
    std::vector<std::vector<int>> interventions; ///< per step (transition into t); empty rows = observational
    int environment = 0;                     ///< 0 = observational
};

Episode simulate_episode(const CausalGraphModel& graph, const TransitionModel& model, int steps,
                         std::span<const int> intervention_targets, int environment, Rng& rng);

class LinearGaussianFilter
{
public:
    LinearGaussianFilter(CausalGraphModel graph, TransitionModel model);

    /// Prior of the first state.
    void reset();
    void update(const Vec& observation);
    void predict(std::span<const int> interventions);

    const Vec& mean() const { return mean_; }
    const Mat& covariance() const { return cov_; }
    /// log p(x_t | x_{0:t-1}) of the last update.
    double last_log_likelihood() const { return last_ll_; }

private:
    CausalGraphModel graph_;
    TransitionModel model_;
    Mat a_;
    Vec mean_;
    Mat cov_;
    double last_ll_ = 0.0;
};

struct BeamCodebook
{
    std::string id = "explicit";
    std::vector<CVec> codewords;

    static BeamCodebook dft(int size);
    int size() const { return static_cast<int>(codewords.size()); }
    Eigen::Index dim() const { return codewords.empty() ? 0 : codewords[0].size(); }
    void validate() const;
};

/// Per-column posterior over codewords with exponential forgetting:
/// log q <- gamma log q + sharpness log(|c^H v_j|^2 + floor), v_j the j-th
/// dominant right singular vector of H-hat.
class CodewordPosterior
{
public:
    CodewordPosterior(const BeamCodebook& codebook, int columns, double forgetting = 0.9, double sharpness = 1.0);
    CodewordPosterior(const BeamCodebook& codebook, const Mat& probabilities, double forgetting = 0.9,
                      double sharpness = 1.0);

    void update(const CMat& channel_estimate);
    /// num_codewords x columns, columns sum to 1.
    Mat probabilities() const;
    std::vector<int> mode() const;
    /// Mode codeword per column (M x columns).
    CMat mode_beamformer() const;
    /// Posterior mean and centered per-column covariance.
    StaticBeamMoments moments() const;
    double entropy(int column) const;

private:
    const BeamCodebook* codebook_;
    Mat log_post_;
    double forgetting_;
    double sharpness_;
};

/// E_q[V~ V~^H] = sum_j (C_j + m_j m_j^H).
CMat beam_second_moment(const StaticBeamMoments& moments);

struct CausalModelBundle
{
    CausalGraphModel graph;
    TransitionModel transition;
    int semantic_dim = 2;     ///< leading nodes forming z
    BeamCodebook codebook;
    Mat codeword_posterior;   ///< num_codewords x D prior tables
};

struct PosteriorSnapshot
{
    Vec z_tilde;              ///< predicted semantic state (first D node means)
    Mat z_covariance;
    Vec state_mean;
    Mat state_covariance;
    Mat codeword_probabilities;
    CMat v_tilde;             ///< mode codewords
    StaticBeamMoments moments;
};

struct HistoryEntry
{
    Vec observation;
    CMat channel_estimate;
    std::vector<int> interventions;  ///< for the transition into the next step
};

struct PredictorOptions
{
    double forgetting = 0.9;
    double sharpness = 1.0;
};

/// Incremental form of predict_static_components used by the harness.
class StaticPredictor
{
public:
    StaticPredictor(const CausalModelBundle& bundle, const PredictorOptions& options = {});

    void observe(const HistoryEntry& entry);
    bool empty() const { return steps_ == 0; }
    PosteriorSnapshot snapshot() const;

private:
    const CausalModelBundle* bundle_;
    LinearGaussianFilter filter_;
    CodewordPosterior beams_;
    int steps_ = 0;
};

PosteriorSnapshot predict_static_components(std::span<const HistoryEntry> history, const CausalModelBundle& bundle,
                                            const PredictorOptions& options = {});

enum class ElboPosterior
{
    filtering,  ///< product of filtering marginals (lower bound)
    smoothing,  ///< exact smoothing posterior (ELBO = log evidence)
};

double elbo(const CausalGraphModel& graph, const TransitionModel& model, const Episode& episode,
            ElboPosterior posterior = ElboPosterior::filtering);
double log_evidence(const CausalGraphModel& graph, const TransitionModel& model, const Episode& episode);

struct EmResult
{
    TransitionModel model;
    std::vector<double> elbo_trace;  ///< smoothing ELBO before each iteration and after the last
};

/// Coordinate ascent on (q, theta): smoothing E-step, closed-form M-step for
/// weights on existing edges, bias and noise variances.
EmResult fit_em(const CausalGraphModel& graph, const TransitionModel& init, std::span<const Episode> episodes,
                int iterations);

struct StructureOptions
{
    double edge_penalty = 1.0;          ///< lambda_G, multiplied by log(n)
    double intervention_penalty = 1.0;  ///< lambda_I, multiplied by log(n)
};

struct LearnedModel
{
    CausalGraphModel graph;
    TransitionModel transition;
    double score = 0.0;
};

/// Penalized lagged-regression score search: exhaustive over DAGs for up to
/// 4 nodes, greedy add/remove/reverse for 5-6 nodes.
LearnedModel learn_structure(std::span<const Episode> episodes, const StructureOptions& options = {});

}  // namespace thzsim
