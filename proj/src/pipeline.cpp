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

#include "thzsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thzsim {
namespace {

Vec clip_norm(const Vec& z, double cap)
{
    const double n = z.norm();
    return n > cap ? Vec(z * (cap / n)) : z;
}

Vec initial_state(const Vec& z_tilde, double z_max)
{
    if (z_tilde.norm() >= 1e-3 * z_max)
        return clip_norm(z_tilde, z_max);
    Vec z = Vec::Zero(z_tilde.size());
    z(0) = 0.5 * z_max;
    return z;
}

}  // namespace

double design_weight(const Vec& z_tilde, const Mat& z_covariance, double similarity_scale)
{
    const auto d = z_tilde.size();
    Eigen::LLT<Mat> llt(z_covariance);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("design_weight: predictive covariance must be positive definite");
    const Mat l = llt.matrixL();
    std::vector<Vec> pts{z_tilde};
    const double spread = std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < d; ++i)
    {
        pts.emplace_back(z_tilde + spread * l.col(i));
        pts.emplace_back(z_tilde - spread * l.col(i));
    }
    const std::vector<double> flat(pts.size(), 0.0);
    const SemanticScorer scorer = SemanticScorer::gaussian_surprise(z_tilde, z_covariance, similarity_scale);
    return semantic_weight(pts, flat, pts, scorer);
}

PipelineResult full_pipeline_step(std::span<const UserContext> users, double error_variance, double noise_variance,
                                  const PipelineConfig& config)
{
    if (users.empty())
        throw std::invalid_argument("full_pipeline_step: no users");
    if (!(config.lambda >= 0.0 && config.lambda <= 1.0) || !(config.beta >= 0.0 && config.beta <= 1.0))
        throw std::invalid_argument("full_pipeline_step: lambda and beta must lie in [0, 1]");
    const auto d = users[0].z_tilde.size();
    const bool use_static = config.lambda < 1.0;

    PipelineResult res;
    std::vector<Vec> states;
    LinkModel link;
    link.mixing = config.lambda;
    link.noise_variance = noise_variance;
    link.error_variance = config.robust ? error_variance : 0.0;
    for (const auto& u : users)
    {
        if (u.z_tilde.size() != d)
            throw std::invalid_argument("full_pipeline_step: users have different semantic dimensions");
        states.push_back(initial_state(u.z_tilde, config.z_max));
        res.design_weights.push_back(design_weight(u.z_tilde, u.z_covariance, config.thresholds.distortion_threshold));
        link.channels.push_back(u.channel_estimate);
        link.combiners.push_back(CMat::Zero(u.channel_estimate.rows(), d));
        UserTransmit tx;
        tx.instantaneous = CMat::Zero(u.channel_estimate.cols(), d);
        if (use_static)
            tx.static_part = u.static_moments;
        link.transmit.push_back(std::move(tx));
    }
    initialize_from_svd(link);

    for (int round = 0; round < config.outer_rounds; ++round)
    {
        res.iterations += alternating_solve(link, states, res.design_weights, config.alternating).iterations;
        const LiftedCovarianceModel model(link);
        const MaxMinProblem strict(model, res.design_weights, config.thresholds, config.z_max, true);
        const double tol = std::max(config.bisection_relative_tol * strict.upper_bound(), 1e-12);
        BisectionResult bis;
        try
        {
            bis = bisect_maxmin(strict, tol, config.feasibility);
        }
        catch (const std::runtime_error&)
        {
            const MaxMinProblem relaxed(model, res.design_weights, config.thresholds, config.z_max, false);
            bis = bisect_maxmin(relaxed, tol, config.feasibility);
            res.chance_relaxed = true;
        }
        res.iterations += bis.iterations;
        res.alpha = bis.alpha;
        for (std::size_t k = 0; k < users.size(); ++k)
            states[k] = clip_norm(config.beta * bis.states[k] + (1.0 - config.beta) * users[k].z_tilde, config.z_max);
    }
    res.iterations += alternating_solve(link, states, res.design_weights, config.alternating).iterations;

    for (std::size_t k = 0; k < users.size(); ++k)
    {
        CMat v = link.transmit[k].instantaneous;
        if (use_static)
            v = config.lambda * v + (1.0 - config.lambda) * users[k].static_beam;
        res.beamformers.push_back(std::move(v));
        res.combiners.push_back(link.combiners[k]);
    }
    res.states = std::move(states);
    return res;
}

std::vector<UserMetrics> evaluate_transmission(std::span<const CMat> true_channels, std::span<const CMat> beamformers,
                                               std::span<const CMat> combiners, std::span<const Vec> states,
                                               std::span<const SemanticPrior> priors, double noise_variance,
                                               const EvaluationOptions& options, std::uint64_t stream_seed)
{
    const std::size_t nk = true_channels.size();
    if (beamformers.size() != nk || combiners.size() != nk || states.size() != nk || priors.size() != nk)
        throw std::invalid_argument("evaluate_transmission: per-user inputs have different lengths");
    if (options.noise_draws < 1 || options.num_candidates < 1)
        throw std::invalid_argument("evaluate_transmission: need at least one noise draw and one candidate");
    const double delta = options.thresholds.distortion_threshold;

    std::vector<UserMetrics> out(nk);
    for (std::size_t k = 0; k < nk; ++k)
    {
        const CMat& h = true_channels[k];
        const CMat& w = combiners[k];
        const CMat wh_h = w.adjoint() * h;
        const CMat g = wh_h * beamformers[k];
        const auto d = g.rows();

        CVec interference = CVec::Zero(d);
        CMat rbar = noise_variance * (w.adjoint() * w);
        for (std::size_t i = 0; i < nk; ++i)
        {
            if (i == k)
                continue;
            const CVec s = wh_h * (beamformers[i] * states[i].cast<cd>());
            interference += s;
            rbar += s * s.adjoint();
        }
        const CVec signal = g * states[k].cast<cd>();
        CovariancePair cov{rbar + signal * signal.adjoint(), rbar};
        cov.interference = repair_psd(cov.interference, "evaluate_transmission(R_kbar)");
        cov.signal_plus_interference = repair_psd(cov.signal_plus_interference, "evaluate_transmission(R_k)");

        const LmmseDecoder decoder(g, cov.interference, priors[k].mean, priors[k].covariance);
        Rng noise_rng = make_stream(stream_seed, {k, 0x6e6f697365ULL});
        std::vector<std::pair<Vec, Vec>> samples;
        samples.reserve(static_cast<std::size_t>(options.noise_draws));
        CVec first_y;
        double total = 0.0;
        for (int r = 0; r < options.noise_draws; ++r)
        {
            const CVec n = complex_normal(noise_rng, h.rows(), 1, noise_variance);
            const CVec y = signal + interference + w.adjoint() * n;
            if (r == 0)
                first_y = y;
            Vec decoded = decoder.decode(y);
            total += distortion(states[k], decoded);
            samples.emplace_back(states[k], std::move(decoded));
        }
        out[k].reliability = semantic_reliability(samples, delta);
        out[k].distortion = total / options.noise_draws;

        // Candidate transmit states around the decoded state of the first draw.
        const Vec& decoded0 = samples[0].second;
        Eigen::LLT<Mat> post(decoder.error_covariance() + 1e-12 * Mat::Identity(d, d));
        const Mat l = post.matrixL();
        Rng cand_rng = make_stream(stream_seed, {k, 0x63616e64ULL});
        std::vector<Vec> cands;
        std::vector<double> loglik;
        for (int c = 0; c < options.num_candidates; ++c)
        {
            Vec zc = decoded0 + l * real_normal(cand_rng, d);
            loglik.push_back(gaussian_log_likelihood(first_y, g, zc, cov.interference));
            cands.push_back(std::move(zc));
        }
        const SemanticScorer scorer = SemanticScorer::gaussian_surprise(priors[k].mean, priors[k].covariance, delta);
        const std::vector<Vec> decoded_set{decoded0};
        out[k].semantic_information = semantic_information(cov, cands, loglik, decoded_set, scorer);
    }
    return out;
}

}  // namespace thzsim
