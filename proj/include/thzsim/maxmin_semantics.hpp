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

#include <optional>
#include <string>
#include <vector>

namespace thzsim {

/// Per-user margins of the max-min problem for fixed beamformers and
/// combiners, as functions of the lifted states Zhat_k = z_k z_k^T.
class MaxMinProblem
{
public:
    MaxMinProblem(const LiftedCovarianceModel& model, std::vector<double> weights, SemanticThresholds thresholds,
                  double z_max = 1.0, bool enforce_chance = true);

    int num_users() const { return model_->num_users(); }
    int dim() const { return model_->dim(); }
    double z_max() const { return z_max_; }
    bool enforce_chance() const { return enforce_chance_; }
    const SemanticThresholds& thresholds() const { return thresholds_; }
    const std::vector<double>& weights() const { return weights_; }
    /// Decoder prior variance per coordinate, z_max^2 / D.
    double prior_variance() const;

    /// w_k log det(R_kbar^{-1} R_k).
    double information(int k, std::span<const Mat> lifted) const;
    /// delta - (mu + c(eps) sigma) of the decoder distortion; >= 0 means satisfied.
    double chance_margin(int k, std::span<const Mat> lifted) const;
    /// Both constraints for all users at the rank-one point z_k z_k^T.
    bool satisfies(std::span<const Vec> states, double alpha, double slack = 0.0) const;
    double min_information(std::span<const Vec> states) const;

    /// w_k log det(I + N_k^{-1} L_kk(z_max^2 I)) per user, N_k the noise term.
    std::vector<double> isolated_bounds() const;
    /// 1.1 max_k isolated_bounds().
    double upper_bound() const;

    // Soft-min of normalized margins and its gradient w.r.t. each Zhat_k.
    double soft_min(std::span<const Mat> lifted, double alpha, double temperature, std::vector<Mat>* grad,
                    double* hard_min = nullptr) const;
    double min_margin(std::span<const Mat> lifted, double alpha) const;

private:
    const LiftedCovarianceModel* model_;
    std::vector<double> weights_;
    SemanticThresholds thresholds_;
    double z_max_;
    bool enforce_chance_;
    double info_scale_ = 1.0;

    void margins(std::span<const Mat> lifted, double alpha, std::vector<double>& out,
                 std::vector<std::vector<Mat>>* grads) const;
};

/// Projection onto {Z symmetric PSD, tr Z <= cap}.
Mat project_trace_psd(const Mat& z, double cap);

struct FeasibilityOptions
{
    int max_iters = 500;
    double temperature = 0.02;       ///< initial soft-min temperature
    double min_temperature = 1e-4;   ///< continuation floor
    double cooling = 0.25;           ///< temperature factor after each stall
    int stall_window = 25;   ///< cool (or stop at the floor) after this many steps without improvement
    int polish_steps = 30;
    int restarts = 6;        ///< extra random rank-one starts tried after the isotropic one fails
};

struct FeasibilityResult
{
    bool feasible = false;
    bool certified = false;          ///< infeasible by the isolated-user bound
    std::vector<Vec> states;         ///< rank-one witness when feasible
    std::vector<Mat> lifted;         ///< final relaxed point
    double min_margin = 0.0;
    int iterations = 0;
    std::string warning;
};

FeasibilityResult feasibility(const MaxMinProblem& problem, double alpha, const FeasibilityOptions& options = {},
                              const std::vector<Mat>* warm_start = nullptr);

struct BisectionResult
{
    std::vector<Vec> states;
    double alpha = 0.0;              ///< alpha^l at exit
    double lower = 0.0;
    double upper = 0.0;
    int iterations = 0;
    std::vector<double> information; ///< per-user information at the witness
    double achieved_min_information = 0.0;
};

/// Number of halvings that shrink [lo, hi] to width <= tol.
int bisection_iterations(double lo, double hi, double tol);

/// Bisection on alpha over [0, upper_bound()] (or the given bracket).
/// Throws std::runtime_error when alpha = 0 is infeasible.
BisectionResult bisect_maxmin(const MaxMinProblem& problem, double tol, const FeasibilityOptions& options = {},
                              std::optional<std::pair<double, double>> bracket = std::nullopt);

}  // namespace thzsim
