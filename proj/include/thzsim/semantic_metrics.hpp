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

#include "thzsim/types.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace thzsim {

/// Semantic state z = beta * z_inst + (1 - beta) * z_stat.
struct CausalState
{
    Vec instantaneous;
    Vec statistical;
    double mixing = 0.5;

    Vec value() const;
    Eigen::Index dim() const { return instantaneous.size(); }
};

struct SemanticThresholds
{
    double distortion_threshold = 0.1; ///< delta
    double outage_tolerance = 0.1;     ///< epsilon

    void validate() const;
};

/// R_k (signal + interference + noise) and R_kbar (interference + noise), D x D.
struct CovariancePair
{
    CMat signal_plus_interference;
    CMat interference;
};

double distortion(const Vec& z, const Vec& decoded);

/// Fraction of (z, decoded) pairs whose distortion is <= delta.
double semantic_reliability(std::span<const std::pair<Vec, Vec>> samples, double delta);

/// exp(-|a - b|^2 / (2 scale)); equals 1 on the diagonal.
double similarity(const Vec& a, const Vec& b, double scale);

/// One-sided Cantelli factor sqrt((1 - eps) / eps).
double cantelli_factor(double outage_tolerance);

/// Deterministic surrogate of P(E < delta) >= 1 - eps.
bool chance_constraint_satisfied(double mean, double stddev, double delta, double outage_tolerance);

/// Statistics of the codebook-driven beam component of one user. Columns are
/// independent under the posterior.
struct StaticBeamMoments
{
    CMat mean;                            ///< E_q[V~] (M x D)
    std::vector<CMat> column_covariance;  ///< Cov(v~_j) (M x M) per column

    bool empty() const { return mean.size() == 0; }
};

struct UserTransmit
{
    CMat instantaneous;            ///< V-hat (M x D)
    StaticBeamMoments static_part; ///< empty: no static component
    double power = 1.0;

    /// lambda * V-hat + (1 - lambda) * E[V~], or V-hat when there is no static part.
    CMat mean_beamformer(double mixing) const;
};

/// Everything needed to evaluate the per-user covariances for any set of
/// lifted states Zhat_i = z_i z_i^T.
struct LinkModel
{
    std::vector<CMat> channels;   ///< H-hat_k (N x M)
    std::vector<CMat> combiners;  ///< W_k (N x D)
    std::vector<UserTransmit> transmit;
    double mixing = 1.0;          ///< lambda
    double noise_variance = 1.0;  ///< sigma^2
    double error_variance = 0.0;  ///< per-element variance of H~ (robust design)

    int num_users() const { return static_cast<int>(channels.size()); }
    void validate() const;
};

/// Affine representation of the per-user covariances in the lifted states:
///   R_kbar = noise_k + sum_{i != k} sum_ab Z_i(a,b) (coherent + error)_{k,i,ab} + error_{k,k}(Z_k)
///   R_k    = R_kbar + coherent_{k,k}(Z_k)
class LiftedCovarianceModel
{
public:
    explicit LiftedCovarianceModel(const LinkModel& link);

    int num_users() const { return num_users_; }
    int dim() const { return dim_; }

    CovariancePair evaluate(int k, std::span<const Mat> lifted) const;
    CMat interference(int k, std::span<const Mat> lifted) const;

    /// Basis matrix for user i's contribution to user k's covariance,
    /// coefficient of Zhat_i(a, b). `coherent` selects the H-hat part.
    const CMat& basis(int k, int i, int a, int b, bool coherent) const;
    const CMat& noise(int k) const { return noise_[static_cast<std::size_t>(k)]; }

    /// Effective own channel sqrt(p_k) W_k^H H-hat_k Vbar_k (D x D).
    const CMat& effective_channel(int k) const { return effective_[static_cast<std::size_t>(k)]; }

private:
    std::size_t index(int k, int i, int a, int b) const;

    int num_users_ = 0;
    int dim_ = 0;
    std::vector<CMat> coherent_;
    std::vector<CMat> error_;
    std::vector<CMat> noise_;
    std::vector<CMat> effective_;
};

/// Hermitian-symmetrize and clamp tiny negative eigenvalues (|min eig| < 1e-10
/// relative); larger violations throw std::runtime_error.
CMat repair_psd(const CMat& a, const char* what);

/// R_k and R_kbar for user k at states z_i (moment expansion over V~).
CovariancePair interference_covariances(int k, const LinkModel& link, std::span<const Vec> states);

/// log det(R_kbar^{-1} R_k) in nats; throws when R_kbar is singular.
double log_det_ratio(const CovariancePair& cov);

struct SemanticScorer
{
    std::function<double(const Vec&)> source_information; ///< S_s, >= 0
    double similarity_scale = 0.1;                        ///< delta of the kernel

    double similarity(const Vec& a, const Vec& b) const;

    /// S_s(z) = max(0, -log N(z; mean, cov)).
    static SemanticScorer gaussian_surprise(Vec mean, Mat cov, double similarity_scale);
    static SemanticScorer constant(double value, double similarity_scale);
};

/// Bracketed weight sum_z pbar(y|z) S_s(z) sum_zz Z(zz, z); likelihoods are
/// given in log form and normalized across the candidates.
double semantic_weight(std::span<const Vec> transmit_candidates, std::span<const double> log_likelihoods,
                       std::span<const Vec> decoded_candidates, const SemanticScorer& scorer);

/// Extracted-information bound: semantic_weight(...) * log det(R_kbar^{-1} R_k).
double semantic_information(const CovariancePair& cov, std::span<const Vec> transmit_candidates,
                            std::span<const double> log_likelihoods, std::span<const Vec> decoded_candidates,
                            const SemanticScorer& scorer);

/// log CN(y; G z, R) for a complex observation of a real state.
double gaussian_log_likelihood(const CVec& y, const CMat& channel, const Vec& z, const CMat& covariance);

/// Widely-linear LMMSE estimate of a real state z ~ N(m, P) from y = G z + n,
/// n ~ CN(0, R).
class LmmseDecoder
{
public:
    /// Zero-mean isotropic prior P = prior_variance I.
    LmmseDecoder(const CMat& channel, const CMat& noise_covariance, double prior_variance);
    LmmseDecoder(const CMat& channel, const CMat& noise_covariance, const Vec& prior_mean, const Mat& prior_covariance);

    Vec decode(const CVec& y) const;

    /// Mean and standard deviation of |decode(G z + n) - z|^2 for fixed z.
    std::pair<double, double> distortion_moments(const Vec& z) const;
    /// Same for the lifted state (z - m)(z - m)^T (linear in it).
    std::pair<double, double> distortion_moments_lifted(const Mat& lifted) const;

    /// Posterior error covariance (Bayesian MSE matrix).
    const Mat& error_covariance() const { return error_cov_; }
    const Mat& gain() const { return gain_; }
    const Mat& bias_map() const { return bias_map_; }
    const Mat& output_noise() const { return output_noise_; }
    const Vec& prior_mean() const { return prior_mean_; }

private:
    Mat gain_;          // D x 2n
    Mat bias_map_;      // K Gr - I
    Mat output_noise_;  // K Nr K^T
    Mat error_cov_;
    Vec prior_mean_;
    Vec mean_observation_;  // [Re; Im] of G m
};

}  // namespace thzsim
