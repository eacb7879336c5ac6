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

#include "thzsim/semantic_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace thzsim {

Vec CausalState::value() const
{
    if (instantaneous.size() != statistical.size())
        throw std::invalid_argument("CausalState: component length mismatch");
    return mixing * instantaneous + (1.0 - mixing) * statistical;
}

void SemanticThresholds::validate() const
{
    if (!(distortion_threshold > 0.0))
        throw std::invalid_argument("SemanticThresholds: delta must be > 0");
    if (!(outage_tolerance > 0.0 && outage_tolerance < 1.0))
        throw std::invalid_argument("SemanticThresholds: epsilon must lie in (0, 1)");
}

double distortion(const Vec& z, const Vec& decoded)
{
    if (z.size() != decoded.size())
        throw std::invalid_argument("distortion: length mismatch");
    return (z - decoded).squaredNorm();
}

double semantic_reliability(std::span<const std::pair<Vec, Vec>> samples, double delta)
{
    if (samples.empty())
        throw std::invalid_argument("semantic_reliability: empty sample list");
    std::size_t ok = 0;
    for (const auto& [z, decoded] : samples)
        if (distortion(z, decoded) <= delta)
            ++ok;
    return static_cast<double>(ok) / static_cast<double>(samples.size());
}

double similarity(const Vec& a, const Vec& b, double scale)
{
    return std::exp(-(a - b).squaredNorm() / (2.0 * scale));
}

double cantelli_factor(double outage_tolerance)
{
    return std::sqrt((1.0 - outage_tolerance) / outage_tolerance);
}

bool chance_constraint_satisfied(double mean, double stddev, double delta, double outage_tolerance)
{
    return mean + cantelli_factor(outage_tolerance) * stddev <= delta;
}

CMat UserTransmit::mean_beamformer(double mixing) const
{
    if (static_part.empty())
        return instantaneous;
    return mixing * instantaneous + (1.0 - mixing) * static_part.mean;
}

void LinkModel::validate() const
{
    const auto k = channels.size();
    if (k == 0)
        throw std::invalid_argument("LinkModel: no users");
    if (combiners.size() != k || transmit.size() != k)
        throw std::invalid_argument("LinkModel: per-user vectors have different lengths");
    if (!(mixing >= 0.0 && mixing <= 1.0))
        throw std::invalid_argument("LinkModel: mixing must lie in [0, 1]");
    const auto n = channels[0].rows();
    const auto m = channels[0].cols();
    const auto d = combiners[0].cols();
    for (std::size_t i = 0; i < k; ++i)
    {
        if (channels[i].rows() != n || channels[i].cols() != m)
            throw std::invalid_argument("LinkModel: channel shape mismatch for user " + std::to_string(i));
        if (combiners[i].rows() != n || combiners[i].cols() != d)
            throw std::invalid_argument("LinkModel: combiner shape mismatch for user " + std::to_string(i));
        if (transmit[i].instantaneous.rows() != m || transmit[i].instantaneous.cols() != d)
            throw std::invalid_argument("LinkModel: beamformer shape mismatch for user " + std::to_string(i));
        const auto& st = transmit[i].static_part;
        if (!st.empty() && (st.mean.rows() != m || st.mean.cols() != d ||
                            st.column_covariance.size() != static_cast<std::size_t>(d)))
            throw std::invalid_argument("LinkModel: static moments shape mismatch for user " + std::to_string(i));
    }
}

LiftedCovarianceModel::LiftedCovarianceModel(const LinkModel& link)
{
    link.validate();
    num_users_ = link.num_users();
    dim_ = static_cast<int>(link.combiners[0].cols());
    const auto nk = static_cast<std::size_t>(num_users_);
    const auto d = static_cast<std::size_t>(dim_);
    coherent_.assign(nk * nk * d * d, CMat());
    error_.assign(nk * nk * d * d, CMat());
    noise_.resize(nk);
    effective_.resize(nk);

    const double lam = link.mixing;
    const double static_weight = (1.0 - lam) * (1.0 - lam);

    std::vector<CMat> vbar(nk);
    for (std::size_t i = 0; i < nk; ++i)
        vbar[i] = link.transmit[i].mean_beamformer(lam);

    for (int k = 0; k < num_users_; ++k)
    {
        const auto ku = static_cast<std::size_t>(k);
        const CMat& w = link.combiners[ku];
        const CMat wh_h = w.adjoint() * link.channels[ku];  // D x M
        const CMat wh_w = w.adjoint() * w;
        noise_[ku] = link.noise_variance * wh_w;
        effective_[ku] = std::sqrt(link.transmit[ku].power) * wh_h * vbar[ku];

        for (int i = 0; i < num_users_; ++i)
        {
            const auto iu = static_cast<std::size_t>(i);
            const double p = link.transmit[iu].power;
            const CMat proj = wh_h * vbar[iu];  // D x D, column a = W^H H vbar_a
            const auto& st = link.transmit[iu].static_part;
            for (int a = 0; a < dim_; ++a)
                for (int b = 0; b < dim_; ++b)
                {
                    CMat coh = p * proj.col(a) * proj.col(b).adjoint();
                    cd trace_t = vbar[iu].col(b).dot(vbar[iu].col(a));  // vbar_b^H vbar_a
                    if (a == b && !st.empty())
                    {
                        const CMat& c = st.column_covariance[static_cast<std::size_t>(a)];
                        coh += p * static_weight * wh_h * c * wh_h.adjoint();
                        trace_t += static_weight * c.trace();
                    }
                    coherent_[index(k, i, a, b)] = std::move(coh);
                    error_[index(k, i, a, b)] = p * link.error_variance * trace_t * wh_w;
                }
        }
    }
}

std::size_t LiftedCovarianceModel::index(int k, int i, int a, int b) const
{
    const auto nk = static_cast<std::size_t>(num_users_);
    const auto d = static_cast<std::size_t>(dim_);
    return ((static_cast<std::size_t>(k) * nk + static_cast<std::size_t>(i)) * d + static_cast<std::size_t>(a)) * d +
           static_cast<std::size_t>(b);
}

const CMat& LiftedCovarianceModel::basis(int k, int i, int a, int b, bool coherent) const
{
    return coherent ? coherent_[index(k, i, a, b)] : error_[index(k, i, a, b)];
}

CMat LiftedCovarianceModel::interference(int k, std::span<const Mat> lifted) const
{
    if (static_cast<int>(lifted.size()) != num_users_)
        throw std::invalid_argument("LiftedCovarianceModel: wrong number of lifted states");
    CMat r = noise_[static_cast<std::size_t>(k)];
    for (int i = 0; i < num_users_; ++i)
    {
        const Mat& z = lifted[static_cast<std::size_t>(i)];
        for (int a = 0; a < dim_; ++a)
            for (int b = 0; b < dim_; ++b)
            {
                const double c = z(a, b);
                if (c == 0.0)
                    continue;
                r += c * error_[index(k, i, a, b)];
                if (i != k)
                    r += c * coherent_[index(k, i, a, b)];
            }
    }
    return r;
}

CovariancePair LiftedCovarianceModel::evaluate(int k, std::span<const Mat> lifted) const
{
    CovariancePair out;
    out.interference = interference(k, lifted);
    out.signal_plus_interference = out.interference;
    const Mat& z = lifted[static_cast<std::size_t>(k)];
    for (int a = 0; a < dim_; ++a)
        for (int b = 0; b < dim_; ++b)
            if (z(a, b) != 0.0)
                out.signal_plus_interference += z(a, b) * coherent_[index(k, k, a, b)];
    return out;
}

CMat repair_psd(const CMat& a, const char* what)
{
    CMat h = hermitian_part(a);
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig >= 0.0)
        return h;
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (-min_eig > 1e-10 * scale)
        throw std::runtime_error(std::string(what) + ": matrix is not PSD (min eigenvalue " +
                                 std::to_string(min_eig) + ")");
    const Vec clamped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().adjoint();
}

CovariancePair interference_covariances(int k, const LinkModel& link, std::span<const Vec> states)
{
    if (static_cast<int>(states.size()) != link.num_users())
        throw std::invalid_argument("interference_covariances: one state per user required");
    const LiftedCovarianceModel model(link);
    std::vector<Mat> lifted;
    lifted.reserve(states.size());
    for (const auto& z : states)
    {
        if (z.size() != model.dim())
            throw std::invalid_argument("interference_covariances: state dimension mismatch");
        lifted.emplace_back(z * z.transpose());
    }
    CovariancePair out = model.evaluate(k, lifted);
    out.interference = repair_psd(out.interference, "interference_covariances(R_kbar)");
    out.signal_plus_interference = repair_psd(out.signal_plus_interference, "interference_covariances(R_k)");
    return out;
}

double log_det_ratio(const CovariancePair& cov)
{
    Eigen::LLT<CMat> llt(hermitian_part(cov.interference));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("log_det_ratio: interference covariance is singular");
    const double value = log_det_hpd(cov.signal_plus_interference) - log_det_hpd(cov.interference);
    // R_k >= R_kbar, so negative values are round-off only.
    return std::max(0.0, value);
}

double SemanticScorer::similarity(const Vec& a, const Vec& b) const
{
    return thzsim::similarity(a, b, similarity_scale);
}

SemanticScorer SemanticScorer::gaussian_surprise(Vec mean, Mat cov, double similarity_scale)
{
    const Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("SemanticScorer: predictive covariance must be positive definite");
    const double log_norm = 0.5 * (static_cast<double>(mean.size()) * std::log(2.0 * kPi) + log_det_spd(cov));
    SemanticScorer s;
    s.similarity_scale = similarity_scale;
    s.source_information = [mean = std::move(mean), llt, log_norm](const Vec& z) {
        const Vec diff = z - mean;
        const double maha = diff.dot(llt.solve(diff));
        return std::max(0.0, log_norm + 0.5 * maha);
    };
    return s;
}

SemanticScorer SemanticScorer::constant(double value, double similarity_scale)
{
    SemanticScorer s;
    s.similarity_scale = similarity_scale;
    s.source_information = [value](const Vec&) { return value; };
    return s;
}

double semantic_weight(std::span<const Vec> transmit_candidates, std::span<const double> log_likelihoods,
                       std::span<const Vec> decoded_candidates, const SemanticScorer& scorer)
{
    if (transmit_candidates.empty() || decoded_candidates.empty())
        throw std::invalid_argument("semantic_weight: empty candidate set");
    if (log_likelihoods.size() != transmit_candidates.size())
        throw std::invalid_argument("semantic_weight: one likelihood per transmit candidate required");
    const double top = *std::max_element(log_likelihoods.begin(), log_likelihoods.end());
    double norm = 0.0;
    for (double l : log_likelihoods)
        norm += std::exp(l - top);

    double acc = 0.0;
    for (std::size_t c = 0; c < transmit_candidates.size(); ++c)
    {
        const double p = std::exp(log_likelihoods[c] - top) / norm;
        if (p == 0.0)
            continue;
        double inner = 0.0;
        for (const auto& zz : decoded_candidates)
            inner += scorer.similarity(zz, transmit_candidates[c]);
        acc += p * scorer.source_information(transmit_candidates[c]) * inner;
    }
    return acc;
}

double semantic_information(const CovariancePair& cov, std::span<const Vec> transmit_candidates,
                            std::span<const double> log_likelihoods, std::span<const Vec> decoded_candidates,
                            const SemanticScorer& scorer)
{
    const double ld = log_det_ratio(cov);
    const double value = ld * semantic_weight(transmit_candidates, log_likelihoods, decoded_candidates, scorer);
    if (!(value >= 0.0) || !std::isfinite(value))
        throw std::runtime_error("semantic_information: non-finite or negative value");
    return value;
}

double gaussian_log_likelihood(const CVec& y, const CMat& channel, const Vec& z, const CMat& covariance)
{
    const CVec r = y - channel * z.cast<cd>();
    Eigen::LLT<CMat> llt(hermitian_part(covariance));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("gaussian_log_likelihood: covariance not positive definite");
    const double quad = r.dot(llt.solve(r)).real();
    return -quad - log_det_hpd(covariance) - static_cast<double>(y.size()) * std::log(kPi);
}

LmmseDecoder::LmmseDecoder(const CMat& channel, const CMat& noise_covariance, double prior_variance)
    : LmmseDecoder(channel, noise_covariance, Vec::Zero(channel.cols()),
                   prior_variance * Mat::Identity(channel.cols(), channel.cols()))
{
}

LmmseDecoder::LmmseDecoder(const CMat& channel, const CMat& noise_covariance, const Vec& prior_mean,
                           const Mat& prior_covariance)
    : prior_mean_(prior_mean)
{
    const auto d = channel.cols();
    if (prior_mean.size() != d || prior_covariance.rows() != d || prior_covariance.cols() != d)
        throw std::invalid_argument("LmmseDecoder: prior shape does not match the channel");
    if (noise_covariance.rows() != channel.rows() || noise_covariance.cols() != channel.rows())
        throw std::invalid_argument("LmmseDecoder: noise covariance shape mismatch");
    const Mat gr = stack_real_imag(channel);  // 2n x D
    const Mat nr = realify_covariance(hermitian_part(noise_covariance));
    const Mat s = gr * prior_covariance * gr.transpose() + nr;
    Eigen::LDLT<Mat> ldlt(s);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("LmmseDecoder: singular observation covariance");
    gain_ = prior_covariance * ldlt.solve(gr).transpose();  // D x 2n
    mean_observation_ = gr * prior_mean;
    bias_map_ = gain_ * gr - Mat::Identity(d, d);
    output_noise_ = gain_ * nr * gain_.transpose();
    error_cov_ = prior_covariance - gain_ * gr * prior_covariance;
    error_cov_ = 0.5 * (error_cov_ + error_cov_.transpose()).eval();
}

Vec LmmseDecoder::decode(const CVec& y) const
{
    Vec yr(2 * y.size());
    yr.head(y.size()) = y.real();
    yr.tail(y.size()) = y.imag();
    return prior_mean_ + gain_ * (yr - mean_observation_);
}

std::pair<double, double> LmmseDecoder::distortion_moments(const Vec& z) const
{
    if (z.size() != prior_mean_.size())
        throw std::invalid_argument("LmmseDecoder: state dimension mismatch");
    const Vec b = bias_map_ * (z - prior_mean_);
    const double mean = b.squaredNorm() + output_noise_.trace();
    const double var = 2.0 * (output_noise_ * output_noise_).trace() + 4.0 * b.dot(output_noise_ * b);
    return {mean, std::sqrt(std::max(0.0, var))};
}

std::pair<double, double> LmmseDecoder::distortion_moments_lifted(const Mat& lifted) const
{
    const double mean = (bias_map_ * lifted * bias_map_.transpose()).trace() + output_noise_.trace();
    const double var = 2.0 * (output_noise_ * output_noise_).trace() +
                       4.0 * (bias_map_.transpose() * output_noise_ * bias_map_ * lifted).trace();
    return {mean, std::sqrt(std::max(0.0, var))};
}

}  // namespace thzsim
