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

#include <stdexcept>
#include <string>
#include <vector>

namespace thzsim {

struct GevResult
{
    Vec values;         ///< descending
    CMat vectors;       ///< B-orthonormal columns
    double max_residual = 0.0; ///< max |Av - mu Bv| / (|A| |v|) over returned pairs
};

/// Top-d generalized eigenpairs of the Hermitian pencil (A, B). B receives a
/// ridge of 1e-9 tr(B)/dim before factorization.
GevResult generalized_eig(const CMat& a, const CMat& b, int top_d);

struct GevOperands
{
    CMat signal_tx;   ///< S_t (MD x MD)
    CMat leakage_tx;  ///< I_t (MD x MD), ridge included
    CMat signal_rx;   ///< S_r (N x N)
    CMat leakage_rx;  ///< I_r (N x N)

    // Both transmit operands are (z z^T) kron (.), so only v = q kron x with
    // q = z/|z| can reach a positive quotient and the pencil reduces to M x M.
    Vec direction;     ///< q; empty disables the reduced solve
    CMat signal_block;  ///< |z|^2 times the M x M factor of S_t
    CMat leakage_block; ///< |z|^2 times the factor of I_t, plus the ridge
};

/// Transmit covariance of user i given its semantic state:
/// Vbar z z^T Vbar^H + (1 - lambda)^2 sum_a z_a^2 C_a.
CMat transmit_covariance(const UserTransmit& tx, double mixing, const Vec& z);

/// R_k and R_kbar of every user, summed directly from the transmit
/// covariances; agrees with LiftedCovarianceModel::evaluate at Zhat = z z^T.
std::vector<CovariancePair> direct_covariances(const LinkModel& link, std::span<const Vec> states);

/// Operands for user k at the current link state. `weights` are the semantic
/// weights w_i multiplying each user's log-det term.
GevOperands build_operands(int k, const LinkModel& link, std::span<const Vec> states, std::span<const double> weights);

/// Principal generalized eigenvector of (S_t, I_t) reshaped column-major to
/// M x D and Frobenius-normalized. Solved on the reduced M x M pencil when the
/// operands carry it, otherwise on the full MD x MD pair.
CMat update_beamformer(const GevOperands& op, Eigen::Index num_antennas, Eigen::Index dim);

/// Top-D generalized eigenvectors of (S_r, I_r), QR-orthonormalized.
CMat update_combiner(const GevOperands& op, Eigen::Index dim);

/// Linearized signal-to-leakage quotient maximized by update_beamformer.
double surrogate_quotient(const GevOperands& op, const CMat& beamformer);

/// |S v - mu L v| / (|S v| + |mu| |L v|) at v = vec(beamformer), mu = surrogate_quotient.
double stationarity_residual(const GevOperands& op, const CMat& beamformer);

/// Sum_k w_k log det(R_kbar^{-1} R_k): the objective tracked by alternating_solve.
double weighted_sum_information(const LinkModel& link, std::span<const Vec> states, std::span<const double> weights);

struct AlternatingOptions
{
    int max_outer = 50;
    double tol = 1e-5; ///< relative objective change
};

struct AlternatingTrace
{
    std::vector<double> objective; ///< after each outer iteration; entry 0 is the initial point
    std::vector<double> max_gev_residual;
    int iterations = 0;
    bool converged = false;
};

class DivergenceError : public std::runtime_error
{
public:
    DivergenceError(const std::string& what, AlternatingTrace trace)
        : std::runtime_error(what), trace_(std::move(trace))
    {
    }
    const AlternatingTrace& trace() const { return trace_; }

private:
    AlternatingTrace trace_;
};

/// Matched-filter start: dominant right (V) and left (W) singular vectors of each H-hat_k.
void initialize_from_svd(LinkModel& link);

/// Alternates V-hat and W updates on `link` in place. A block update is kept
/// only when it does not decrease the weighted sum information, so the trace
/// is nondecreasing.
AlternatingTrace alternating_solve(LinkModel& link, std::span<const Vec> states, std::span<const double> weights,
                                   const AlternatingOptions& options = {});

}  // namespace thzsim
