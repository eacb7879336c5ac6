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

#include "thzsim/causal_dynamics.hpp"
#include "thzsim/gev_beamformer.hpp"

#include <string>
#include <vector>

namespace thzsim {

enum class SchemeKind
{
    proposed,
    perfect_csi,
    dft_tracking,
    naive_zf,
};

std::string scheme_name(SchemeKind kind);
SchemeKind parse_scheme(const std::string& name);

struct DftAssignment
{
    std::vector<int> indices;  ///< selected codeword per beam column, best first
    CMat beamformer;           ///< M x D, unit Frobenius norm
    CMat combiner;             ///< N x D, orthonormal columns
};

/// Windowed codebook search around `previous` (mod codebook size); a negative
/// `previous` searches the whole codebook. The D codewords with the largest
/// |H c| inside the window become the beam columns.
DftAssignment dft_tracking(const BeamCodebook& codebook, int previous, const CMat& channel_estimate, int window,
                           Eigen::Index dim);

struct ZfResult
{
    std::vector<CMat> beamformers;  ///< per user, unit Frobenius norm
    std::vector<CMat> combiners;
    bool rank_deficient = false;
    std::string warning;
};

/// Block zero-forcing on the stacked effective channels W_k^H H-hat_k with
/// W_k the dominant left singular vectors of H-hat_k.
ZfResult naive_zf(std::span<const CMat> channel_estimates, Eigen::Index dim);

/// sum_{i != k} |W_k^H H_k V_i|_F^2 for the given channels.
double zf_leakage(std::span<const CMat> channels, const ZfResult& zf);

/// GEV alternating solve with exact channels (no static part, no error term).
LinkModel perfect_csi_bf(std::span<const CMat> true_channels, std::span<const Vec> states,
                         std::span<const double> weights, double noise_variance,
                         const AlternatingOptions& options = {});

}  // namespace thzsim
