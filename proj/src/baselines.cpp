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

#include "thzsim/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace thzsim {

std::string scheme_name(SchemeKind kind)
{
    switch (kind)
    {
    case SchemeKind::proposed: return "proposed";
    case SchemeKind::perfect_csi: return "perfect_csi";
    case SchemeKind::dft_tracking: return "dft_tracking";
    case SchemeKind::naive_zf: return "naive_zf";
    }
    throw std::invalid_argument("scheme_name: unknown scheme");
}

SchemeKind parse_scheme(const std::string& name)
{
    if (name == "proposed")
        return SchemeKind::proposed;
    if (name == "perfect_csi")
        return SchemeKind::perfect_csi;
    if (name == "dft_tracking")
        return SchemeKind::dft_tracking;
    if (name == "naive_zf")
        return SchemeKind::naive_zf;
    throw std::invalid_argument("unknown scheme '" + name + "' (expected proposed, perfect_csi, dft_tracking, naive_zf)");
}

DftAssignment dft_tracking(const BeamCodebook& codebook, int previous, const CMat& channel_estimate, int window,
                           Eigen::Index dim)
{
    codebook.validate();
    const int size = codebook.size();
    if (codebook.dim() != channel_estimate.cols())
        throw std::invalid_argument("dft_tracking: codebook length does not match the channel width");
    if (size < channel_estimate.cols())
        throw std::invalid_argument("dft_tracking: codebook size must be >= M");
    if (window < 0)
        throw std::invalid_argument("dft_tracking: window must be >= 0");
    if (previous >= size)
        throw std::invalid_argument("dft_tracking: previous index out of range");

    std::vector<int> candidates;
    if (previous < 0 || 2 * window + 1 >= size)
    {
        candidates.resize(static_cast<std::size_t>(size));
        std::iota(candidates.begin(), candidates.end(), 0);
    }
    else
    {
        for (int o = -window; o <= window; ++o)
            candidates.push_back(((previous + o) % size + size) % size);
    }
    if (static_cast<Eigen::Index>(candidates.size()) < dim)
        throw std::invalid_argument("dft_tracking: window holds fewer codewords than beam columns");

    std::vector<double> gain(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        gain[i] = (channel_estimate * codebook.codewords[static_cast<std::size_t>(candidates[i])]).norm();
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    // Stable: ties keep window order, so a static channel stays on its index.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gain[a] > gain[b]; });

    DftAssignment out;
    const auto m = channel_estimate.cols();
    const auto n = channel_estimate.rows();
    out.beamformer.resize(m, dim);
    CMat mf(n, dim);
    for (Eigen::Index j = 0; j < dim; ++j)
    {
        const int idx = candidates[order[static_cast<std::size_t>(j)]];
        out.indices.push_back(idx);
        out.beamformer.col(j) = codebook.codewords[static_cast<std::size_t>(idx)];
        mf.col(j) = channel_estimate * out.beamformer.col(j);
    }
    out.beamformer /= std::sqrt(static_cast<double>(dim));
    Eigen::HouseholderQR<CMat> qr(mf);
    out.combiner = qr.householderQ() * CMat::Identity(n, dim);
    for (Eigen::Index j = 0; j < dim; ++j)
    {
        const cd c = out.combiner.col(j).dot(mf.col(j));
        if (std::abs(c) > 0.0)
            out.combiner.col(j) *= c / std::abs(c);
    }
    return out;
}

ZfResult naive_zf(std::span<const CMat> channel_estimates, Eigen::Index dim)
{
    const auto k = static_cast<Eigen::Index>(channel_estimates.size());
    if (k == 0)
        throw std::invalid_argument("naive_zf: no users");
    const auto m = channel_estimates[0].cols();
    if (k * dim > m)
        throw std::invalid_argument("naive_zf: K*D must not exceed M");

    ZfResult out;
    CMat stacked(k * dim, m);
    for (Eigen::Index u = 0; u < k; ++u)
    {
        const CMat& h = channel_estimates[static_cast<std::size_t>(u)];
        if (h.cols() != m)
            throw std::invalid_argument("naive_zf: channel widths differ");
        Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeThinU);
        const CMat w = svd.matrixU().leftCols(dim);
        out.combiners.push_back(w);
        stacked.middleRows(u * dim, dim) = w.adjoint() * h;
    }
    Eigen::CompleteOrthogonalDecomposition<CMat> cod(stacked);
    if (cod.rank() < k * dim)
    {
        out.rank_deficient = true;
        out.warning = "naive_zf: stacked channel is rank deficient; using the pseudo-inverse";
    }
    const CMat pinv = cod.pseudoInverse();  // M x KD
    for (Eigen::Index u = 0; u < k; ++u)
    {
        CMat v = pinv.middleCols(u * dim, dim);
        const double nv = v.norm();
        if (nv > 0.0)
            v /= nv;
        out.beamformers.push_back(v);
    }
    return out;
}

double zf_leakage(std::span<const CMat> channels, const ZfResult& zf)
{
    double leak = 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k)
        for (std::size_t i = 0; i < channels.size(); ++i)
            if (i != k)
                leak += (zf.combiners[k].adjoint() * channels[k] * zf.beamformers[i]).squaredNorm();
    return leak;
}

LinkModel perfect_csi_bf(std::span<const CMat> true_channels, std::span<const Vec> states,
                         std::span<const double> weights, double noise_variance, const AlternatingOptions& options)
{
    if (true_channels.empty() || states.size() != true_channels.size())
        throw std::invalid_argument("perfect_csi_bf: one state per user required");
    const auto d = states[0].size();
    LinkModel link;
    link.channels.assign(true_channels.begin(), true_channels.end());
    for (const auto& h : true_channels)
    {
        link.combiners.push_back(CMat::Zero(h.rows(), d));
        UserTransmit tx;
        tx.instantaneous = CMat::Zero(h.cols(), d);
        link.transmit.push_back(tx);
    }
    link.mixing = 1.0;
    link.noise_variance = noise_variance;
    link.error_variance = 0.0;
    initialize_from_svd(link);
    alternating_solve(link, states, weights, options);
    return link;
}

}  // namespace thzsim
