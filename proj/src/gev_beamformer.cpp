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

#include "thzsim/gev_beamformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace thzsim {
namespace {

void check_hermitian(const CMat& a, const char* what)
{
    if (a.rows() != a.cols())
        throw std::invalid_argument(std::string(what) + ": matrix is not square");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument(std::string(what) + ": matrix is not Hermitian");
}

// First component with non-negligible magnitude becomes real positive.
void fix_phase(Eigen::Ref<CVec> v)
{
    const double top = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        if (std::abs(v(i)) > 1e-12 * top)
        {
            v *= std::conj(v(i)) / std::abs(v(i));
            return;
        }
    }
}

CVec vec_of(const CMat& m) { return Eigen::Map<const CVec>(m.data(), m.size()); }

// (z z^T) kron A for a real vector z.
CMat kron_outer(const Vec& z, const CMat& a)
{
    const auto d = z.size();
    const auto m = a.rows();
    CMat out(d * m, d * m);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            out.block(r * m, c * m, m, m) = (z(r) * z(c)) * a;
    return out;
}

CMat inverse_hpd(const CMat& a, const char* what)
{
    Eigen::LLT<CMat> llt(hermitian_part(a));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(std::string(what) + ": covariance is not positive definite");
    return llt.solve(CMat::Identity(a.rows(), a.cols()));
}

}  // namespace

GevResult generalized_eig(const CMat& a, const CMat& b, int top_d)
{
    check_hermitian(a, "generalized_eig(A)");
    check_hermitian(b, "generalized_eig(B)");
    if (a.rows() != b.rows())
        throw std::invalid_argument("generalized_eig: dimension mismatch");
    const auto n = a.rows();
    if (top_d < 1 || top_d > n)
        throw std::invalid_argument("generalized_eig: top_d out of range");

    const CMat ah = hermitian_part(a);
    CMat bh = hermitian_part(b);
    // Regularize only when B fails to factor, so the pencil solved is the one supplied.
    if (Eigen::LLT<CMat>(bh).info() != Eigen::Success)
        bh.diagonal().array() += 1e-9 * std::abs(bh.trace().real()) / static_cast<double>(n);

    Eigen::GeneralizedSelfAdjointEigenSolver<CMat> es(ah, bh, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("generalized_eig: B is not positive definite after regularization");

    GevResult out;
    out.values.resize(top_d);
    out.vectors.resize(n, top_d);
    const double anorm = std::max(ah.norm(), std::numeric_limits<double>::min());
    for (int j = 0; j < top_d; ++j)
    {
        const Eigen::Index src = n - 1 - j;  // ascending order from Eigen
        out.values(j) = es.eigenvalues()(src);
        out.vectors.col(j) = es.eigenvectors().col(src);
        fix_phase(out.vectors.col(j));
        const CVec v = out.vectors.col(j);
        const double res = (ah * v - out.values(j) * (bh * v)).norm() / (anorm * v.norm());
        out.max_residual = std::max(out.max_residual, res);
    }
    return out;
}

CMat transmit_covariance(const UserTransmit& tx, double mixing, const Vec& z)
{
    const CMat vbar = tx.mean_beamformer(mixing);
    const CVec s = vbar * z.cast<cd>();
    CMat t = s * s.adjoint();
    if (!tx.static_part.empty())
    {
        const double w = (1.0 - mixing) * (1.0 - mixing);
        for (Eigen::Index a = 0; a < z.size(); ++a)
            t += w * z(a) * z(a) * tx.static_part.column_covariance[static_cast<std::size_t>(a)];
    }
    return t;
}

std::vector<CovariancePair> direct_covariances(const LinkModel& link, std::span<const Vec> states)
{
    const int num_users = link.num_users();
    if (static_cast<int>(states.size()) != num_users)
        throw std::invalid_argument("direct_covariances: one state per user required");
    std::vector<CMat> tx(static_cast<std::size_t>(num_users));
    CMat total;
    double error_power = 0.0;
    for (int i = 0; i < num_users; ++i)
    {
        const auto iu = static_cast<std::size_t>(i);
        tx[iu] = link.transmit[iu].power * transmit_covariance(link.transmit[iu], link.mixing, states[iu]);
        error_power += link.error_variance * tx[iu].trace().real();
        total = i == 0 ? tx[iu] : CMat(total + tx[iu]);
    }
    std::vector<CovariancePair> out;
    out.reserve(tx.size());
    for (int k = 0; k < num_users; ++k)
    {
        const auto ku = static_cast<std::size_t>(k);
        const CMat g = link.combiners[ku].adjoint() * link.channels[ku];
        const CMat wtw = link.combiners[ku].adjoint() * link.combiners[ku];
        const CMat own = g * tx[ku] * g.adjoint();
        CovariancePair c;
        c.signal_plus_interference =
            hermitian_part(g * total * g.adjoint() + (link.noise_variance + error_power) * wtw);
        c.interference = hermitian_part(c.signal_plus_interference - own);
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

void fill_transmit(GevOperands& op, int k, const LinkModel& link, std::span<const Vec> states,
                   std::span<const double> weights, const std::vector<CovariancePair>& covs)
{
    const int num_users = link.num_users();
    const auto ku = static_cast<std::size_t>(k);
    const CMat& hk = link.channels[ku];
    const auto m = hk.cols();
    const Vec& zk = states[ku];
    const double p = link.transmit[ku].power;

    const CMat g = link.combiners[ku].adjoint() * hk;
    const CMat a =
        hermitian_part(g.adjoint() * inverse_hpd(covs[ku].signal_plus_interference, "build_operands(R_k)") * g);

    CMat leak = CMat::Zero(m, m);
    for (int i = 0; i < num_users; ++i)
    {
        if (i == k)
            continue;
        const auto iu = static_cast<std::size_t>(i);
        const CMat diff = inverse_hpd(covs[iu].interference, "build_operands(R_ibar)") -
                          inverse_hpd(covs[iu].signal_plus_interference, "build_operands(R_i)");
        const CMat diff_psd = repair_psd(diff, "build_operands(R_ibar^-1 - R_i^-1)");
        const CMat& wi = link.combiners[iu];
        const CMat ai = wi * diff_psd * wi.adjoint();  // N x N
        const CMat& hi = link.channels[iu];
        CMat term = hi.adjoint() * ai * hi;
        // Leakage through the estimation error of user i's channel.
        term.diagonal().array() += link.error_variance * ai.trace().real();
        leak += weights[iu] * p * term;
    }
    leak = hermitian_part(leak);

    const CMat signal = (weights[ku] * p) * a;
    op.signal_tx = kron_outer(zk, signal);
    op.leakage_tx = kron_outer(zk, leak);
    const double zz = zk.squaredNorm();
    const double ridge = 1e-9 * std::max(op.signal_tx.trace().real(), std::numeric_limits<double>::min()) /
                         static_cast<double>(m * zk.size());
    op.leakage_tx.diagonal().array() += ridge;

    if (zz > 0.0)
    {
        op.direction = zk / std::sqrt(zz);
        op.signal_block = zz * signal;
        op.leakage_block = zz * leak;
        op.leakage_block.diagonal().array() += ridge;
    }
}

void fill_receive(GevOperands& op, int k, const LinkModel& link, std::span<const Vec> states,
                  std::span<const double> weights)
{
    const int num_users = link.num_users();
    const auto ku = static_cast<std::size_t>(k);
    const CMat& hk = link.channels[ku];
    const auto n = hk.rows();
    const Vec& zk = states[ku];

    const CMat vbar = link.transmit[ku].mean_beamformer(link.mixing);
    const CVec s = std::sqrt(link.transmit[ku].power) * (hk * (vbar * zk.cast<cd>()));
    op.signal_rx = weights[ku] * (s * s.adjoint());

    CMat r = CMat::Identity(n, n) * link.noise_variance;
    for (int i = 0; i < num_users; ++i)
    {
        const auto iu = static_cast<std::size_t>(i);
        const double p = link.transmit[iu].power;
        CMat t = transmit_covariance(link.transmit[iu], link.mixing, states[iu]);
        r.diagonal().array() += p * link.error_variance * t.trace().real();
        if (i == k)
        {
            const CVec own = vbar * zk.cast<cd>();
            t -= own * own.adjoint();
        }
        r += p * hk * t * hk.adjoint();
    }
    op.leakage_rx = hermitian_part(r);
}

void check_operand_inputs(int k, const LinkModel& link, std::span<const Vec> states, std::span<const double> weights)
{
    const int num_users = link.num_users();
    if (static_cast<int>(states.size()) != num_users || static_cast<int>(weights.size()) != num_users)
        throw std::invalid_argument("build_operands: one state and one weight per user required");
    if (k < 0 || k >= num_users)
        throw std::invalid_argument("build_operands: user index out of range");
}

}  // namespace

GevOperands build_operands(int k, const LinkModel& link, std::span<const Vec> states, std::span<const double> weights)
{
    check_operand_inputs(k, link, states, weights);
    GevOperands op;
    fill_transmit(op, k, link, states, weights, direct_covariances(link, states));
    fill_receive(op, k, link, states, weights);
    return op;
}

CMat update_beamformer(const GevOperands& op, Eigen::Index num_antennas, Eigen::Index dim)
{
    if (op.signal_tx.rows() != num_antennas * dim)
        throw std::invalid_argument("update_beamformer: operand size does not match M*D");
    CMat v;
    if (op.direction.size() == dim && op.signal_block.rows() == num_antennas)
    {
        const GevResult gev = generalized_eig(op.signal_block, op.leakage_block, 1);
        v = gev.vectors.col(0) * op.direction.cast<cd>().transpose();
    }
    else
    {
        const GevResult gev = generalized_eig(op.signal_tx, op.leakage_tx, 1);
        v = Eigen::Map<const CMat>(gev.vectors.data(), num_antennas, dim);
    }
    const double norm = v.norm();
    if (!(norm > 0.0))
        throw std::runtime_error("update_beamformer: degenerate eigenvector");
    return v / norm;
}

CMat update_combiner(const GevOperands& op, Eigen::Index dim)
{
    const GevResult gev = generalized_eig(op.signal_rx, op.leakage_rx, static_cast<int>(dim));
    Eigen::HouseholderQR<CMat> qr(gev.vectors);
    CMat q = qr.householderQ() * CMat::Identity(gev.vectors.rows(), dim);
    // Keep each column's orientation consistent with the eigenvector it came from.
    for (Eigen::Index j = 0; j < dim; ++j)
    {
        const cd c = q.col(j).dot(gev.vectors.col(j));
        if (std::abs(c) > 0.0)
            q.col(j) *= c / std::abs(c);
    }
    return q;
}

double surrogate_quotient(const GevOperands& op, const CMat& beamformer)
{
    const CVec v = vec_of(beamformer);
    const double num = v.dot(op.signal_tx * v).real();
    const double den = v.dot(op.leakage_tx * v).real();
    if (!(den > 0.0))
        throw std::runtime_error("surrogate_quotient: leakage operand is not positive definite");
    return num / den;
}

double stationarity_residual(const GevOperands& op, const CMat& beamformer)
{
    const CVec v = vec_of(beamformer);
    const double mu = surrogate_quotient(op, beamformer);
    const CVec sv = op.signal_tx * v;
    const CVec lv = op.leakage_tx * v;
    // Both sides enter the scale: with a near-singular leakage operand mu is huge and
    // ||S v|| alone would report rounding in mu * L v as a stationarity defect.
    const double scale = sv.norm() + std::abs(mu) * lv.norm();
    if (scale == 0.0)
        return 0.0;
    return (sv - mu * lv).norm() / scale;
}

double weighted_sum_information(const LinkModel& link, std::span<const Vec> states, std::span<const double> weights)
{
    const auto covs = direct_covariances(link, states);
    double total = 0.0;
    for (int k = 0; k < link.num_users(); ++k)
        total += weights[static_cast<std::size_t>(k)] * log_det_ratio(covs[static_cast<std::size_t>(k)]);
    return total;
}

void initialize_from_svd(LinkModel& link)
{
    link.validate();
    const auto d = link.combiners[0].cols();
    for (std::size_t k = 0; k < link.channels.size(); ++k)
    {
        Eigen::JacobiSVD<CMat> svd(link.channels[k], Eigen::ComputeFullU | Eigen::ComputeFullV);
        CMat v = svd.matrixV().leftCols(d);
        CMat w = svd.matrixU().leftCols(d);
        for (Eigen::Index j = 0; j < d; ++j)
        {
            fix_phase(v.col(j));
            fix_phase(w.col(j));
        }
        link.transmit[k].instantaneous = v / v.norm();
        link.combiners[k] = w;
    }
}

AlternatingTrace alternating_solve(LinkModel& link, std::span<const Vec> states, std::span<const double> weights,
                                   const AlternatingOptions& options)
{
    link.validate();
    if (options.max_outer < 1)
        throw std::invalid_argument("alternating_solve: max_outer must be >= 1");
    const int num_users = link.num_users();
    if (static_cast<int>(states.size()) != num_users || static_cast<int>(weights.size()) != num_users)
        throw std::invalid_argument("alternating_solve: one state and one weight per user required");
    const auto m = link.channels[0].cols();
    const auto d = link.combiners[0].cols();

    AlternatingTrace trace;
    double current = weighted_sum_information(link, states, weights);
    trace.objective.push_back(current);

    for (int it = 0; it < options.max_outer; ++it)
    {
        double residual = 0.0;
        const double start = current;
        for (int k = 0; k < num_users; ++k)
        {
            const auto ku = static_cast<std::size_t>(k);
            if (states[ku].squaredNorm() == 0.0)
                continue;

            GevOperands op;
            fill_transmit(op, k, link, states, weights, direct_covariances(link, states));
            const CMat v_old = link.transmit[ku].instantaneous;
            link.transmit[ku].instantaneous = update_beamformer(op, m, d);
            residual = std::max(residual, stationarity_residual(op, link.transmit[ku].instantaneous));
            double candidate = weighted_sum_information(link, states, weights);
            if (candidate < current)
                link.transmit[ku].instantaneous = v_old;
            else
                current = candidate;

            GevOperands op_rx;
            fill_receive(op_rx, k, link, states, weights);
            const CMat w_old = link.combiners[ku];
            link.combiners[ku] = update_combiner(op_rx, d);
            candidate = weighted_sum_information(link, states, weights);
            if (candidate < current)
                link.combiners[ku] = w_old;
            else
                current = candidate;
        }
        trace.objective.push_back(current);
        trace.max_gev_residual.push_back(residual);
        trace.iterations = it + 1;
        if (current < start - 1e-6)
            throw DivergenceError("alternating_solve: objective decreased", trace);
        if (std::abs(current - start) <= options.tol * std::max(std::abs(start), 1e-12))
        {
            trace.converged = true;
            break;
        }
    }
    return trace;
}

}  // namespace thzsim
