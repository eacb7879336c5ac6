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

#include "thzsim/causal_dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace thzsim {
namespace {

double sigmoid(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sum_exp(const Eigen::Ref<const Vec>& v)
{
    const double m = v.maxCoeff();
    if (!std::isfinite(m))
        return m;
    return m + std::log((v.array() - m).exp().sum());
}

bool flag_set(std::span<const int> flags, int node)
{
    return !flags.empty() && flags[static_cast<std::size_t>(node)] != 0;
}

// Topological sort on a bitmask parent representation (parents[j] = mask of i -> j).
bool masks_acyclic(const std::vector<unsigned>& parents)
{
    const auto n = parents.size();
    const unsigned all = (1u << n) - 1u;
    unsigned done = 0;
    for (std::size_t round = 0; round < n && done != all; ++round)
    {
        bool progressed = false;
        for (std::size_t j = 0; j < n; ++j)
        {
            if (done & (1u << j))
                continue;
            if ((parents[j] & ~done) == 0)
            {
                done |= 1u << j;
                progressed = true;
            }
        }
        if (!progressed)
            return false;
    }
    return done == all;
}

double log_det_sym(const Mat& a)
{
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("elbo: covariance not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

// ---------------------------------------------------------------- graph

std::vector<int> CausalGraphModel::parents(int node) const
{
    std::vector<int> out;
    for (int i = 0; i < num_nodes(); ++i)
        if (adjacency(i, node) != 0)
            out.push_back(i);
    return out;
}

std::vector<int> CausalGraphModel::topological_order() const
{
    const int n = num_nodes();
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (adjacency(i, j) != 0)
                ++indeg[static_cast<std::size_t>(j)];
    std::vector<int> order;
    std::vector<int> ready;
    for (int j = n - 1; j >= 0; --j)
        if (indeg[static_cast<std::size_t>(j)] == 0)
            ready.push_back(j);
    while (!ready.empty())
    {
        const int i = ready.back();
        ready.pop_back();
        order.push_back(i);
        for (int j = n - 1; j >= 0; --j)
            if (adjacency(i, j) != 0 && --indeg[static_cast<std::size_t>(j)] == 0)
                ready.push_back(j);
    }
    if (static_cast<int>(order.size()) == n)
        return order;

    // Walk backwards along parent links inside the residual graph to name a cycle.
    int start = 0;
    while (indeg[static_cast<std::size_t>(start)] == 0)
        ++start;
    std::vector<int> seen(static_cast<std::size_t>(n), -1);
    std::vector<int> path;
    int cur = start;
    while (seen[static_cast<std::size_t>(cur)] < 0)
    {
        seen[static_cast<std::size_t>(cur)] = static_cast<int>(path.size());
        path.push_back(cur);
        int next = -1;
        for (int i = 0; i < n; ++i)
            if (adjacency(i, cur) != 0 && indeg[static_cast<std::size_t>(i)] > 0)
            {
                next = i;
                break;
            }
        cur = next;
    }
    std::vector<int> cycle(path.begin() + seen[static_cast<std::size_t>(cur)], path.end());
    std::reverse(cycle.begin(), cycle.end());
    std::ostringstream msg;
    msg << "causal graph contains a cycle: ";
    for (int v : cycle)
        msg << v << " -> ";
    msg << cycle.front();
    throw std::invalid_argument(msg.str());
}

bool CausalGraphModel::is_dag() const
{
    try
    {
        topological_order();
        return true;
    }
    catch (const std::invalid_argument&)
    {
        return false;
    }
}

void CausalGraphModel::validate() const
{
    const int n = num_nodes();
    if (n < 1 || adjacency.cols() != n)
        throw std::invalid_argument("CausalGraphModel: adjacency must be square and non-empty");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
        {
            const int a = adjacency(i, j);
            if (a != 0 && a != 1)
                throw std::invalid_argument("CausalGraphModel: adjacency must be 0/1");
            if (i == j && a != 0)
                throw std::invalid_argument("CausalGraphModel: self-loops are not allowed");
        }
    if (!intervention_flags.empty() && static_cast<int>(intervention_flags.size()) != n)
        throw std::invalid_argument("CausalGraphModel: one intervention flag per node required");
    for (int f : intervention_flags)
        if (f != 0 && f != 1)
            throw std::invalid_argument("CausalGraphModel: intervention flags must be 0/1");
    for (int f : beam_intervention_flags)
        if (f != 0 && f != 1)
            throw std::invalid_argument("CausalGraphModel: beam intervention flags must be 0/1");
    if (edge_posterior.size() != 0 && (edge_posterior.rows() != n || edge_posterior.cols() != n))
        throw std::invalid_argument("CausalGraphModel: edge posterior shape mismatch");
    if (intervention_posterior.size() != 0 && intervention_posterior.size() != n)
        throw std::invalid_argument("CausalGraphModel: intervention posterior length mismatch");
    topological_order();
}

Mat CausalGraphModel::beam_column_mask(Eigen::Index num_antennas) const
{
    const auto d = static_cast<Eigen::Index>(beam_intervention_flags.size());
    Mat mask = Mat::Ones(num_antennas, d);
    for (Eigen::Index j = 0; j < d; ++j)
        if (beam_intervention_flags[static_cast<std::size_t>(j)] != 0)
            mask.col(j).setZero();
    return mask;
}

CausalGraphModel empty_graph(int nodes)
{
    if (nodes < 1)
        throw std::invalid_argument("empty_graph: nodes must be >= 1");
    CausalGraphModel g;
    g.adjacency = IntMat::Zero(nodes, nodes);
    g.intervention_flags.assign(static_cast<std::size_t>(nodes), 0);
    return g;
}

CausalGraphModel chain_graph(int nodes)
{
    CausalGraphModel g = empty_graph(nodes);
    for (int i = 0; i + 1 < nodes; ++i)
        g.adjacency(i, i + 1) = 1;
    return g;
}

CausalGraphModel erdos_renyi_dag(int nodes, double p, Rng& rng)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("erdos_renyi_dag: p must lie in [0, 1]");
    CausalGraphModel g = empty_graph(nodes);
    std::vector<int> perm(static_cast<std::size_t>(nodes));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = nodes - 1; i > 0; --i)
    {
        const int j = std::min(i, static_cast<int>(uniform(rng, 0.0, 1.0) * (i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    for (int a = 0; a < nodes; ++a)
        for (int b = a + 1; b < nodes; ++b)
            if (uniform(rng, 0.0, 1.0) < p)
                g.adjacency(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]) = 1;
    return g;
}

// ---------------------------------------------------------------- transitions

void TransitionModel::validate(const CausalGraphModel& graph) const
{
    const int n = graph.num_nodes();
    if (num_nodes() != n || weights.rows() != n || weights.cols() != n || noise_variance.size() != n ||
        intervention_shift.size() != n || initial_mean.size() != n || initial_variance.size() != n)
        throw std::invalid_argument("TransitionModel: parameter shapes do not match the graph");
    if (!(noise_variance.array() > 0.0).all() || !(initial_variance.array() > 0.0).all())
        throw std::invalid_argument("TransitionModel: variances must be > 0");
    if (!(observation_variance > 0.0))
        throw std::invalid_argument("TransitionModel: observation variance must be > 0");
    if (!weights.allFinite() || !bias.allFinite() || !intervention_shift.allFinite() || !initial_mean.allFinite())
        throw std::invalid_argument("TransitionModel: non-finite parameters");
}

Mat TransitionModel::transition_matrix(const CausalGraphModel& graph) const
{
    return weights.cwiseProduct(graph.adjacency.cast<double>()).transpose();
}

Vec TransitionModel::transition_mean(const CausalGraphModel& graph, const Vec& prev,
                                     std::span<const int> interventions) const
{
    if (prev.size() != num_nodes())
        throw std::invalid_argument("TransitionModel: state dimension mismatch");
    if (!interventions.empty() && static_cast<int>(interventions.size()) != num_nodes())
        throw std::invalid_argument("TransitionModel: one intervention flag per node required");
    Vec m = transition_matrix(graph) * prev + bias;
    for (int j = 0; j < num_nodes(); ++j)
        if (flag_set(interventions, j))
            m(j) += intervention_shift(j);
    return m;
}

TransitionModel random_linear_gaussian(const CausalGraphModel& graph, Rng& rng, double lo, double hi,
                                       double shift_sigmas)
{
    const int n = graph.num_nodes();
    TransitionModel t;
    t.weights = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (graph.adjacency(i, j) != 0)
            {
                const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
                t.weights(i, j) = sign * uniform(rng, lo, hi);
            }
    t.bias = Vec::Zero(n);
    t.noise_variance = Vec::Ones(n);
    t.intervention_shift = Vec::Constant(n, shift_sigmas);
    t.initial_mean = Vec::Zero(n);
    t.initial_variance = Vec::Ones(n);
    return t;
}

Vec sample_transition(const CausalGraphModel& graph, const TransitionModel& model, const Vec& prev,
                      std::span<const int> interventions, Rng& rng)
{
    Vec next = model.transition_mean(graph, prev, interventions);
    for (int j = 0; j < model.num_nodes(); ++j)
        next(j) += std::sqrt(std::max(0.0, model.noise_variance(j))) * standard_normal(rng);
    return next;
}

double node_log_density(const CausalGraphModel& graph, const TransitionModel& model, int node, const Vec& prev,
                        const Vec& next, std::span<const int> interventions)
{
    double mean = model.bias(node);
    for (int i : graph.parents(node))
        mean += model.weights(i, node) * prev(i);
    if (flag_set(interventions, node))
        mean += model.intervention_shift(node);
    const double var = model.noise_variance(node);
    const double r = next(node) - mean;
    return -0.5 * (std::log(2.0 * kPi * var) + r * r / var);
}

double transition_log_density(const CausalGraphModel& graph, const TransitionModel& model, const Vec& prev,
                              const Vec& next, std::span<const int> interventions)
{
    const Vec mean = model.transition_mean(graph, prev, interventions);
    const Vec r = next - mean;
    return -0.5 * ((2.0 * kPi * model.noise_variance.array()).log().sum() +
                   (r.array().square() / model.noise_variance.array()).sum());
}

Episode simulate_episode(const CausalGraphModel& graph, const TransitionModel& model, int steps,
                         std::span<const int> intervention_targets, int environment, Rng& rng)
{
    if (steps < 1)
        throw std::invalid_argument("simulate_episode: steps must be >= 1");
    const int n = model.num_nodes();
    std::vector<int> flags(static_cast<std::size_t>(n), 0);
    for (int j : intervention_targets)
    {
        if (j < 0 || j >= n)
            throw std::invalid_argument("simulate_episode: intervention target out of range");
        flags[static_cast<std::size_t>(j)] = 1;
    }
    const bool intervened = environment != 0 && !intervention_targets.empty();

    Episode ep;
    ep.environment = environment;
    ep.latent.resize(steps, n);
    ep.observations.resize(steps, n);
    ep.interventions.assign(static_cast<std::size_t>(steps), {});
    Vec s(n);
    for (int j = 0; j < n; ++j)
        s(j) = model.initial_mean(j) + std::sqrt(model.initial_variance(j)) * standard_normal(rng);
    for (int t = 0; t < steps; ++t)
    {
        if (t > 0)
        {
            if (intervened)
                ep.interventions[static_cast<std::size_t>(t)] = flags;
            s = sample_transition(graph, model, s, ep.interventions[static_cast<std::size_t>(t)], rng);
        }
        ep.latent.row(t) = s.transpose();
        for (int j = 0; j < n; ++j)
            ep.observations(t, j) = s(j) + std::sqrt(model.observation_variance) * standard_normal(rng);
    }
    return ep;
}

// ---------------------------------------------------------------- filtering

LinearGaussianFilter::LinearGaussianFilter(CausalGraphModel graph, TransitionModel model)
    : graph_(std::move(graph)), model_(std::move(model))
{
    graph_.validate();
    model_.validate(graph_);
    a_ = model_.transition_matrix(graph_);
    reset();
}

void LinearGaussianFilter::reset()
{
    mean_ = model_.initial_mean;
    cov_ = model_.initial_variance.asDiagonal();
    last_ll_ = 0.0;
}

void LinearGaussianFilter::update(const Vec& observation)
{
    const auto n = mean_.size();
    if (observation.size() != n)
        throw std::invalid_argument("LinearGaussianFilter: observation dimension mismatch");
    const Mat s = cov_ + model_.observation_variance * Mat::Identity(n, n);
    const Eigen::LLT<Mat> llt(s);
    const Vec innov = observation - mean_;
    last_ll_ = -0.5 * (static_cast<double>(n) * std::log(2.0 * kPi) + log_det_spd(s) + innov.dot(llt.solve(innov)));
    const Mat gain = llt.solve(cov_).transpose();  // cov S^-1 (both symmetric)
    mean_ += gain * innov;
    const Mat ik = Mat::Identity(n, n) - gain;
    cov_ = ik * cov_ * ik.transpose() + model_.observation_variance * gain * gain.transpose();
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
}

void LinearGaussianFilter::predict(std::span<const int> interventions)
{
    mean_ = model_.transition_mean(graph_, mean_, interventions);
    cov_ = a_ * cov_ * a_.transpose();
    cov_.diagonal() += model_.noise_variance;
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
}

// ---------------------------------------------------------------- beams

BeamCodebook BeamCodebook::dft(int size)
{
    if (size < 1)
        throw std::invalid_argument("BeamCodebook::dft: size must be >= 1");
    BeamCodebook cb;
    cb.id = "dft";
    const double scale = 1.0 / std::sqrt(static_cast<double>(size));
    for (int n = 0; n < size; ++n)
    {
        CVec c(size);
        for (int m = 0; m < size; ++m)
            c(m) = scale * std::polar(1.0, 2.0 * kPi * static_cast<double>(m) * n / size);
        cb.codewords.push_back(std::move(c));
    }
    return cb;
}

void BeamCodebook::validate() const
{
    if (codewords.empty())
        throw std::invalid_argument("BeamCodebook: empty codebook");
    for (const auto& c : codewords)
    {
        if (c.size() != codewords[0].size())
            throw std::invalid_argument("BeamCodebook: codewords have different lengths");
        if (std::abs(c.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("BeamCodebook: codewords must have unit norm");
    }
}

CodewordPosterior::CodewordPosterior(const BeamCodebook& codebook, int columns, double forgetting, double sharpness)
    : CodewordPosterior(codebook, Mat::Constant(codebook.size(), columns, 1.0 / codebook.size()), forgetting,
                        sharpness)
{
}

CodewordPosterior::CodewordPosterior(const BeamCodebook& codebook, const Mat& probabilities, double forgetting,
                                     double sharpness)
    : codebook_(&codebook), forgetting_(forgetting), sharpness_(sharpness)
{
    codebook.validate();
    if (probabilities.rows() != codebook.size() || probabilities.cols() < 1)
        throw std::invalid_argument("CodewordPosterior: table shape does not match the codebook");
    if (!(forgetting > 0.0 && forgetting <= 1.0))
        throw std::invalid_argument("CodewordPosterior: forgetting factor must lie in (0, 1]");
    for (Eigen::Index j = 0; j < probabilities.cols(); ++j)
        if (std::abs(probabilities.col(j).sum() - 1.0) > 1e-9 || (probabilities.col(j).array() < 0.0).any())
            throw std::invalid_argument("CodewordPosterior: columns must be probability vectors");
    log_post_ = probabilities.array().max(1e-300).log().matrix();
}

void CodewordPosterior::update(const CMat& channel_estimate)
{
    if (channel_estimate.cols() != codebook_->dim())
        throw std::invalid_argument("CodewordPosterior: channel width does not match the codebook");
    Eigen::JacobiSVD<CMat> svd(channel_estimate, Eigen::ComputeThinV);
    const auto cols = log_post_.cols();
    for (Eigen::Index j = 0; j < cols; ++j)
    {
        const CVec v = svd.matrixV().col(std::min<Eigen::Index>(j, svd.matrixV().cols() - 1));
        for (int c = 0; c < codebook_->size(); ++c)
        {
            const double align = std::norm(codebook_->codewords[static_cast<std::size_t>(c)].dot(v));
            log_post_(c, j) = forgetting_ * log_post_(c, j) + sharpness_ * std::log(align + 1e-12);
        }
        log_post_.col(j).array() -= log_sum_exp(log_post_.col(j));
    }
}

Mat CodewordPosterior::probabilities() const
{
    Mat p(log_post_.rows(), log_post_.cols());
    for (Eigen::Index j = 0; j < log_post_.cols(); ++j)
    {
        const double lse = log_sum_exp(log_post_.col(j));
        p.col(j) = (log_post_.col(j).array() - lse).exp().matrix();
    }
    return p;
}

std::vector<int> CodewordPosterior::mode() const
{
    std::vector<int> out;
    for (Eigen::Index j = 0; j < log_post_.cols(); ++j)
    {
        Eigen::Index idx = 0;
        log_post_.col(j).maxCoeff(&idx);
        out.push_back(static_cast<int>(idx));
    }
    return out;
}

CMat CodewordPosterior::mode_beamformer() const
{
    const auto idx = mode();
    CMat v(codebook_->dim(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
        v.col(static_cast<Eigen::Index>(j)) = codebook_->codewords[static_cast<std::size_t>(idx[j])];
    return v;
}

StaticBeamMoments CodewordPosterior::moments() const
{
    const Mat p = probabilities();
    const auto m = codebook_->dim();
    StaticBeamMoments out;
    out.mean = CMat::Zero(m, p.cols());
    for (Eigen::Index j = 0; j < p.cols(); ++j)
    {
        for (int c = 0; c < codebook_->size(); ++c)
            out.mean.col(j) += p(c, j) * codebook_->codewords[static_cast<std::size_t>(c)];
        CMat cov = CMat::Zero(m, m);
        for (int c = 0; c < codebook_->size(); ++c)
        {
            if (p(c, j) == 0.0)
                continue;
            const CVec d = codebook_->codewords[static_cast<std::size_t>(c)] - out.mean.col(j);
            cov += p(c, j) * d * d.adjoint();
        }
        out.column_covariance.push_back(hermitian_part(cov));
    }
    return out;
}

double CodewordPosterior::entropy(int column) const
{
    const Vec p = probabilities().col(column);
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) > 0.0)
            h -= p(i) * std::log(p(i));
    return h;
}

CMat beam_second_moment(const StaticBeamMoments& moments)
{
    const auto m = moments.mean.rows();
    CMat out = CMat::Zero(m, m);
    for (Eigen::Index j = 0; j < moments.mean.cols(); ++j)
        out += moments.column_covariance[static_cast<std::size_t>(j)] + moments.mean.col(j) * moments.mean.col(j).adjoint();
    return out;
}

// ---------------------------------------------------------------- prediction

StaticPredictor::StaticPredictor(const CausalModelBundle& bundle, const PredictorOptions& options)
    : bundle_(&bundle), filter_(bundle.graph, bundle.transition),
      beams_(bundle.codebook, bundle.codeword_posterior, options.forgetting, options.sharpness)
{
    if (bundle.semantic_dim < 1 || bundle.semantic_dim > bundle.graph.num_nodes())
        throw std::invalid_argument("StaticPredictor: semantic_dim must lie in [1, num_nodes]");
    if (bundle.codeword_posterior.cols() != bundle.semantic_dim)
        throw std::invalid_argument("StaticPredictor: one codeword posterior column per semantic dimension required");
}

void StaticPredictor::observe(const HistoryEntry& entry)
{
    filter_.update(entry.observation);
    beams_.update(entry.channel_estimate);
    filter_.predict(entry.interventions);
    ++steps_;
}

PosteriorSnapshot StaticPredictor::snapshot() const
{
    if (steps_ == 0)
        throw std::invalid_argument("predict_static_components: empty history");
    const int d = bundle_->semantic_dim;
    PosteriorSnapshot s;
    s.state_mean = filter_.mean();
    s.state_covariance = filter_.covariance();
    s.z_tilde = s.state_mean.head(d);
    s.z_covariance = s.state_covariance.topLeftCorner(d, d);
    s.codeword_probabilities = beams_.probabilities();
    s.v_tilde = beams_.mode_beamformer();
    s.moments = beams_.moments();
    return s;
}

PosteriorSnapshot predict_static_components(std::span<const HistoryEntry> history, const CausalModelBundle& bundle,
                                            const PredictorOptions& options)
{
    if (history.empty())
        throw std::invalid_argument("predict_static_components: empty history");
    StaticPredictor p(bundle, options);
    for (const auto& h : history)
        p.observe(h);
    return p.snapshot();
}

// ---------------------------------------------------------------- ELBO

namespace {

struct GaussianPath
{
    std::vector<Vec> mean;
    std::vector<Mat> cov;
    std::vector<Mat> cross;  // Cov(s_t, s_{t-1}); empty for mean-field
};

std::span<const int> step_flags(const Episode& ep, int t)
{
    if (ep.interventions.empty())
        return {};
    return ep.interventions[static_cast<std::size_t>(t)];
}

GaussianPath posterior_path(const CausalGraphModel& graph, const TransitionModel& model, const Episode& ep,
                            ElboPosterior kind, double* log_ev)
{
    const int steps = static_cast<int>(ep.observations.rows());
    if (steps < 1)
        throw std::invalid_argument("elbo: empty episode");
    if (ep.observations.cols() != model.num_nodes())
        throw std::invalid_argument("elbo: observation width does not match the model");
    LinearGaussianFilter f(graph, model);
    std::vector<Vec> mf, mp;
    std::vector<Mat> pf, pp;
    double ll = 0.0;
    for (int t = 0; t < steps; ++t)
    {
        if (t > 0)
            f.predict(step_flags(ep, t));
        mp.push_back(f.mean());
        pp.push_back(f.covariance());
        f.update(ep.observations.row(t).transpose());
        ll += f.last_log_likelihood();
        mf.push_back(f.mean());
        pf.push_back(f.covariance());
    }
    if (log_ev)
        *log_ev = ll;

    GaussianPath path;
    if (kind == ElboPosterior::filtering)
    {
        path.mean = mf;
        path.cov = pf;
        return path;
    }
    const Mat a = model.transition_matrix(graph);
    path.mean = mf;
    path.cov = pf;
    path.cross.assign(static_cast<std::size_t>(steps), Mat());
    for (int t = steps - 1; t >= 1; --t)
    {
        const auto tu = static_cast<std::size_t>(t);
        const Mat j = pf[tu - 1] * a.transpose() * pp[tu].ldlt().solve(Mat::Identity(a.rows(), a.rows()));
        path.mean[tu - 1] = mf[tu - 1] + j * (path.mean[tu] - mp[tu]);
        path.cov[tu - 1] = pf[tu - 1] + j * (path.cov[tu] - pp[tu]) * j.transpose();
        path.cov[tu - 1] = 0.5 * (path.cov[tu - 1] + path.cov[tu - 1].transpose()).eval();
        path.cross[tu] = path.cov[tu] * j.transpose();
    }
    return path;
}

}  // namespace

double elbo(const CausalGraphModel& graph, const TransitionModel& model, const Episode& episode,
            ElboPosterior posterior)
{
    const GaussianPath q = posterior_path(graph, model, episode, posterior, nullptr);
    const int steps = static_cast<int>(q.mean.size());
    const auto n = static_cast<double>(model.num_nodes());
    const Mat a = model.transition_matrix(graph);
    const double r = model.observation_variance;
    const bool markov = !q.cross.empty();
    const double log2pie = std::log(2.0 * kPi * std::exp(1.0));

    double value = 0.0;
    for (int t = 0; t < steps; ++t)
    {
        const auto tu = static_cast<std::size_t>(t);
        const Vec x = episode.observations.row(t).transpose();
        value -= 0.5 * (n * std::log(2.0 * kPi * r) + ((x - q.mean[tu]).squaredNorm() + q.cov[tu].trace()) / r);

        if (t == 0)
        {
            const Vec d = q.mean[0] - model.initial_mean;
            value -= 0.5 * ((2.0 * kPi * model.initial_variance.array()).log().sum() +
                            ((d.array().square() + q.cov[0].diagonal().array()) / model.initial_variance.array()).sum());
            value += 0.5 * (n * log2pie + log_det_sym(q.cov[0]));
            continue;
        }
        const Vec c = model.transition_mean(graph, Vec::Zero(model.num_nodes()), step_flags(episode, t));
        const Vec e = q.mean[tu] - a * q.mean[tu - 1] - c;
        Mat ee = e * e.transpose() + q.cov[tu] + a * q.cov[tu - 1] * a.transpose();
        if (markov)
            ee -= q.cross[tu] * a.transpose() + a * q.cross[tu].transpose();
        value -= 0.5 * ((2.0 * kPi * model.noise_variance.array()).log().sum() +
                        (ee.diagonal().array() / model.noise_variance.array()).sum());

        if (markov)
        {
            const auto s = model.num_nodes();
            Mat joint(2 * s, 2 * s);
            joint << q.cov[tu], q.cross[tu], q.cross[tu].transpose(), q.cov[tu - 1];
            value += 0.5 * (log_det_sym(joint) - log_det_sym(q.cov[tu - 1])) + 0.5 * n * log2pie;
        }
        else
        {
            value += 0.5 * (n * log2pie + log_det_sym(q.cov[tu]));
        }
    }
    if (!std::isfinite(value))
        throw std::runtime_error("elbo: non-finite value");
    return value;
}

double log_evidence(const CausalGraphModel& graph, const TransitionModel& model, const Episode& episode)
{
    double ll = 0.0;
    posterior_path(graph, model, episode, ElboPosterior::filtering, &ll);
    return ll;
}

EmResult fit_em(const CausalGraphModel& graph, const TransitionModel& init, std::span<const Episode> episodes,
                int iterations)
{
    if (episodes.empty())
        throw std::invalid_argument("fit_em: no episodes");
    graph.validate();
    init.validate(graph);
    const int s = graph.num_nodes();
    EmResult res;
    res.model = init;
    auto total_evidence = [&](const TransitionModel& m) {
        double v = 0.0;
        for (const auto& ep : episodes)
            v += log_evidence(graph, m, ep);
        return v;
    };
    res.elbo_trace.push_back(total_evidence(res.model));

    for (int it = 0; it < iterations; ++it)
    {
        std::vector<GaussianPath> paths;
        for (const auto& ep : episodes)
            paths.push_back(posterior_path(graph, res.model, ep, ElboPosterior::smoothing, nullptr));

        TransitionModel next = res.model;
        for (int j = 0; j < s; ++j)
        {
            const auto par = graph.parents(j);
            const auto p = static_cast<Eigen::Index>(par.size());
            Mat xx = Mat::Zero(p + 1, p + 1);
            Vec xy = Vec::Zero(p + 1);
            double yy = 0.0;
            double count = 0.0;
            for (std::size_t e = 0; e < episodes.size(); ++e)
            {
                const auto& q = paths[e];
                for (std::size_t t = 1; t < q.mean.size(); ++t)
                {
                    const double shift = flag_set(step_flags(episodes[e], static_cast<int>(t)), j)
                                             ? res.model.intervention_shift(j)
                                             : 0.0;
                    Vec mu(p + 1);
                    Mat cov = Mat::Zero(p + 1, p + 1);
                    Vec cross = Vec::Zero(p + 1);
                    for (Eigen::Index a = 0; a < p; ++a)
                    {
                        const int ia = par[static_cast<std::size_t>(a)];
                        mu(a) = q.mean[t - 1](ia);
                        cross(a) = q.cross[t](j, ia);
                        for (Eigen::Index b = 0; b < p; ++b)
                            cov(a, b) = q.cov[t - 1](ia, par[static_cast<std::size_t>(b)]);
                    }
                    mu(p) = 1.0;
                    const double my = q.mean[t](j) - shift;
                    xx += cov + mu * mu.transpose();
                    xy += cross + mu * my;
                    yy += q.cov[t](j, j) + my * my;
                    count += 1.0;
                }
            }
            if (count < 1.0)
                throw std::invalid_argument("fit_em: episodes need at least two steps");
            const Vec theta = xx.ldlt().solve(xy);
            for (Eigen::Index a = 0; a < p; ++a)
                next.weights(par[static_cast<std::size_t>(a)], j) = theta(a);
            next.bias(j) = theta(p);
            next.noise_variance(j) = std::max((yy - theta.dot(xy)) / count, 1e-12);
        }
        res.model = next;
        res.elbo_trace.push_back(total_evidence(res.model));
    }
    return res;
}

// ---------------------------------------------------------------- structure learning

namespace {

struct LaggedData
{
    Mat prev;                 // n x S
    Mat next;                 // n x S
    std::vector<int> env;     // per row
    std::vector<int> env_ids; // distinct non-zero environments
};

LaggedData lagged(std::span<const Episode> episodes)
{
    LaggedData d;
    Eigen::Index rows = 0;
    Eigen::Index s = -1;
    for (const auto& ep : episodes)
    {
        if (s < 0)
            s = ep.observations.cols();
        if (ep.observations.cols() != s)
            throw std::invalid_argument("learn_structure: episodes have different node counts");
        rows += std::max<Eigen::Index>(0, ep.observations.rows() - 1);
    }
    d.prev.resize(rows, s);
    d.next.resize(rows, s);
    Eigen::Index r = 0;
    for (const auto& ep : episodes)
    {
        const auto t = ep.observations.rows();
        if (t < 2)
            continue;
        d.prev.middleRows(r, t - 1) = ep.observations.topRows(t - 1);
        d.next.middleRows(r, t - 1) = ep.observations.bottomRows(t - 1);
        for (Eigen::Index i = 0; i < t - 1; ++i)
            d.env.push_back(ep.environment);
        r += t - 1;
        if (ep.environment != 0 && std::find(d.env_ids.begin(), d.env_ids.end(), ep.environment) == d.env_ids.end())
            d.env_ids.push_back(ep.environment);
    }
    std::sort(d.env_ids.begin(), d.env_ids.end());
    return d;
}

struct NodeFit
{
    double loglik = 0.0;
    Vec coef;  // parents..., intercept, per-environment shifts...
};

NodeFit fit_node(const LaggedData& d, int node, unsigned parent_mask, bool intervened)
{
    const auto n = d.prev.rows();
    const auto s = d.prev.cols();
    std::vector<int> par;
    for (int i = 0; i < s; ++i)
        if (parent_mask & (1u << i))
            par.push_back(i);
    const auto extra = intervened ? static_cast<Eigen::Index>(d.env_ids.size()) : 0;
    const auto p = static_cast<Eigen::Index>(par.size());
    Mat x(n, p + 1 + extra);
    for (Eigen::Index a = 0; a < p; ++a)
        x.col(a) = d.prev.col(par[static_cast<std::size_t>(a)]);
    x.col(p).setOnes();
    for (Eigen::Index e = 0; e < extra; ++e)
        for (Eigen::Index r = 0; r < n; ++r)
            x(r, p + 1 + e) = d.env[static_cast<std::size_t>(r)] == d.env_ids[static_cast<std::size_t>(e)] ? 1.0 : 0.0;
    const Vec y = d.next.col(node);
    Mat xtx = x.transpose() * x;
    xtx.diagonal().array() += 1e-9;
    NodeFit f;
    f.coef = xtx.ldlt().solve(x.transpose() * y);
    const double rss = std::max((y - x * f.coef).squaredNorm(), 1e-300);
    const auto nn = static_cast<double>(n);
    f.loglik = -0.5 * nn * (std::log(2.0 * kPi * rss / nn) + 1.0);
    return f;
}

struct ScoreTable
{
    int nodes = 0;
    // [node][mask][flag]
    std::vector<std::vector<std::array<double, 2>>> score;

    double best(int j, unsigned mask, int* flag = nullptr) const
    {
        const auto& s = score[static_cast<std::size_t>(j)][mask];
        const int f = s[1] > s[0] ? 1 : 0;
        if (flag)
            *flag = f;
        return s[static_cast<std::size_t>(f)];
    }
    double total(const std::vector<unsigned>& parents) const
    {
        double v = 0.0;
        for (int j = 0; j < nodes; ++j)
            v += best(j, parents[static_cast<std::size_t>(j)]);
        return v;
    }
};

}  // namespace

LearnedModel learn_structure(std::span<const Episode> episodes, const StructureOptions& options)
{
    if (episodes.empty())
        throw std::invalid_argument("learn_structure: no episodes");
    const int s = static_cast<int>(episodes[0].observations.cols());
    if (s > 6)
        throw std::invalid_argument("learn_structure: more than 6 nodes; train the model with the neural trainer "
                                    "and load the exported cgm-model/v1 file instead");
    if (s < 1)
        throw std::invalid_argument("learn_structure: episodes have no nodes");
    if (!(options.edge_penalty >= 0.0) || !(options.intervention_penalty >= 0.0))
        throw std::invalid_argument("learn_structure: penalties must be >= 0");

    const LaggedData data = lagged(episodes);
    const auto n = static_cast<double>(data.prev.rows());
    if (data.prev.rows() < 2)
        throw std::invalid_argument("learn_structure: not enough transitions");
    const double pen_g = options.edge_penalty * std::log(n);
    const double pen_i = options.intervention_penalty * std::log(n);
    const bool any_env = !data.env_ids.empty();
    const unsigned full = (1u << s) - 1u;

    ScoreTable table;
    table.nodes = s;
    table.score.assign(static_cast<std::size_t>(s), std::vector<std::array<double, 2>>(full + 1u));
    for (int j = 0; j < s; ++j)
        for (unsigned mask = 0; mask <= full; ++mask)
        {
            auto& cell = table.score[static_cast<std::size_t>(j)][mask];
            if (mask & (1u << j))
            {
                cell = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
                continue;
            }
            const double edges = static_cast<double>(__builtin_popcount(mask));
            cell[0] = fit_node(data, j, mask, false).loglik - pen_g * edges;
            cell[1] = any_env ? fit_node(data, j, mask, true).loglik - pen_g * edges - pen_i
                              : -std::numeric_limits<double>::infinity();
        }

    std::vector<unsigned> best(static_cast<std::size_t>(s), 0u);
    double best_score = table.total(best);
    Mat with = Mat::Constant(s, s, -std::numeric_limits<double>::infinity());
    Mat without = with;

    if (s <= 4)
    {
        // Enumerate every parent-mask assignment and keep the acyclic ones.
        std::vector<unsigned> cur(static_cast<std::size_t>(s), 0u);
        std::vector<unsigned> choices;
        const std::size_t total = std::size_t{1} << (s * s);
        best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t code = 0; code < total; ++code)
        {
            bool ok = true;
            for (int j = 0; j < s && ok; ++j)
            {
                const unsigned mask = static_cast<unsigned>((code >> (j * s)) & full);
                if (mask & (1u << j))
                    ok = false;
                cur[static_cast<std::size_t>(j)] = mask;
            }
            if (!ok || !masks_acyclic(cur))
                continue;
            const double v = table.total(cur);
            if (v > best_score)
            {
                best_score = v;
                best = cur;
            }
            for (int j = 0; j < s; ++j)
                for (int i = 0; i < s; ++i)
                {
                    if (i == j)
                        continue;
                    double& slot = (cur[static_cast<std::size_t>(j)] & (1u << i)) ? with(i, j) : without(i, j);
                    slot = std::max(slot, v);
                }
        }
    }
    else
    {
        bool improved = true;
        while (improved)
        {
            improved = false;
            std::vector<unsigned> move = best;
            double move_score = best_score;
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j)
                {
                    if (i == j)
                        continue;
                    std::vector<unsigned> cand = best;
                    const unsigned bit = 1u << i;
                    if (cand[static_cast<std::size_t>(j)] & bit)
                    {
                        cand[static_cast<std::size_t>(j)] &= ~bit;  // removal
                        const double v = table.total(cand);
                        if (v > move_score + 1e-12)
                        {
                            move = cand;
                            move_score = v;
                        }
                        cand[static_cast<std::size_t>(i)] |= 1u << j;  // reversal
                        if (masks_acyclic(cand))
                        {
                            const double r = table.total(cand);
                            if (r > move_score + 1e-12)
                            {
                                move = cand;
                                move_score = r;
                            }
                        }
                    }
                    else
                    {
                        cand[static_cast<std::size_t>(j)] |= bit;  // addition
                        if (masks_acyclic(cand))
                        {
                            const double v = table.total(cand);
                            if (v > move_score + 1e-12)
                            {
                                move = cand;
                                move_score = v;
                            }
                        }
                    }
                }
            if (move_score > best_score + 1e-12)
            {
                best = move;
                best_score = move_score;
                improved = true;
            }
        }
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j)
            {
                if (i == j)
                    continue;
                std::vector<unsigned> toggled = best;
                toggled[static_cast<std::size_t>(j)] ^= 1u << i;
                const bool present = best[static_cast<std::size_t>(j)] & (1u << i);
                const double other = masks_acyclic(toggled) ? table.total(toggled)
                                                            : -std::numeric_limits<double>::infinity();
                with(i, j) = present ? best_score : other;
                without(i, j) = present ? other : best_score;
            }
    }

    LearnedModel out;
    out.score = best_score;
    out.graph = empty_graph(s);
    out.graph.edge_posterior = Mat::Zero(s, s);
    out.graph.intervention_posterior = Vec::Zero(s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j)
        {
            if (i == j)
                continue;
            out.graph.adjacency(i, j) = (best[static_cast<std::size_t>(j)] & (1u << i)) ? 1 : 0;
            const double a = with(i, j);
            const double b = without(i, j);
            double post = 0.0;
            if (std::isinf(a) && std::isinf(b))
                post = 0.5;
            else if (std::isinf(a))
                post = 0.0;
            else if (std::isinf(b))
                post = 1.0;
            else
                post = sigmoid(a - b);
            out.graph.edge_posterior(i, j) = post;
        }

    TransitionModel& tm = out.transition;
    tm.weights = Mat::Zero(s, s);
    tm.bias = Vec::Zero(s);
    tm.noise_variance = Vec::Ones(s);
    tm.intervention_shift = Vec::Zero(s);
    tm.initial_mean = data.prev.colwise().mean().transpose();
    tm.initial_variance =
        ((data.prev.rowwise() - data.prev.colwise().mean()).array().square().colwise().sum() / n).transpose().max(1e-6);
    for (int j = 0; j < s; ++j)
    {
        const unsigned mask = best[static_cast<std::size_t>(j)];
        int flag = 0;
        table.best(j, mask, &flag);
        out.graph.intervention_flags[static_cast<std::size_t>(j)] = flag;
        const auto& cell = table.score[static_cast<std::size_t>(j)][mask];
        out.graph.intervention_posterior(j) = any_env ? sigmoid(cell[1] - cell[0]) : 0.0;

        const NodeFit fit = fit_node(data, j, mask, flag != 0);
        Eigen::Index a = 0;
        for (int i = 0; i < s; ++i)
            if (mask & (1u << i))
                tm.weights(i, j) = fit.coef(a++);
        tm.bias(j) = fit.coef(a);
        if (flag != 0)
            tm.intervention_shift(j) = fit.coef.tail(static_cast<Eigen::Index>(data.env_ids.size())).mean();
        const Mat& x = data.prev;
        Vec pred = Vec::Constant(x.rows(), tm.bias(j));
        for (int i = 0; i < s; ++i)
            pred += tm.weights(i, j) * x.col(i);
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            if (flag != 0 && data.env[static_cast<std::size_t>(r)] != 0)
                pred(r) += fit.coef(a + 1 + static_cast<Eigen::Index>(std::find(data.env_ids.begin(), data.env_ids.end(),
                                                                                 data.env[static_cast<std::size_t>(r)]) -
                                                                       data.env_ids.begin()));
        tm.noise_variance(j) = std::max((data.next.col(j) - pred).squaredNorm() / n, 1e-9);
    }
    out.graph.validate();
    return out;
}

}  // namespace thzsim
