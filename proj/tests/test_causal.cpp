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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "thzsim/causal_dynamics.hpp"

#include <cmath>
#include <string>

using namespace thzsim;

namespace {

// log N(x; m, C) for the stacked observations, built from the joint latent covariance.
double brute_force_evidence(const CausalGraphModel& graph, const TransitionModel& model, const Episode& ep)
{
    const int steps = static_cast<int>(ep.observations.rows());
    const int n = model.num_nodes();
    const Mat a = model.transition_matrix(graph);
    std::vector<Vec> mean(static_cast<std::size_t>(steps));
    std::vector<Mat> var(static_cast<std::size_t>(steps));
    mean[0] = model.initial_mean;
    var[0] = model.initial_variance.asDiagonal();
    for (int t = 1; t < steps; ++t)
    {
        Vec m = a * mean[static_cast<std::size_t>(t - 1)] + model.bias;
        const auto& flags = ep.interventions[static_cast<std::size_t>(t)];
        for (int j = 0; j < n; ++j)
            if (!flags.empty() && flags[static_cast<std::size_t>(j)] != 0)
                m(j) += model.intervention_shift(j);
        mean[static_cast<std::size_t>(t)] = m;
        Mat v = a * var[static_cast<std::size_t>(t - 1)] * a.transpose();
        v.diagonal() += model.noise_variance;
        var[static_cast<std::size_t>(t)] = v;
    }
    const int total = steps * n;
    Mat cov(total, total);
    Vec mu(total), x(total);
    for (int t = 0; t < steps; ++t)
    {
        mu.segment(t * n, n) = mean[static_cast<std::size_t>(t)];
        x.segment(t * n, n) = ep.observations.row(t).transpose();
        Mat prop = var[static_cast<std::size_t>(t)];  // Cov(s_u, s_t) for u >= t
        for (int u = t; u < steps; ++u)
        {
            cov.block(u * n, t * n, n, n) = prop;
            cov.block(t * n, u * n, n, n) = prop.transpose();
            prop = a * prop;
        }
    }
    cov.diagonal().array() += model.observation_variance;
    const Eigen::LLT<Mat> llt(cov);
    const Vec r = x - mu;
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (total * std::log(2.0 * kPi) + logdet + r.dot(llt.solve(r)));
}

}  // namespace

TEST_CASE("topological order respects every edge and cycles are named")
{
    Rng rng(31);
    for (int inst = 0; inst < 50; ++inst)
    {
        const CausalGraphModel g = erdos_renyi_dag(5, 0.5, rng);
        CHECK(g.is_dag());
        const auto order = g.topological_order();
        std::vector<int> pos(5);
        for (int i = 0; i < 5; ++i)
            pos[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                if (g.adjacency(i, j))
                    CHECK(pos[static_cast<std::size_t>(i)] < pos[static_cast<std::size_t>(j)]);
    }
    CausalGraphModel cyc = chain_graph(3);
    cyc.adjacency(2, 0) = 1;
    CHECK_FALSE(cyc.is_dag());
    try
    {
        cyc.topological_order();
        FAIL("expected a cycle error");
    }
    catch (const std::invalid_argument& e)
    {
        const std::string msg = e.what();
        CHECK(msg.find("cycle") != std::string::npos);
        // Any rotation of the cycle names it.
        CHECK((msg.find("0 -> 1 -> 2 -> 0") != std::string::npos || msg.find("1 -> 2 -> 0 -> 1") != std::string::npos ||
               msg.find("2 -> 0 -> 1 -> 2") != std::string::npos));
    }
    CausalGraphModel loop = empty_graph(2);
    loop.adjacency(1, 1) = 1;
    CHECK_THROWS_AS(loop.validate(), std::invalid_argument);
}

TEST_CASE("graph constructors")
{
    const CausalGraphModel c = chain_graph(4);
    CHECK(c.num_edges() == 3);
    CHECK(c.parents(2) == std::vector<int>{1});
    CHECK(c.parents(0).empty());
    Rng rng(32);
    CHECK(erdos_renyi_dag(6, 0.0, rng).num_edges() == 0);
    CHECK(erdos_renyi_dag(6, 1.0, rng).num_edges() == 15);
    CHECK_THROWS_AS(erdos_renyi_dag(3, 1.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(empty_graph(0), std::invalid_argument);
    // Edge density of ER(6, 0.3): 15 pairs, mean 4.5 edges.
    double edges = 0.0;
    for (int i = 0; i < 2000; ++i)
        edges += erdos_renyi_dag(6, 0.3, rng).num_edges();
    CHECK(edges / 2000.0 == doctest::Approx(4.5).epsilon(0.03));
}

TEST_CASE("node densities sum to the transition density")
{
    Rng rng(33);
    const CausalGraphModel g = erdos_renyi_dag(4, 0.5, rng);
    const TransitionModel m = random_linear_gaussian(g, rng);
    const std::vector<int> flags{0, 1, 0, 1};
    for (int i = 0; i < 20; ++i)
    {
        const Vec prev = real_normal(rng, 4), next = real_normal(rng, 4);
        double sum = 0.0;
        for (int j = 0; j < 4; ++j)
            sum += node_log_density(g, m, j, prev, next, flags);
        CHECK(sum == doctest::Approx(transition_log_density(g, m, prev, next, flags)).epsilon(1e-12));
    }
}

TEST_CASE("intervention shifts only the flagged node mean")
{
    const CausalGraphModel g = chain_graph(3);
    Rng rng(34);
    const TransitionModel m = random_linear_gaussian(g, rng);
    const Vec prev = Vec::Ones(3);
    const std::vector<int> flags{0, 0, 1};
    const Vec base = m.transition_mean(g, prev, {});
    const Vec shifted = m.transition_mean(g, prev, flags);
    CHECK(shifted(0) == base(0));
    CHECK(shifted(1) == base(1));
    CHECK(shifted(2) == doctest::Approx(base(2) + m.intervention_shift(2)));
}

TEST_CASE("filter evidence equals the brute-force joint Gaussian")
{
    Rng rng(35);
    for (int inst = 0; inst < 10; ++inst)
    {
        const CausalGraphModel g = erdos_renyi_dag(3, 0.5, rng);
        TransitionModel m = random_linear_gaussian(g, rng);
        m.bias = real_normal(rng, 3, 0.1);
        m.observation_variance = 0.2;
        const std::vector<int> targets{inst % 3};
        const Episode ep = simulate_episode(g, m, 6, targets, inst % 2, rng);
        const double exact = brute_force_evidence(g, m, ep);
        CHECK(log_evidence(g, m, ep) == doctest::Approx(exact).epsilon(1e-9));
        // The exact smoothing posterior closes the ELBO gap; the mean-field one cannot exceed it.
        CHECK(elbo(g, m, ep, ElboPosterior::smoothing) == doctest::Approx(exact).epsilon(1e-8));
        CHECK(elbo(g, m, ep, ElboPosterior::filtering) <= exact + 1e-9);

        LinearGaussianFilter f(g, m);
        double sum = 0.0;
        for (int t = 0; t < 6; ++t)
        {
            if (t > 0)
                f.predict(ep.interventions[static_cast<std::size_t>(t)]);
            f.update(ep.observations.row(t).transpose());
            sum += f.last_log_likelihood();
        }
        CHECK(sum == doctest::Approx(exact).epsilon(1e-9));
    }
}

TEST_CASE("EM never decreases the evidence")
{
    Rng rng(36);
    const CausalGraphModel g = chain_graph(3);
    const TransitionModel truth = random_linear_gaussian(g, rng);
    const std::vector<Episode> eps{simulate_episode(g, truth, 80, {}, 0, rng),
                                   simulate_episode(g, truth, 80, std::vector<int>{2}, 1, rng)};
    TransitionModel init = truth;
    init.weights *= 0.3;
    init.noise_variance *= 2.0;
    const EmResult r = fit_em(g, init, eps, 8);
    REQUIRE(r.elbo_trace.size() == 9);
    for (std::size_t i = 1; i < r.elbo_trace.size(); ++i)
        CHECK(r.elbo_trace[i] >= r.elbo_trace[i - 1] - 1e-7);
    CHECK_THROWS_AS(fit_em(g, init, std::span<const Episode>{}, 3), std::invalid_argument);
}

TEST_CASE("structure learner recovers a chain and rejects large graphs")
{
    int recovered = 0;
    for (int seed = 0; seed < 10; ++seed)
    {
        Rng rng = make_stream(3700, {static_cast<std::uint64_t>(seed)});
        const CausalGraphModel truth = chain_graph(4);
        const TransitionModel m = random_linear_gaussian(truth, rng);
        const std::vector<Episode> eps{simulate_episode(truth, m, 500, {}, 0, rng),
                                       simulate_episode(truth, m, 500, std::vector<int>{2}, 1, rng)};
        const LearnedModel learned = learn_structure(eps);
        CHECK(learned.graph.is_dag());
        CHECK(learned.graph.edge_posterior.rows() == 4);
        if (learned.graph.adjacency == truth.adjacency)
            ++recovered;
    }
    CHECK(recovered >= 9);

    Episode wide;
    wide.observations = Mat::Zero(10, 7);
    wide.interventions.assign(10, {});
    CHECK_THROWS_AS(learn_structure(std::vector<Episode>{wide}), std::invalid_argument);
    CHECK_THROWS_AS(learn_structure(std::vector<Episode>{}), std::invalid_argument);
}

TEST_CASE("codeword posterior stays normalized and concentrates on the aligned codeword")
{
    const BeamCodebook cb = BeamCodebook::dft(8);
    CodewordPosterior post(cb, 2, 0.9, 1.0);
    Mat p = post.probabilities();
    CHECK(p.col(0).sum() == doctest::Approx(1.0));
    CHECK(p(3, 1) == doctest::Approx(1.0 / 8.0));
    // Rank-one channel along codeword 5.
    const CMat h = CVec::Ones(2) * cb.codewords[5].adjoint();
    for (int t = 0; t < 20; ++t)
        post.update(h);
    p = post.probabilities();
    for (int j = 0; j < 2; ++j)
        CHECK(p.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(post.mode()[0] == 5);
    CHECK(p(5, 0) > 0.99);
    CHECK(post.entropy(0) < post.entropy(1) + 1e-12);
    CHECK((post.mode_beamformer().col(0) - cb.codewords[5]).norm() < 1e-14);
    CHECK_THROWS_AS(post.update(CMat::Ones(2, 3)), std::invalid_argument);
    CHECK_THROWS_AS(CodewordPosterior(cb, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(CodewordPosterior(cb, Mat::Ones(8, 1)), std::invalid_argument);
}

TEST_CASE("beam second moment equals mean outer product plus covariance")
{
    const BeamCodebook cb = BeamCodebook::dft(4);
    Mat table(4, 2);
    table << 0.1, 0.7, 0.2, 0.1, 0.3, 0.1, 0.4, 0.1;
    const CodewordPosterior post(cb, table);
    const StaticBeamMoments mom = post.moments();
    CMat direct = CMat::Zero(4, 4);
    for (int j = 0; j < 2; ++j)
        for (int c = 0; c < 4; ++c)
            direct += table(c, j) * cb.codewords[static_cast<std::size_t>(c)] *
                      cb.codewords[static_cast<std::size_t>(c)].adjoint();
    CHECK((beam_second_moment(mom) - direct).norm() < 1e-12);
}

TEST_CASE("static predictor follows the filter and checks its bundle")
{
    Rng rng(38);
    CausalModelBundle bundle;
    bundle.graph = chain_graph(3);
    bundle.transition = random_linear_gaussian(bundle.graph, rng);
    bundle.semantic_dim = 2;
    bundle.codebook = BeamCodebook::dft(4);
    bundle.codeword_posterior = Mat::Constant(4, 2, 0.25);
    const Episode ep = simulate_episode(bundle.graph, bundle.transition, 5, {}, 0, rng);
    std::vector<HistoryEntry> hist;
    LinearGaussianFilter f(bundle.graph, bundle.transition);
    for (int t = 0; t < 5; ++t)
    {
        hist.push_back({ep.observations.row(t).transpose(), CMat::Identity(2, 4), {}});
        f.update(hist.back().observation);
        f.predict({});
    }
    const PosteriorSnapshot s = predict_static_components(hist, bundle);
    CHECK((s.state_mean - f.mean()).norm() < 1e-12);
    CHECK((s.z_tilde - f.mean().head(2)).norm() < 1e-12);
    CHECK(s.v_tilde.cols() == 2);
    CHECK_THROWS_AS(predict_static_components(std::span<const HistoryEntry>{}, bundle), std::invalid_argument);
    bundle.semantic_dim = 4;
    CHECK_THROWS_AS(StaticPredictor{bundle}, std::invalid_argument);
}
