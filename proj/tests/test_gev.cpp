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
#include "oracles.hpp"
#include "thzsim/gev_beamformer.hpp"

#include <cmath>

using namespace thzsim;

namespace {

CMat random_hpd(Rng& rng, Eigen::Index n, double ridge)
{
    const CMat a = oracle::random_complex(rng, n, n);
    return a * a.adjoint() + ridge * CMat::Identity(n, n);
}

std::vector<Vec> random_states(Rng& rng, int users, int d)
{
    std::vector<Vec> z;
    for (int k = 0; k < users; ++k)
    {
        Vec v = real_normal(rng, d);
        z.push_back(uniform(rng, 0.3, 1.0) * v / v.norm());
    }
    return z;
}

}  // namespace

TEST_CASE("generalized_eig on a diagonal pencil returns the sorted ratios")
{
    CMat a = CMat::Zero(4, 4), b = CMat::Zero(4, 4);
    const double av[] = {1.0, 6.0, 2.0, 3.0};
    const double bv[] = {1.0, 2.0, 4.0, 0.5};
    for (int i = 0; i < 4; ++i)
    {
        a(i, i) = av[i];
        b(i, i) = bv[i];
    }
    const GevResult r = generalized_eig(a, b, 3);
    // Ratios 1, 3, 0.5, 6.
    CHECK(r.values(0) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(r.values(1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.values(2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r.vectors(3, 0)) > 0.99 * r.vectors.col(0).norm());
    CHECK(r.max_residual < 1e-12);
}

TEST_CASE("generalized_eig vectors are B-orthonormal and satisfy the pencil")
{
    Rng rng(11);
    for (int inst = 0; inst < 20; ++inst)
    {
        const CMat a = random_hpd(rng, 5, 0.0), b = random_hpd(rng, 5, 0.3);
        const GevResult r = generalized_eig(a, b, 5);
        const CMat gram = r.vectors.adjoint() * b * r.vectors;
        CHECK((gram - CMat::Identity(5, 5)).norm() < 1e-9);
        for (int j = 0; j + 1 < 5; ++j)
            CHECK(r.values(j) >= r.values(j + 1));
        for (int j = 0; j < 5; ++j)
        {
            const CVec v = r.vectors.col(j);
            CHECK((a * v - r.values(j) * (b * v)).norm() <= 1e-9 * a.norm() * v.norm());
        }
    }
}

TEST_CASE("generalized_eig rejects bad input")
{
    const CMat a = CMat::Identity(3, 3);
    CMat nonherm = a;
    nonherm(0, 1) = cd(1.0, 0.0);
    CHECK_THROWS_AS(generalized_eig(nonherm, a, 1), std::invalid_argument);
    CHECK_THROWS_AS(generalized_eig(a, CMat::Identity(2, 2), 1), std::invalid_argument);
    CHECK_THROWS_AS(generalized_eig(a, a, 0), std::invalid_argument);
    CHECK_THROWS_AS(generalized_eig(a, a, 4), std::invalid_argument);
}

TEST_CASE("direct covariances agree with the lifted model and the oracle")
{
    Rng rng(12);
    for (int inst = 0; inst < 10; ++inst)
    {
        const LinkModel link = oracle::random_link(rng, 3, 4, 3, 2, inst % 2 ? 0.05 : 0.0);
        const std::vector<Vec> z = random_states(rng, 3, 2);
        const auto direct = direct_covariances(link, z);
        const LiftedCovarianceModel model(link);
        std::vector<Mat> lifted;
        for (const Vec& s : z)
            lifted.push_back(s * s.transpose());
        for (int k = 0; k < 3; ++k)
        {
            const CovariancePair lc = model.evaluate(k, lifted);
            const oracle::Cov oc = oracle::covariances(link, z, k);
            const auto& dc = direct[static_cast<std::size_t>(k)];
            CHECK((dc.signal_plus_interference - lc.signal_plus_interference).norm() < 1e-10);
            CHECK((dc.interference - lc.interference).norm() < 1e-10);
            CHECK((dc.signal_plus_interference - oc.r).norm() < 1e-10);
            CHECK((dc.interference - oc.rbar).norm() < 1e-10);
        }
    }
}

TEST_CASE("reduced pencil matches the full Kronecker pencil")
{
    Rng rng(13);
    for (int inst = 0; inst < 20; ++inst)
    {
        const int m = 3 + inst % 2;
        const LinkModel link = oracle::random_link(rng, 2, m, 2, 2, inst % 2 ? 0.1 : 0.0);
        const std::vector<Vec> z = random_states(rng, 2, 2);
        const std::vector<double> w{1.0, 0.7};
        GevOperands op = build_operands(0, link, z, w);
        REQUIRE(op.direction.size() == 2);
        const CMat reduced = update_beamformer(op, m, 2);
        const double q_reduced = surrogate_quotient(op, reduced);

        GevOperands full = op;
        full.direction.resize(0);
        const CMat dense = update_beamformer(full, m, 2);
        CHECK(q_reduced == doctest::Approx(surrogate_quotient(op, dense)).epsilon(1e-7));
        CHECK(reduced.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(stationarity_residual(op, reduced) < 1e-6);
    }
}

TEST_CASE("no random candidate beats the beamformer update")
{
    Rng rng(14);
    for (int inst = 0; inst < 20; ++inst)
    {
        const int m = 2 + inst % 3;
        const LinkModel link = oracle::random_link(rng, 3, m, 2, 2, 0.05);
        const std::vector<Vec> z = random_states(rng, 3, 2);
        const std::vector<double> w{1.0, 1.3, 0.6};
        const GevOperands op = build_operands(1, link, z, w);
        const double q = surrogate_quotient(op, update_beamformer(op, m, 2));
        for (int c = 0; c < 500; ++c)
        {
            const CMat cand = oracle::random_complex(rng, m, 2);
            CHECK(surrogate_quotient(op, cand / cand.norm()) <= q * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("combiner update has orthonormal columns")
{
    Rng rng(15);
    const LinkModel link = oracle::random_link(rng, 2, 4, 3, 2, 0.0);
    const std::vector<Vec> z = random_states(rng, 2, 2);
    const std::vector<double> w{1.0, 1.0};
    const GevOperands op = build_operands(0, link, z, w);
    const CMat c = update_combiner(op, 2);
    CHECK((c.adjoint() * c - CMat::Identity(2, 2)).norm() < 1e-10);
}

TEST_CASE("alternating solve is monotone and improves on the SVD start")
{
    Rng rng(16);
    for (int inst = 0; inst < 10; ++inst)
    {
        LinkModel link = oracle::random_link(rng, 3, 6, 2, 2, inst % 2 ? 0.05 : 0.0, 2.0);
        const std::vector<Vec> z = random_states(rng, 3, 2);
        const std::vector<double> w{1.0, 1.0, 1.0};
        initialize_from_svd(link);
        const double start = weighted_sum_information(link, z, w);
        CHECK(start == doctest::Approx(oracle::information(link, z, w, 0) + oracle::information(link, z, w, 1) +
                                       oracle::information(link, z, w, 2))
                           .epsilon(1e-9));
        const AlternatingTrace trace = alternating_solve(link, z, w);
        REQUIRE(trace.objective.size() == static_cast<std::size_t>(trace.iterations + 1));
        for (std::size_t i = 1; i < trace.objective.size(); ++i)
            CHECK(trace.objective[i] >= trace.objective[i - 1] - 1e-12);
        CHECK(trace.objective.back() >= start);
        CHECK(weighted_sum_information(link, z, w) == doctest::Approx(trace.objective.back()).epsilon(1e-12));
        for (const CMat& v : std::vector<CMat>{link.transmit[0].instantaneous, link.transmit[1].instantaneous})
            CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("SVD initialization aligns with the dominant channel modes")
{
    Rng rng(17);
    LinkModel link = oracle::random_link(rng, 1, 4, 3, 2, 0.0);
    initialize_from_svd(link);
    Eigen::JacobiSVD<CMat> svd(link.channels[0]);
    const CMat g = link.combiners[0].adjoint() * link.channels[0] * link.transmit[0].instantaneous;
    // V has Frobenius norm 1, so the two singular values are scaled by 1/sqrt(2).
    Eigen::JacobiSVD<CMat> gs(g);
    CHECK(gs.singularValues()(0) == doctest::Approx(svd.singularValues()(0) / std::sqrt(2.0)).epsilon(1e-10));
    CHECK(gs.singularValues()(1) == doctest::Approx(svd.singularValues()(1) / std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("alternating solve rejects mismatched inputs")
{
    Rng rng(18);
    LinkModel link = oracle::random_link(rng, 2, 4, 2, 2, 0.0);
    const std::vector<Vec> one{Vec::Ones(2)};
    const std::vector<double> w{1.0, 1.0};
    CHECK_THROWS_AS(alternating_solve(link, one, w), std::invalid_argument);
    const std::vector<Vec> z{Vec::Ones(2), Vec::Ones(2)};
    CHECK_THROWS_AS(alternating_solve(link, z, w, AlternatingOptions{0, 1e-5}), std::invalid_argument);
}
