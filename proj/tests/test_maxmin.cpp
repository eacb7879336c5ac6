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
#include "thzsim/maxmin_semantics.hpp"

#include <cmath>

using namespace thzsim;

namespace {

Mat random_symmetric(Rng& rng, int d)
{
    const Mat a = Eigen::Map<const Mat>(real_normal(rng, d * d).data(), d, d);
    return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_CASE("bisection iteration count is ceil(log2(width / tol))")
{
    CHECK(bisection_iterations(0.0, 1.0, 1.0) == 0);
    CHECK(bisection_iterations(0.0, 1.0, 0.5) == 1);
    CHECK(bisection_iterations(0.0, 1.0, 0.3) == 2);
    CHECK(bisection_iterations(0.0, 3.0, 1e-3) == 12);  // 3 / 2^12 < 1e-3 < 3 / 2^11
    CHECK(bisection_iterations(2.0, 2.0, 0.1) == 0);
    CHECK_THROWS_AS(bisection_iterations(0.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(bisection_iterations(1.0, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("trace-capped PSD projection")
{
    Rng rng(21);
    for (int inst = 0; inst < 200; ++inst)
    {
        const int d = 1 + inst % 4;
        const double cap = uniform(rng, 0.2, 2.0);
        const Mat z = 2.0 * random_symmetric(rng, d);
        const Mat p = project_trace_psd(z, cap);
        Eigen::SelfAdjointEigenSolver<Mat> es(p);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
        CHECK(p.trace() <= cap + 1e-12);
        CHECK((p - p.transpose()).norm() < 1e-12);
        // Idempotent.
        CHECK((project_trace_psd(p, cap) - p).norm() < 1e-10);
        // Obtuse-angle condition against random feasible points.
        for (int j = 0; j < 5; ++j)
        {
            const Mat y = project_trace_psd(random_symmetric(rng, d), cap);
            CHECK(((z - p).cwiseProduct(y - p)).sum() <= 1e-9);
        }
    }
    // Already feasible points are fixed.
    Mat f = Mat::Zero(2, 2);
    f(0, 0) = 0.3;
    f(1, 1) = 0.2;
    CHECK((project_trace_psd(f, 1.0) - f).norm() < 1e-14);
}

TEST_CASE("soft-min brackets the hard minimum and its gradient matches finite differences")
{
    Rng rng(22);
    const LinkModel link = oracle::random_link(rng, 3, 4, 2, 2, 0.05, 3.0);
    const LiftedCovarianceModel model(link);
    const MaxMinProblem problem(model, {1.0, 0.8, 1.2}, SemanticThresholds{0.5, 0.1});
    std::vector<Mat> x;
    for (int k = 0; k < 3; ++k)
        x.push_back(project_trace_psd(random_symmetric(rng, 2) + Mat::Identity(2, 2), 1.0));
    const double temp = 0.05, alpha = 0.2;
    std::vector<Mat> grad;
    double hard = 0.0;
    const double soft = problem.soft_min(x, alpha, temp, &grad, &hard);
    CHECK(hard == doctest::Approx(problem.min_margin(x, alpha)).epsilon(1e-12));
    CHECK(soft <= hard + 1e-12);
    // At most 2K margins (information and chance per user).
    CHECK(soft >= hard - temp * std::log(6.0) - 1e-12);

    const double h = 1e-6;
    for (int k = 0; k < 3; ++k)
    {
        const Mat dir = random_symmetric(rng, 2);
        std::vector<Mat> xp = x, xm = x;
        xp[static_cast<std::size_t>(k)] += h * dir;
        xm[static_cast<std::size_t>(k)] -= h * dir;
        const double fd = (problem.soft_min(xp, alpha, temp, nullptr) - problem.soft_min(xm, alpha, temp, nullptr)) /
                          (2.0 * h);
        const double an = grad[static_cast<std::size_t>(k)].cwiseProduct(dir).sum();
        CHECK(an == doctest::Approx(fd).epsilon(1e-3).scale(1e-3));
    }
}

TEST_CASE("lifted information matches the direct computation at rank-one points")
{
    Rng rng(23);
    const LinkModel link = oracle::random_link(rng, 2, 4, 2, 2, 0.1);
    const LiftedCovarianceModel model(link);
    const std::vector<double> w{0.7, 1.4};
    const MaxMinProblem problem(model, w, SemanticThresholds{0.5, 0.1});
    for (int inst = 0; inst < 20; ++inst)
    {
        std::vector<Vec> z{0.9 * real_normal(rng, 2).normalized(), 0.5 * real_normal(rng, 2).normalized()};
        std::vector<Mat> lifted{z[0] * z[0].transpose(), z[1] * z[1].transpose()};
        for (int k = 0; k < 2; ++k)
        {
            CHECK(problem.information(k, lifted) ==
                  doctest::Approx(oracle::information(link, z, w, k)).epsilon(1e-9));
            CHECK(problem.chance_margin(k, lifted) ==
                  doctest::Approx(oracle::chance_margin(link, z, k, 0.5, 0.1, 1.0)).epsilon(1e-9).scale(1e-9));
        }
        CHECK(problem.min_information(z) ==
              doctest::Approx(std::min(oracle::information(link, z, w, 0), oracle::information(link, z, w, 1)))
                  .epsilon(1e-9));
    }
}

TEST_CASE("isolated bounds and certified infeasibility")
{
    Rng rng(24);
    const LinkModel link = oracle::random_link(rng, 2, 4, 2, 2, 0.0);
    const LiftedCovarianceModel model(link);
    const MaxMinProblem problem(model, {1.0, 1.0}, SemanticThresholds{0.5, 0.1});
    const auto bounds = problem.isolated_bounds();
    REQUIRE(bounds.size() == 2);
    CHECK(problem.upper_bound() == doctest::Approx(1.1 * std::max(bounds[0], bounds[1])).epsilon(1e-14));
    // No single point beats the bound of a user served alone at full power.
    for (int inst = 0; inst < 200; ++inst)
    {
        std::vector<Vec> z{uniform(rng, 0.0, 1.0) * real_normal(rng, 2).normalized(),
                           uniform(rng, 0.0, 1.0) * real_normal(rng, 2).normalized()};
        const std::vector<double> w{1.0, 1.0};
        for (int k = 0; k < 2; ++k)
            CHECK(oracle::information(link, z, w, k) <= bounds[static_cast<std::size_t>(k)] + 1e-9);
    }
    const FeasibilityResult r = feasibility(problem, std::min(bounds[0], bounds[1]) + 1e-6);
    CHECK(r.certified);
    CHECK_FALSE(r.feasible);
    CHECK(r.states.empty());
    CHECK_THROWS_AS(feasibility(problem, std::nan("")), std::invalid_argument);
}

TEST_CASE("feasibility witnesses satisfy every constraint")
{
    Rng rng(25);
    int found = 0;
    for (int inst = 0; inst < 10; ++inst)
    {
        const LinkModel link = oracle::random_link(rng, 2, 4, 2, 2, 0.05, 3.0);
        const LiftedCovarianceModel model(link);
        const MaxMinProblem problem(model, {1.0, 1.0}, SemanticThresholds{1.5, 0.1});
        const double alpha = 0.05;
        const FeasibilityResult r = feasibility(problem, alpha);
        if (!r.feasible)
            continue;
        ++found;
        REQUIRE(r.states.size() == 2);
        CHECK(problem.satisfies(r.states, alpha));
        for (const Vec& z : r.states)
            CHECK(z.norm() <= 1.0 + 1e-9);
        for (int k = 0; k < 2; ++k)
        {
            CHECK(oracle::information(link, r.states, {1.0, 1.0}, k) >= alpha - 1e-9);
            CHECK(oracle::chance_margin(link, r.states, k, 1.5, 0.1, 1.0) >= -1e-9);
        }
    }
    CHECK(found > 0);
}

TEST_CASE("feasibility and bisection are deterministic")
{
    Rng rng(26);
    const LinkModel link = oracle::random_link(rng, 3, 4, 2, 2, 0.05, 3.0);
    const LiftedCovarianceModel model(link);
    const MaxMinProblem problem(model, {1.0, 1.0, 1.0}, SemanticThresholds{1.5, 0.1});
    const BisectionResult a = bisect_maxmin(problem, 1e-2);
    const BisectionResult b = bisect_maxmin(problem, 1e-2);
    CHECK(a.alpha == b.alpha);
    CHECK(a.iterations == b.iterations);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k)
        CHECK(a.states[k] == b.states[k]);
    CHECK(a.upper - a.lower <= 1e-2);
    CHECK(a.achieved_min_information >= a.alpha - 1e-9);
    CHECK(a.iterations == bisection_iterations(0.0, problem.upper_bound(), 1e-2));
}

TEST_CASE("single user without the chance constraint has a closed form")
{
    Rng rng(27);
    for (int inst = 0; inst < 5; ++inst)
    {
        const LinkModel link = oracle::random_link(rng, 1, 3, 2, 2, 0.0);
        const LiftedCovarianceModel model(link);
        const MaxMinProblem problem(model, {1.0}, SemanticThresholds{0.3, 0.1}, 0.8, false);
        const CMat g = link.combiners[0].adjoint() * link.channels[0] * link.transmit[0].instantaneous;
        const CMat nmat = link.noise_variance * link.combiners[0].adjoint() * link.combiners[0];
        const Mat a = (g.adjoint() * nmat.inverse() * g).real();
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
        const double exact = std::log1p(0.64 * es.eigenvalues().maxCoeff());
        const BisectionResult r = bisect_maxmin(problem, 1e-3);
        CHECK(std::abs(r.alpha - exact) <= 1e-3);
        CHECK(r.achieved_min_information <= exact + 1e-9);
    }
}

TEST_CASE("problem construction is validated")
{
    Rng rng(28);
    const LinkModel link = oracle::random_link(rng, 2, 4, 2, 2, 0.0);
    const LiftedCovarianceModel model(link);
    CHECK_THROWS_AS(MaxMinProblem(model, {1.0}, SemanticThresholds{}), std::invalid_argument);
    CHECK_THROWS_AS(MaxMinProblem(model, {1.0, -1.0}, SemanticThresholds{}), std::invalid_argument);
    CHECK_THROWS_AS(MaxMinProblem(model, {1.0, 1.0}, SemanticThresholds{}, 0.0), std::invalid_argument);
}
