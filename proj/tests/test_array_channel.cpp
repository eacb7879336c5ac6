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
#include "thzsim/array_channel.hpp"

#include <cmath>
#include <limits>

using namespace thzsim;

TEST_CASE("steering vector has unit-modulus entries and a linear phase progression")
{
    const ArrayGeometry g{8, 4, 0.5};
    for (double theta : {-1.0, -0.3, 0.0, 0.4, 1.0})
    {
        const CVec a = steering_vector(g, theta, ArraySide::tx);
        REQUIRE(a.size() == 8);
        CHECK(a(0) == cd(1.0, 0.0));
        const cd step = std::polar(1.0, kPi * std::sin(theta));
        for (Eigen::Index m = 0; m < a.size(); ++m)
        {
            CHECK(std::abs(a(m)) == doctest::Approx(1.0).epsilon(1e-14));
            if (m > 0)
                CHECK(std::abs(a(m) - a(m - 1) * step) < 1e-12);
        }
    }
    CHECK(steering_vector(g, 0.2, ArraySide::rx).size() == 4);
    CHECK((steering_vector(g, 0.0, ArraySide::tx) - CVec::Ones(8)).norm() < 1e-15);
    CHECK_THROWS_AS(steering_vector(g, std::nan(""), ArraySide::tx), std::invalid_argument);
}

TEST_CASE("LOS gain equals free-space spreading times half the molecular absorption in amplitude")
{
    ThzLinkConfig cfg;
    for (double d : {1.0, 5.0, 10.0, 30.0})
    {
        cfg.distance = d;
        const double fspl_db = 20.0 * std::log10(4.0 * kPi * d * cfg.carrier_freq / kSpeedOfLight);
        const double absorption_db = 10.0 * std::log10(std::exp(1.0)) * cfg.absorption_coeff * d;
        const double gain_db = 20.0 * std::log10(std::abs(los_gain(cfg)));
        CHECK(gain_db == doctest::Approx(-fspl_db - absorption_db).epsilon(1e-12));
    }
    // 10 m at 300 GHz sits near 102 dB of spreading loss.
    cfg.distance = 10.0;
    CHECK(-20.0 * std::log10(std::abs(los_gain(cfg))) == doctest::Approx(102.0).epsilon(2e-3));

    cfg.distance = -1.0;
    CHECK_THROWS_AS(los_gain(cfg), std::invalid_argument);
}

TEST_CASE("raised-cosine pulse is one at the origin and zero at other sampling instants")
{
    const double ts = 1e-9;
    for (double beta : {0.0, 0.25, 0.3, 0.5, 1.0})
    {
        CHECK(raised_cosine_pulse(0.0, ts, beta) == doctest::Approx(1.0));
        for (int n = 1; n <= 3; ++n)
        {
            CHECK(std::abs(raised_cosine_pulse(n * ts, ts, beta)) < 1e-12);
            CHECK(std::abs(raised_cosine_pulse(-n * ts, ts, beta)) < 1e-12);
        }
        if (beta > 0.0)
        {
            // Removable singularity at t = T / (2 beta): the limit equals the neighbours.
            const double t0 = ts / (2.0 * beta);
            const double mid = raised_cosine_pulse(t0, ts, beta);
            CHECK(std::isfinite(mid));
            CHECK(mid == doctest::Approx(raised_cosine_pulse(t0 * (1.0 + 1e-6), ts, beta)).epsilon(1e-4));
        }
    }
}

TEST_CASE("subcarrier channel of a single tap is flat, and of a delayed tap is a phase ramp")
{
    Rng rng(1);
    const CMat tap = oracle::random_complex(rng, 2, 3);
    const std::vector<CMat> one{tap};
    for (int n = 0; n < 8; ++n)
        CHECK((subcarrier_channel(one, n, 8) - tap).norm() < 1e-14);
    const std::vector<CMat> delayed{CMat::Zero(2, 3), tap};
    for (int n = 0; n < 8; ++n)
        CHECK((subcarrier_channel(delayed, n, 8) - std::polar(1.0, -2.0 * kPi * n / 8.0) * tap).norm() < 1e-13);
}

TEST_CASE("90 km/h at 300 GHz gives a 25 kHz maximum Doppler shift")
{
    const double v = 90.0 / 3.6;
    CHECK(mobility_to_doppler(v, 300e9, 0.0) == doctest::Approx(v * 300e9 / kSpeedOfLight));
    CHECK(mobility_to_doppler(v, 300e9, 0.0) == doctest::Approx(25e3).epsilon(1e-3));
    CHECK(std::abs(mobility_to_doppler(v, 300e9, kPi / 2.0)) < 1e-9);
    CHECK_THROWS_AS(mobility_to_doppler(-1.0, 300e9, 0.0), std::invalid_argument);
}

TEST_CASE("NLOS paths are 15 to 25 dB below the LOS and inside the sector")
{
    ThzLinkConfig cfg;
    cfg.num_nlos_paths = 5;
    Rng rng(7);
    const cd los = los_gain(cfg);
    for (int trial = 0; trial < 50; ++trial)
        for (const auto& p : draw_nlos_paths(cfg, los, rng, 3e-9))
        {
            const double drop = 20.0 * std::log10(std::abs(los) / std::abs(p.gain));
            CHECK(drop >= 15.0);
            CHECK(drop <= 25.0);
            CHECK(std::abs(p.aoa) <= kPi / 3.0);
            CHECK(std::abs(p.aod) <= kPi / 3.0);
            CHECK(p.delay >= 0.0);
            CHECK(p.delay <= 3e-9);
        }
}

TEST_CASE("single-path tap is rank one and matches the outer product of steering vectors")
{
    ThzLinkConfig cfg;
    const ArrayGeometry g{8, 4, 0.5};
    const PathParams p{los_gain(cfg), 0.3, -0.2, 0.0, 0.0};
    const std::vector<PathParams> paths{p};
    const CMat h = generate_tap(cfg, g, paths, 0, 0.0);
    const CMat expected = p.gain * cfg.tx_gain * cfg.rx_gain * steering_vector(g, 0.3, ArraySide::rx) *
                          steering_vector(g, -0.2, ArraySide::tx).transpose();
    CHECK((h - expected).norm() <= 1e-12 * expected.norm());
    Eigen::JacobiSVD<CMat> svd(h);
    CHECK(svd.singularValues()(1) <= 1e-10 * svd.singularValues()(0));
    CHECK_THROWS_AS(generate_tap(cfg, g, std::vector<PathParams>{}, 0, 0.0), std::invalid_argument);
}

TEST_CASE("estimate_channel: perfect limit, rejected inputs and Monte-Carlo error variance")
{
    Rng rng(11);
    const CMat h = oracle::random_complex(rng, 4, 8);
    const auto exact = estimate_channel(h, std::numeric_limits<double>::infinity(), 1.0, rng, 1.0);
    CHECK((exact.estimate - h).norm() < 1e-14);
    CHECK(exact.error_variance == 0.0);

    CHECK_THROWS_AS(estimate_channel(h, std::nan(""), 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(estimate_channel(h, -std::numeric_limits<double>::infinity(), 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(estimate_channel(h, 10.0, 1.2, rng), std::invalid_argument);

    // LMMSE of H from rho H + sqrt(1 - rho^2) innovation + pilot noise, all CN, per element.
    const double prior = 2.0, snr_db = 5.0, rho = 0.9;
    const double noise = prior * std::pow(10.0, -snr_db / 10.0);
    const double expected = prior - rho * rho * prior * prior / (prior + noise);
    CHECK(estimation_error_variance(prior, snr_db, rho) == doctest::Approx(expected).epsilon(1e-14));

    double err = 0.0, cross = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t)
    {
        const CMat ht = std::sqrt(prior) * oracle::random_complex(rng, 2, 4);
        const auto est = estimate_channel(ht, snr_db, rho, rng, prior);
        const CMat e = ht - est.estimate;
        err += e.squaredNorm() / 8.0;
        cross += (est.estimate.conjugate().cwiseProduct(e)).sum().real() / 8.0;
        CHECK(est.error_variance == doctest::Approx(expected));
    }
    err /= trials;
    cross /= trials;
    // 32000 unit-ish samples: relative standard error about 0.6%.
    CHECK(err == doctest::Approx(expected).epsilon(0.03));
    CHECK(std::abs(cross) < 0.03 * prior);  // the error is orthogonal to the estimate
}

TEST_CASE("geometry and link validation")
{
    CHECK_THROWS_AS(ArrayGeometry({1, 4, 0.5}).validate(2), std::invalid_argument);
    CHECK_NOTHROW(ArrayGeometry({4, 2, 0.5}).validate(2));
    ThzLinkConfig cfg;
    cfg.num_nlos_paths = 6;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    AbsorptionTable tab;
    CHECK(tab.lookup(300e9) == doctest::Approx(0.0033));
}
