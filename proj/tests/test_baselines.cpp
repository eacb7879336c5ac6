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
#include "thzsim/baselines.hpp"

#include <cmath>

using namespace thzsim;

TEST_CASE("scheme names round trip")
{
    for (SchemeKind k : {SchemeKind::proposed, SchemeKind::perfect_csi, SchemeKind::dft_tracking, SchemeKind::naive_zf})
        CHECK(parse_scheme(scheme_name(k)) == k);
    CHECK_THROWS_AS(parse_scheme("mmse"), std::invalid_argument);
}

TEST_CASE("zero forcing nulls inter-user leakage under perfect CSI")
{
    Rng rng(51);
    for (int inst = 0; inst < 20; ++inst)
    {
        const int k = 2 + inst % 3;
        std::vector<CMat> h;
        for (int u = 0; u < k; ++u)
            h.push_back(oracle::random_complex(rng, 3, 8));
        const ZfResult zf = naive_zf(h, 2);
        CHECK_FALSE(zf.rank_deficient);
        CHECK(zf_leakage(h, zf) <= 1e-10);
        for (int u = 0; u < k; ++u)
        {
            CHECK(zf.beamformers[static_cast<std::size_t>(u)].norm() == doctest::Approx(1.0).epsilon(1e-12));
            const CMat& w = zf.combiners[static_cast<std::size_t>(u)];
            CHECK((w.adjoint() * w - CMat::Identity(2, 2)).norm() < 1e-10);
            // The own link survives.
            CHECK((w.adjoint() * h[static_cast<std::size_t>(u)] * zf.beamformers[static_cast<std::size_t>(u)]).norm() >
                  1e-3);
        }
    }
}

TEST_CASE("zero forcing leaks once the CSI is wrong")
{
    Rng rng(52);
    std::vector<CMat> est, truth;
    for (int u = 0; u < 3; ++u)
    {
        est.push_back(oracle::random_complex(rng, 2, 8));
        truth.push_back(est.back() + 0.3 * oracle::random_complex(rng, 2, 8));
    }
    const ZfResult zf = naive_zf(est, 2);
    CHECK(zf_leakage(est, zf) <= 1e-10);
    CHECK(zf_leakage(truth, zf) > 1e-3);
}

TEST_CASE("zero forcing input checks and rank deficiency")
{
    Rng rng(53);
    std::vector<CMat> h{oracle::random_complex(rng, 2, 4), oracle::random_complex(rng, 2, 4),
                        oracle::random_complex(rng, 2, 4)};
    CHECK_THROWS_AS(naive_zf(h, 2), std::invalid_argument);  // K D = 6 > M = 4
    CHECK_THROWS_AS(naive_zf(std::vector<CMat>{}, 1), std::invalid_argument);
    std::vector<CMat> same{h[0], h[0]};
    const ZfResult zf = naive_zf(same, 2);
    CHECK(zf.rank_deficient);
    CHECK_FALSE(zf.warning.empty());
}

TEST_CASE("DFT tracking picks the aligned codeword and stays in its window")
{
    const BeamCodebook cb = BeamCodebook::dft(16);
    // Rank-one channel along codeword 6.
    const CMat h = CVec::Ones(2) * cb.codewords[6].adjoint();
    const DftAssignment global = dft_tracking(cb, -1, h, 2, 2);
    CHECK(global.indices[0] == 6);
    CHECK(global.beamformer.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((global.combiner.adjoint() * global.combiner - CMat::Identity(2, 2)).norm() < 1e-10);

    // A stale index far away cannot jump to codeword 6.
    const DftAssignment local = dft_tracking(cb, 12, h, 2, 2);
    for (int idx : local.indices)
    {
        const int dist = std::min((idx - 12 + 16) % 16, (12 - idx + 16) % 16);
        CHECK(dist <= 2);
    }
    // Window wraps around the codebook edge.
    const DftAssignment wrap = dft_tracking(cb, 0, h, 1, 2);
    for (int idx : wrap.indices)
        CHECK((idx == 15 || idx == 0 || idx == 1));
    CHECK_THROWS_AS(dft_tracking(cb, 16, h, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(dft_tracking(cb, 0, h, -1, 2), std::invalid_argument);
    CHECK_THROWS_AS(dft_tracking(cb, 0, h, 0, 2), std::invalid_argument);
}

TEST_CASE("perfect-CSI design is at least as good as its SVD start")
{
    Rng rng(54);
    std::vector<CMat> h{oracle::random_complex(rng, 2, 6), oracle::random_complex(rng, 2, 6)};
    std::vector<Vec> z{Vec::Constant(2, 0.5), Vec::Constant(2, -0.4)};
    const std::vector<double> w{1.0, 1.0};
    const LinkModel link = perfect_csi_bf(h, z, w, 0.5);
    CHECK(link.error_variance == 0.0);
    LinkModel start = link;
    initialize_from_svd(start);
    CHECK(weighted_sum_information(link, z, w) >= weighted_sum_information(start, z, w) - 1e-12);
    CHECK_THROWS_AS(perfect_csi_bf(h, std::vector<Vec>{z[0]}, w, 0.5), std::invalid_argument);
}
