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
#include "json.hpp"
#include "scenario.hpp"
#include "thzsim/episodes.hpp"
#include "thzsim/sim_harness.hpp"

#include <filesystem>
#include <fstream>
#include <string>

using namespace thzsim;
using nlohmann::json;

namespace {

ExperimentConfig tiny()
{
    ExperimentConfig c = preset_config("desk");
    c.users = {2};
    c.seeds = {7};
    c.steps = 3;
    return c;
}

std::string error_of(const ExperimentConfig& c)
{
    try
    {
        c.validate();
    }
    catch (const std::invalid_argument& e)
    {
        return e.what();
    }
    return {};
}

std::filesystem::path scratch(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("validation collects every violation in one error")
{
    ExperimentConfig c = tiny();
    CHECK(error_of(c).empty());
    c.semantic_dim = 3;
    c.causal.num_nodes = 2;
    c.causal.edge_probability = 1.5;
    c.mobility.min_distance = 20.0;
    c.pipeline.lambda = 1.2;
    c.pipeline.feasibility.restarts = -1;
    c.pipeline.feasibility.min_temperature = 1.0;
    c.users = {0};
    c.seeds.clear();
    c.steps = 0;
    c.dft_window = -1;
    const std::string e = error_of(c);
    for (const char* frag : {"num_nodes must be >= semantic_dim", "edge_probability", "min_distance", "pipeline.lambda",
                             "restarts >= 0", "min_temperature <= temperature", "every K must be >= 1",
                             "seeds must not be empty", "steps must be >= 1", "dft_window"})
        CHECK_MESSAGE(e.find(frag) != std::string::npos, frag);
}

TEST_CASE("validation rules on users, graph size and cooling")
{
    ExperimentConfig c = tiny();
    c.users = {9};  // K D = 18 > M = 16 for naive_zf on the desk array
    CHECK(error_of(c).find("naive_zf needs K * D <= M") != std::string::npos);
    c.schemes = {SchemeKind::proposed};
    CHECK(error_of(c).empty());
    c.causal.num_nodes = 7;
    CHECK(error_of(c).find("needs a trained model") != std::string::npos);
    c = tiny();
    c.pipeline.feasibility.cooling = 1.0;
    CHECK(error_of(c).find("cooling < 1") != std::string::npos);
    c = tiny();
    c.causal.intervention_targets = {{9}};
    CHECK(error_of(c).find("node 9 out of range") != std::string::npos);
}

TEST_CASE("config JSON round trip and key checking")
{
    ExperimentConfig c = preset_config("paper");
    c.pipeline.feasibility.restarts = 3;
    c.pipeline.feasibility.min_temperature = 0.001;
    c.users = {2, 4};
    const std::string text = config_to_json(c);
    const ExperimentConfig back = config_from_json(text, preset_config("desk"));
    CHECK(config_to_json(back) == text);
    CHECK(back.pipeline.feasibility.restarts == 3);

    json d = json::parse(text);
    d["pipeline"]["lamda"] = 0.5;
    d["bogus"] = 1;
    try
    {
        config_from_json(d.dump(), preset_config("desk"));
        FAIL("unknown keys accepted");
    }
    catch (const std::invalid_argument& e)
    {
        const std::string msg = e.what();
        CHECK(msg.find("pipeline.lamda: unknown key") != std::string::npos);
        CHECK(msg.find("bogus: unknown key") != std::string::npos);
    }
    CHECK_THROWS_AS(preset_config("lab"), std::invalid_argument);
}

TEST_CASE("partial config overrides only the given keys")
{
    const ExperimentConfig c = config_from_json(R"({"schema": "thzsim-config/v1", "steps": 9, "pipeline": {"beta": 0.25}})", preset_config("desk"));
    CHECK(c.steps == 9);
    CHECK(c.pipeline.beta == 0.25);
    CHECK(c.pipeline.lambda == preset_config("desk").pipeline.lambda);
}

TEST_CASE("seed_range is 1..N")
{
    CHECK(seed_range(3) == std::vector<std::uint64_t>{1, 2, 3});
    CHECK_THROWS_AS(seed_range(0), std::invalid_argument);
}

TEST_CASE("user channels do not depend on how many users share the cell")
{
    const ExperimentConfig c = tiny();
    const detail::ChannelScenario two(c, 2, 5), four(c, 4, 5);
    for (int t : {0, 3, 10})
        for (int k = 0; k < 2; ++k)
            CHECK((two.true_channel(k, t) - four.true_channel(k, t)).norm() == 0.0);
    const detail::ChannelScenario other(c, 2, 6);
    CHECK((two.true_channel(0, 0) - other.true_channel(0, 0)).norm() > 0.0);
    // 90 km/h over 4 us: J0(2 pi 25 kHz 4 us) at 300 GHz.
    CHECK(two.aging() > 0.0);
    CHECK(two.aging() < 1.0);
}

TEST_CASE("records per run and seed isolation")
{
    ExperimentConfig c = tiny();
    c.seeds = {3, 11};
    const auto both = run_experiment(c);
    // T K per-user rows plus T aggregates, per scheme and seed.
    CHECK(both.size() == c.schemes.size() * 2 * (3 * 2 + 3));
    c.seeds = {11};
    const auto single = run_experiment(c);
    std::vector<ExperimentRecord> from_both;
    for (const auto& r : both)
        if (r.seed == 11)
            from_both.push_back(r);
    CHECK(records_csv(single) == records_csv(from_both));
    for (const auto& r : both)
    {
        CHECK(r.semantic_reliability >= 0.0);
        CHECK(r.semantic_reliability <= 1.0);
        CHECK(r.distortion >= 0.0);
        if (r.user < 0)
            CHECK(r.min_semantic_information <= r.semantic_information + 1e-12);
    }
}

TEST_CASE("confidence intervals use the Student t quantile")
{
    const std::vector<double> one{0.42};
    const MetricSummary s1 = mean_ci95(one);
    CHECK(s1.mean == 0.42);
    CHECK(s1.ci95 == 0.0);
    std::vector<double> v(20);
    for (int i = 0; i < 20; ++i)
        v[static_cast<std::size_t>(i)] = i % 2 == 0 ? 1.0 : 3.0;
    // mean 2, sample sd sqrt(20/19), t_{0.975, 19} = 2.093024054408263.
    const MetricSummary s = mean_ci95(v);
    CHECK(s.mean == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s.ci95 == doctest::Approx(2.093024054408263 * std::sqrt(20.0 / 19.0) / std::sqrt(20.0)).epsilon(1e-12));
    CHECK_THROWS_AS(mean_ci95(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("summary averages per seed first and orders schemes by min information")
{
    std::vector<ExperimentRecord> recs;
    auto add = [&](SchemeKind s, std::uint64_t seed, int t, double minfo) {
        ExperimentRecord r;
        r.scheme = s;
        r.num_users = 2;
        r.seed = seed;
        r.t = t;
        r.min_semantic_information = minfo;
        r.semantic_information = 2.0 * minfo;
        recs.push_back(r);
        r.user = 0;  // per-user rows are ignored
        r.min_semantic_information = 100.0;
        recs.push_back(r);
    };
    add(SchemeKind::naive_zf, 1, 0, 0.1);
    add(SchemeKind::naive_zf, 1, 1, 0.3);
    add(SchemeKind::naive_zf, 2, 0, 0.5);
    add(SchemeKind::proposed, 1, 0, 0.9);
    add(SchemeKind::proposed, 2, 0, 0.7);
    const auto rows = summarize(recs);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].scheme == SchemeKind::proposed);
    CHECK(rows[1].num_seeds == 2);
    // Seed means 0.2 and 0.5, not the pooled 0.3.
    CHECK(rows[1].min_information.mean == doctest::Approx(0.35));
    CHECK(rows[0].information.mean == doctest::Approx(1.6));
}

TEST_CASE("outputs land in the requested directory")
{
    ExperimentConfig c = tiny();
    c.schemes = {SchemeKind::dft_tracking};
    const auto recs = run_experiment(c);
    const auto dir = scratch("thzsim_outputs_test");
    write_outputs(dir.string(), recs);
    std::ifstream f(dir / "records.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header.rfind("scheme,num_users,seed,t,user", 0) == 0);
    CHECK(std::filesystem::exists(dir / "summary.csv"));
    CHECK(std::filesystem::exists(dir / "summary.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("episodes/v1 export round trip")
{
    ExperimentConfig c = tiny();
    c.steps = 12;
    c.causal.intervened_environments = 2;
    c.causal.intervention_targets = {{1}, {0, 2}};
    const auto dir = scratch("thzsim_episodes_test");
    export_episodes(c, dir.string());
    const auto envs = load_episodes(dir.string());
    REQUIRE(envs.size() == 3);
    CHECK(envs[0].targets.empty());
    CHECK(envs[1].targets == std::vector<int>{1});
    CHECK(envs[2].targets == std::vector<int>{0, 2});
    for (const auto& e : envs)
    {
        CHECK(e.episode.observations.rows() == 12);
        CHECK(e.episode.observations.cols() == c.causal.num_nodes);
        CHECK(e.states.cols() == c.semantic_dim);
        REQUIRE(e.channels.size() == 12);
        REQUIRE(e.received.size() == 12);
        for (int t = 0; t < 12; ++t)
        {
            CHECK(e.states.row(t).norm() <= c.pipeline.z_max + 1e-12);
            CHECK(e.beams[static_cast<std::size_t>(t)].rows() == c.geometry.num_bs_antennas);
            const auto& flags = e.episode.interventions[static_cast<std::size_t>(t)];
            for (int j = 0; j < c.causal.num_nodes; ++j)
            {
                const bool target = std::find(e.targets.begin(), e.targets.end(), j) != e.targets.end();
                const int flag = flags.empty() ? 0 : flags[static_cast<std::size_t>(j)];
                // Flags mark the transition into t, so step 0 carries none.
                CHECK(flag == (t > 0 && target ? 1 : 0));
            }
        }
    }
    std::filesystem::remove_all(dir);

    c.causal.intervened_environments = 0;
    const auto single = scratch("thzsim_episodes_single");
    export_episodes(c, single.string());
    CHECK(load_episodes(single.string()).size() == 1);
    std::filesystem::remove_all(single);
    CHECK_THROWS_AS(load_episodes(single.string()), std::runtime_error);
}
