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

#include "CLI11.hpp"
#include "thzsim/episodes.hpp"
#include "thzsim/model_io.hpp"
#include "thzsim/sim_harness.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

int run_learn(const std::string& data, const std::string& out, double edge_penalty, double intervention_penalty,
              int semantic_dim, int antennas)
{
    const auto envs = thzsim::load_episodes(data);
    std::vector<thzsim::Episode> episodes;
    for (const auto& e : envs)
        episodes.push_back(e.episode);
    const thzsim::LearnedModel learned = thzsim::learn_structure(episodes, {edge_penalty, intervention_penalty});
    thzsim::CausalModelBundle bundle = thzsim::default_model(learned.graph.num_nodes(), semantic_dim, antennas);
    bundle.graph = learned.graph;
    bundle.graph.beam_intervention_flags.assign(static_cast<std::size_t>(semantic_dim), 0);
    bundle.transition = learned.transition;
    thzsim::export_model(bundle, out);
    std::printf("learned %d edges over %d nodes (score %.6g) -> %s\n", learned.graph.num_edges(),
                learned.graph.num_nodes(), learned.score, out.c_str());
    return 0;
}

void print_summary(const std::vector<thzsim::SummaryRow>& rows)
{
    std::printf("%-13s %3s %5s  %-19s %-19s %-19s\n", "scheme", "K", "seeds", "reliability", "information",
                "min information");
    for (const auto& r : rows)
        std::printf("%-13s %3d %5d  %8.4f +- %-7.4f %8.4f +- %-7.4f %8.4f +- %-7.4f\n",
                    thzsim::scheme_name(r.scheme).c_str(), r.num_users, r.num_seeds, r.reliability.mean,
                    r.reliability.ci95, r.information.mean, r.information.ci95, r.min_information.mean,
                    r.min_information.ci95);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"thzsim: multi-user terahertz semantic beamforming simulator"};
    std::string config_path, schemes, users, preset = "desk", out_dir = "results", episodes_path;
    int seeds = 0, steps = 0;
    app.add_option("--config", config_path, "thzsim-config/v1 JSON file")->check(CLI::ExistingFile);
    app.add_option("--schemes", schemes, "comma list: proposed,perfect_csi,dft_tracking,naive_zf");
    app.add_option("--users", users, "comma list of user counts K");
    app.add_option("--seeds", seeds, "number of seeds (1..N)")->check(CLI::PositiveNumber);
    app.add_option("--steps", steps, "time steps T per seed")->check(CLI::PositiveNumber);
    app.add_option("--preset", preset, "base configuration")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--out", out_dir, "output directory for records.csv and summaries");
    app.add_option("--export-episodes", episodes_path, "write an episodes/v1 dataset here instead of running");

    auto* learn = app.add_subcommand("learn", "learn a cgm-model/v1 file from an episodes/v1 dataset");
    std::string data_dir, model_out;
    double edge_penalty = 1.0, intervention_penalty = 1.0;
    int semantic_dim = 2, antennas = 16;
    learn->add_option("--data", data_dir, "episodes/v1 directory")->required();
    learn->add_option("--out", model_out, "model file to write")->required();
    learn->add_option("--edge-penalty", edge_penalty, "per-edge penalty, times log(n)");
    learn->add_option("--intervention-penalty", intervention_penalty, "per-flag penalty, times log(n)");
    learn->add_option("--semantic-dim", semantic_dim, "leading nodes forming z");
    learn->add_option("--antennas", antennas, "M for the DFT codebook");

    auto* validate = app.add_subcommand("validate-model", "check a cgm-model/v1 file");
    std::string model_path;
    validate->add_option("model", model_path, "model file")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*learn)
            return run_learn(data_dir, model_out, edge_penalty, intervention_penalty, semantic_dim, antennas);
        if (*validate)
        {
            const auto b = thzsim::load_trained_model(model_path);
            std::printf("ok: %d nodes, %d edges, D = %d, codebook %s (%d x %d)\n", b.graph.num_nodes(),
                        b.graph.num_edges(), b.semantic_dim, b.codebook.id.c_str(), static_cast<int>(b.codebook.dim()),
                        b.codebook.size());
            return 0;
        }

        thzsim::ExperimentConfig config =
            config_path.empty() ? thzsim::preset_config(preset) : thzsim::load_config(config_path, preset);
        if (!schemes.empty())
        {
            config.schemes.clear();
            for (const auto& s : split_list(schemes))
                config.schemes.push_back(thzsim::parse_scheme(s));
        }
        if (!users.empty())
        {
            config.users.clear();
            for (const auto& s : split_list(users))
                config.users.push_back(std::stoi(s));
        }
        if (seeds > 0)
            config.seeds = thzsim::seed_range(seeds);
        if (steps > 0)
            config.steps = steps;
        config.validate();

        if (!episodes_path.empty())
        {
            thzsim::export_episodes(config, episodes_path);
            std::printf("wrote episodes/v1 dataset to %s\n", episodes_path.c_str());
            return 0;
        }
        const auto records = thzsim::run_experiment(config);
        thzsim::write_outputs(out_dir, records);
        print_summary(thzsim::summarize(records));
        std::printf("wrote %zu records to %s\n", records.size(), out_dir.c_str());
        return 0;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
