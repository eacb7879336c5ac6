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

#include "thzsim/episodes.hpp"

#include "json.hpp"
#include "scenario.hpp"

#include <bit>
#include <filesystem>
#include <map>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace thzsim {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "episodes/v1 blobs are little-endian");

constexpr std::uint64_t kTagReceive = 0x72656376ULL;

struct Blob
{
    std::string name;
    std::vector<std::size_t> shape;
    bool complex = false;
    std::vector<double> data;
};

void write_blob(const fs::path& root, const std::string& rel, const Blob& b)
{
    std::ofstream f(root / rel, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data.data()), static_cast<std::streamsize>(b.data.size() * sizeof(double)));
    if (!f)
        throw std::runtime_error("export_episodes: cannot write " + (root / rel).string());
}

std::vector<double> read_blob(const fs::path& path, std::size_t count)
{
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f)
        throw std::runtime_error("load_episodes: cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(f.tellg());
    if (bytes != count * sizeof(double))
        throw std::invalid_argument("load_episodes: " + path.string() + " has " + std::to_string(bytes) +
                                    " bytes, manifest implies " + std::to_string(count * sizeof(double)));
    std::vector<double> out(count);
    f.seekg(0);
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    return out;
}

Blob real_blob(std::string name, const Mat& m)
{
    Blob b{std::move(name), {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, false, {}};
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            b.data.push_back(m(i, j));
    return b;
}

// T x rows x cols x 2, row-major.
Blob complex_blob(std::string name, const std::vector<CMat>& seq)
{
    Blob b{std::move(name),
           {seq.size(), static_cast<std::size_t>(seq.front().rows()), static_cast<std::size_t>(seq.front().cols()), 2},
           true,
           {}};
    for (const auto& m : seq)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
            {
                b.data.push_back(m(i, j).real());
                b.data.push_back(m(i, j).imag());
            }
    return b;
}

Vec clip_norm(const Vec& z, double cap)
{
    const double n = z.norm();
    return n > cap ? Vec(z * (cap / n)) : z;
}

std::size_t product(const std::vector<std::size_t>& shape)
{
    std::size_t n = 1;
    for (auto s : shape)
        n *= s;
    return n;
}

}  // namespace

void export_episodes(const ExperimentConfig& config, const std::string& dir)
{
    config.validate();
    const std::uint64_t seed = config.seeds.front();
    const int d = config.semantic_dim;
    const int steps = config.steps;
    const detail::CausalWorld world = detail::make_causal_world(config, seed);
    const detail::ChannelScenario scenario(config, 1, seed);
    const double scale = scenario.normalization();
    const BeamCodebook codebook = BeamCodebook::dft(config.geometry.num_bs_antennas);

    const fs::path root(dir);
    fs::create_directories(root);
    json manifest;
    manifest["schema"] = kEpisodeSchema;
    manifest["num_nodes"] = config.causal.num_nodes;
    manifest["semantic_dim"] = d;
    manifest["steps"] = steps;
    manifest["seed"] = seed;
    manifest["layout"] = "row-major little-endian float64; complex arrays end in a (re, im) axis of length 2";
    manifest["environments"] = json::array();

    for (int env = 0; env <= config.causal.intervened_environments; ++env)
    {
        std::vector<int> targets;
        if (env > 0)
        {
            const auto& lists = config.causal.intervention_targets;
            targets = lists[std::min(static_cast<std::size_t>(env - 1), lists.size() - 1)];
        }
        const Episode ep = detail::user_content(world, seed, 0, steps, targets, env);

        Mat z(steps, d);
        Mat flags = Mat::Zero(steps, config.causal.num_nodes);
        std::vector<CMat> hs, vs, ys;
        Rng noise = make_stream(seed, {static_cast<std::uint64_t>(env), kTagReceive});
        int tracked = -1;
        for (int t = 0; t < steps; ++t)
        {
            const ChannelRealization est = scenario.estimate(0, t);
            const CMat h = scale * est.true_channel;
            const DftAssignment a = dft_tracking(codebook, tracked, scale * est.estimate, config.dft_window, d);
            tracked = a.indices.front();
            const Vec zt = clip_norm(ep.observations.row(t).head(d).transpose() / config.causal.content_scale,
                                     config.pipeline.z_max);
            z.row(t) = zt.transpose();
            for (std::size_t j = 0; j < ep.interventions[static_cast<std::size_t>(t)].size(); ++j)
                flags(t, static_cast<Eigen::Index>(j)) = ep.interventions[static_cast<std::size_t>(t)][j];
            hs.push_back(h);
            vs.push_back(a.beamformer);
            ys.push_back(h * a.beamformer * zt.cast<cd>() + complex_normal(noise, h.rows(), 1, 1.0));
        }

        const std::string sub = "env_" + std::to_string(env);
        fs::create_directories(root / sub);
        const std::vector<Blob> blobs{real_blob("X", ep.observations), real_blob("latent", ep.latent),
                                      real_blob("Z", z),               real_blob("interventions", flags),
                                      complex_blob("H", hs),           complex_blob("V", vs),
                                      complex_blob("Y", ys)};
        json arrays = json::array();
        for (const auto& b : blobs)
        {
            const std::string rel = sub + "/" + b.name + ".bin";
            write_blob(root, rel, b);
            arrays.push_back({{"name", b.name},
                              {"file", rel},
                              {"shape", b.shape},
                              {"dtype", "float64"},
                              {"layout", b.complex ? "complex" : "real"}});
        }
        manifest["environments"].push_back({{"environment", env}, {"targets", targets}, {"arrays", arrays}});
    }

    std::ofstream f(root / "manifest.json");
    f << manifest.dump(2) << "\n";
    if (!f)
        throw std::runtime_error("export_episodes: cannot write manifest in " + dir);
}

std::vector<EnvironmentEpisode> load_episodes(const std::string& dir)
{
    const fs::path root(dir);
    std::ifstream in(root / "manifest.json");
    if (!in)
        throw std::runtime_error("load_episodes: no manifest.json in " + dir);
    json m;
    try
    {
        in >> m;
    }
    catch (const json::exception& e)
    {
        throw std::invalid_argument(std::string("load_episodes: malformed manifest: ") + e.what());
    }
    if (m.value("schema", "") != kEpisodeSchema)
        throw std::invalid_argument(std::string("load_episodes: schema must be ") + kEpisodeSchema);

    std::vector<EnvironmentEpisode> out;
    try
    {
        for (const auto& env : m.at("environments"))
        {
            EnvironmentEpisode e;
            e.environment = env.at("environment").get<int>();
            e.targets = env.at("targets").get<std::vector<int>>();
            e.episode.environment = e.environment;
            std::map<std::string, Blob> blobs;
            for (const auto& a : env.at("arrays"))
            {
                Blob b;
                b.name = a.at("name").get<std::string>();
                b.shape = a.at("shape").get<std::vector<std::size_t>>();
                b.complex = a.at("layout").get<std::string>() == "complex";
                if (a.at("dtype").get<std::string>() != "float64")
                    throw std::invalid_argument("load_episodes: only float64 arrays are supported");
                if (b.complex ? b.shape.size() != 4 || b.shape[3] != 2 : b.shape.size() != 2)
                    throw std::invalid_argument("load_episodes: bad shape for array " + b.name);
                b.data = read_blob(root / a.at("file").get<std::string>(), product(b.shape));
                blobs[b.name] = std::move(b);
            }
            for (const char* need : {"X", "latent", "Z", "interventions", "H", "V", "Y"})
                if (!blobs.count(need))
                    throw std::invalid_argument(std::string("load_episodes: missing array ") + need);
            auto to_mat = [](const Blob& b) {
                Mat r(static_cast<Eigen::Index>(b.shape[0]), static_cast<Eigen::Index>(b.shape[1]));
                std::size_t i = 0;
                for (Eigen::Index a = 0; a < r.rows(); ++a)
                    for (Eigen::Index c = 0; c < r.cols(); ++c)
                        r(a, c) = b.data[i++];
                return r;
            };
            auto to_seq = [](const Blob& b) {
                std::vector<CMat> seq;
                std::size_t i = 0;
                for (std::size_t t = 0; t < b.shape[0]; ++t)
                {
                    CMat r(static_cast<Eigen::Index>(b.shape[1]), static_cast<Eigen::Index>(b.shape[2]));
                    for (Eigen::Index a = 0; a < r.rows(); ++a)
                        for (Eigen::Index c = 0; c < r.cols(); ++c, i += 2)
                            r(a, c) = cd(b.data[i], b.data[i + 1]);
                    seq.push_back(std::move(r));
                }
                return seq;
            };
            e.episode.observations = to_mat(blobs["X"]);
            e.episode.latent = to_mat(blobs["latent"]);
            e.states = to_mat(blobs["Z"]);
            const Mat flags = to_mat(blobs["interventions"]);
            const auto steps = static_cast<std::size_t>(e.episode.observations.rows());
            e.episode.interventions.assign(steps, {});
            for (std::size_t t = 0; t < steps; ++t)
            {
                const auto row = flags.row(static_cast<Eigen::Index>(t));
                if (row.cwiseAbs().sum() == 0.0)
                    continue;
                for (Eigen::Index j = 0; j < row.size(); ++j)
                    e.episode.interventions[t].push_back(static_cast<int>(row(j)));
            }
            e.channels = to_seq(blobs["H"]);
            e.beams = to_seq(blobs["V"]);
            for (auto& y : to_seq(blobs["Y"]))
                e.received.push_back(y.col(0));
            if (e.channels.size() != steps || e.beams.size() != steps || e.received.size() != steps ||
                static_cast<std::size_t>(e.states.rows()) != steps)
                throw std::invalid_argument("load_episodes: arrays of environment " + std::to_string(e.environment) +
                                            " disagree on the number of steps");
            out.push_back(std::move(e));
        }
    }
    catch (const json::exception& e)
    {
        throw std::invalid_argument(std::string("load_episodes: malformed manifest: ") + e.what());
    }
    return out;
}

}  // namespace thzsim
