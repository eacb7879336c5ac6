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

#include "thzsim/sim_harness.hpp"

#include "scenario.hpp"
#include "thzsim/model_io.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include "json.hpp"
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace thzsim {
namespace {

using nlohmann::json;

constexpr std::uint64_t kTagWarmup = 0x7761726dULL;
constexpr std::uint64_t kTagEval = 0x6576616cULL;

std::string join(const std::vector<std::string>& errors)
{
    std::string out;
    for (const auto& e : errors)
        out += "\n  - " + e;
    return out;
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ------------------------------------------------------------- JSON overlay

class Overlay
{
public:
    std::vector<std::string> errors;

    // Reads the keys of `obj` listed in `known`, reporting unknown keys.
    void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> known)
    {
        if (!obj.is_object())
        {
            errors.push_back(where + ": expected an object");
            return;
        }
        std::set<std::string> allowed(known.begin(), known.end());
        for (const auto& [key, value] : obj.items())
            if (!allowed.count(key))
                errors.push_back(where + "." + key + ": unknown key");
    }

    template <class T>
    void get(const json& obj, const std::string& where, const char* key, T& out)
    {
        if (!obj.is_object() || !obj.contains(key))
            return;
        try
        {
            out = obj.at(key).get<T>();
        }
        catch (const json::exception& e)
        {
            errors.push_back(where + "." + key + ": " + e.what());
        }
    }
};

void read_config(const json& doc, ExperimentConfig& c, Overlay& o)
{
    o.check_keys(doc, "config",
                 {"schema", "link", "geometry", "semantic_dim", "mobility", "causal", "pipeline", "evaluation",
                  "tx_power", "pilot_snr_db", "dft_window", "schemes", "users", "seeds", "num_seeds", "steps"});
    if (!doc.is_object())
        return;
    if (!doc.contains("schema"))
        o.errors.push_back(std::string("config.schema: missing (expected \"") + kConfigSchema + "\")");
    else if (!doc["schema"].is_string() || doc["schema"].get<std::string>() != kConfigSchema)
        o.errors.push_back(std::string("config.schema: expected \"") + kConfigSchema + "\"");

    if (doc.contains("link"))
    {
        const json& j = doc["link"];
        o.check_keys(j, "link",
                     {"carrier_freq", "absorption_coeff", "tx_gain", "rx_gain", "num_nlos_paths", "sample_period",
                      "num_taps", "num_subcarriers", "noise_variance", "rolloff"});
        auto& l = c.link;
        o.get(j, "link", "carrier_freq", l.carrier_freq);
        o.get(j, "link", "absorption_coeff", l.absorption_coeff);
        o.get(j, "link", "tx_gain", l.tx_gain);
        o.get(j, "link", "rx_gain", l.rx_gain);
        o.get(j, "link", "num_nlos_paths", l.num_nlos_paths);
        o.get(j, "link", "sample_period", l.sample_period);
        o.get(j, "link", "num_taps", l.num_taps);
        o.get(j, "link", "num_subcarriers", l.num_subcarriers);
        o.get(j, "link", "noise_variance", l.noise_variance);
        o.get(j, "link", "rolloff", l.rolloff);
    }
    if (doc.contains("geometry"))
    {
        const json& j = doc["geometry"];
        o.check_keys(j, "geometry", {"num_bs_antennas", "num_ue_antennas", "element_spacing"});
        o.get(j, "geometry", "num_bs_antennas", c.geometry.num_bs_antennas);
        o.get(j, "geometry", "num_ue_antennas", c.geometry.num_ue_antennas);
        o.get(j, "geometry", "element_spacing", c.geometry.element_spacing);
    }
    o.get(doc, "config", "semantic_dim", c.semantic_dim);
    if (doc.contains("mobility"))
    {
        const json& j = doc["mobility"];
        o.check_keys(j, "mobility",
                     {"speed", "min_distance", "max_distance", "max_angle", "slot_duration", "uplink_delay"});
        auto& m = c.mobility;
        o.get(j, "mobility", "speed", m.speed);
        o.get(j, "mobility", "min_distance", m.min_distance);
        o.get(j, "mobility", "max_distance", m.max_distance);
        o.get(j, "mobility", "max_angle", m.max_angle);
        o.get(j, "mobility", "slot_duration", m.slot_duration);
        o.get(j, "mobility", "uplink_delay", m.uplink_delay);
    }
    if (doc.contains("causal"))
    {
        const json& j = doc["causal"];
        o.check_keys(j, "causal",
                     {"num_nodes", "edge_probability", "warmup_steps", "content_scale", "observation_variance",
                      "forgetting", "codeword_sharpness", "model_path", "intervened_environments",
                      "intervention_targets"});
        auto& m = c.causal;
        o.get(j, "causal", "num_nodes", m.num_nodes);
        o.get(j, "causal", "edge_probability", m.edge_probability);
        o.get(j, "causal", "warmup_steps", m.warmup_steps);
        o.get(j, "causal", "content_scale", m.content_scale);
        o.get(j, "causal", "observation_variance", m.observation_variance);
        o.get(j, "causal", "forgetting", m.forgetting);
        o.get(j, "causal", "codeword_sharpness", m.codeword_sharpness);
        o.get(j, "causal", "model_path", m.model_path);
        o.get(j, "causal", "intervened_environments", m.intervened_environments);
        o.get(j, "causal", "intervention_targets", m.intervention_targets);
    }
    if (doc.contains("pipeline"))
    {
        const json& j = doc["pipeline"];
        o.check_keys(j, "pipeline",
                     {"lambda", "beta", "distortion_threshold", "outage_tolerance", "z_max", "outer_rounds",
                      "max_outer", "alternating_tol", "max_iters", "temperature", "min_temperature", "cooling",
                      "stall_window", "polish_steps", "restarts", "bisection_relative_tol", "robust"});
        auto& p = c.pipeline;
        o.get(j, "pipeline", "lambda", p.lambda);
        o.get(j, "pipeline", "beta", p.beta);
        o.get(j, "pipeline", "distortion_threshold", p.thresholds.distortion_threshold);
        o.get(j, "pipeline", "outage_tolerance", p.thresholds.outage_tolerance);
        o.get(j, "pipeline", "z_max", p.z_max);
        o.get(j, "pipeline", "outer_rounds", p.outer_rounds);
        o.get(j, "pipeline", "max_outer", p.alternating.max_outer);
        o.get(j, "pipeline", "alternating_tol", p.alternating.tol);
        o.get(j, "pipeline", "max_iters", p.feasibility.max_iters);
        o.get(j, "pipeline", "temperature", p.feasibility.temperature);
        o.get(j, "pipeline", "min_temperature", p.feasibility.min_temperature);
        o.get(j, "pipeline", "cooling", p.feasibility.cooling);
        o.get(j, "pipeline", "stall_window", p.feasibility.stall_window);
        o.get(j, "pipeline", "polish_steps", p.feasibility.polish_steps);
        o.get(j, "pipeline", "restarts", p.feasibility.restarts);
        o.get(j, "pipeline", "bisection_relative_tol", p.bisection_relative_tol);
        o.get(j, "pipeline", "robust", p.robust);
    }
    if (doc.contains("evaluation"))
    {
        const json& j = doc["evaluation"];
        o.check_keys(j, "evaluation", {"noise_draws", "num_candidates"});
        o.get(j, "evaluation", "noise_draws", c.evaluation.noise_draws);
        o.get(j, "evaluation", "num_candidates", c.evaluation.num_candidates);
    }
    o.get(doc, "config", "tx_power", c.tx_power);
    o.get(doc, "config", "pilot_snr_db", c.pilot_snr_db);
    o.get(doc, "config", "dft_window", c.dft_window);
    if (doc.contains("schemes"))
    {
        std::vector<std::string> names;
        o.get(doc, "config", "schemes", names);
        c.schemes.clear();
        for (const auto& n : names)
        {
            try
            {
                c.schemes.push_back(parse_scheme(n));
            }
            catch (const std::invalid_argument& e)
            {
                o.errors.push_back(std::string("config.schemes: ") + e.what());
            }
        }
    }
    o.get(doc, "config", "users", c.users);
    if (doc.contains("seeds") && doc.contains("num_seeds"))
        o.errors.push_back("config: give either seeds or num_seeds, not both");
    o.get(doc, "config", "seeds", c.seeds);
    if (doc.contains("num_seeds"))
    {
        int n = 0;
        o.get(doc, "config", "num_seeds", n);
        if (n < 1)
            o.errors.push_back("config.num_seeds: must be >= 1");
        else
            c.seeds = seed_range(n);
    }
    o.get(doc, "config", "steps", c.steps);
}

// ------------------------------------------------------------- experiment

Vec clip_norm(const Vec& z, double cap)
{
    const double n = z.norm();
    return n > cap ? Vec(z * (cap / n)) : z;
}

CausalModelBundle build_bundle(const ExperimentConfig& config, const detail::CausalWorld& world, std::uint64_t seed)
{
    const int d = config.semantic_dim;
    const int m = config.geometry.num_bs_antennas;
    if (!config.causal.model_path.empty())
    {
        CausalModelBundle b = load_trained_model(config.causal.model_path);
        if (b.semantic_dim != d || b.graph.num_nodes() != config.causal.num_nodes || b.codebook.dim() != m)
            throw std::invalid_argument("run_experiment: model file " + config.causal.model_path +
                                        " does not match semantic_dim, num_nodes or M of the config");
        return b;
    }
    Rng rng = make_stream(seed, {kTagWarmup});
    const std::vector<Episode> warm{
        simulate_episode(world.graph, world.transition, config.causal.warmup_steps, {}, 0, rng)};
    LearnedModel learned = learn_structure(warm);
    CausalModelBundle b;
    b.graph = std::move(learned.graph);
    b.graph.beam_intervention_flags.assign(static_cast<std::size_t>(d), 0);
    b.transition = std::move(learned.transition);
    b.transition.observation_variance = config.causal.observation_variance;
    b.semantic_dim = d;
    b.codebook = BeamCodebook::dft(m);
    b.codeword_posterior = Mat::Constant(m, d, 1.0 / m);
    return b;
}

struct SchemeOutput
{
    std::vector<CMat> beamformers;
    std::vector<CMat> combiners;
    std::vector<Vec> states;
    int iterations = 0;
};

void run_cell(const ExperimentConfig& config, int num_users, std::uint64_t seed,
              std::vector<ExperimentRecord>& out)
{
    const int d = config.semantic_dim;
    const auto nk = static_cast<std::size_t>(num_users);
    const detail::CausalWorld world = detail::make_causal_world(config, seed);
    const CausalModelBundle bundle = build_bundle(config, world, seed);
    const detail::ChannelScenario scenario(config, num_users, seed);
    const double scale = scenario.normalization();
    const double cs = config.causal.content_scale;
    const double z_max = config.pipeline.z_max;
    const double obs_var = config.causal.observation_variance;

    std::vector<Episode> content;
    for (int k = 0; k < num_users; ++k)
        content.push_back(detail::user_content(world, seed, k, config.steps + 1, {}, 0));

    const PredictorOptions popt{config.causal.forgetting, config.causal.codeword_sharpness};
    std::vector<StaticPredictor> predictors;
    for (std::size_t k = 0; k < nk; ++k)
        predictors.emplace_back(bundle, popt);

    EvaluationOptions eval = config.evaluation;
    eval.thresholds = config.pipeline.thresholds;
    eval.z_max = z_max;

    PipelineConfig perfect_cfg = config.pipeline;
    perfect_cfg.lambda = 1.0;
    perfect_cfg.beta = 1.0;
    perfect_cfg.robust = false;

    std::vector<int> tracked(nk, -1);
    // Slot 0 is a pre-roll: it only feeds the predictors and the tracker.
    for (std::size_t k = 0; k < nk; ++k)
    {
        const ChannelRealization est = scenario.estimate(static_cast<int>(k), 0);
        tracked[k] = dft_tracking(bundle.codebook, -1, est.estimate, config.dft_window, d).indices.front();
        predictors[k].observe({content[k].observations.row(0).transpose(), est.estimate, {}});
    }

    for (int t = 1; t <= config.steps; ++t)
    {
        std::vector<CMat> h_true(nk), h_hat(nk);
        std::vector<Vec> z_content(nk);
        std::vector<UserContext> ctx(nk);
        std::vector<SemanticPrior> priors(nk);
        double error_variance = 0.0;
        for (std::size_t k = 0; k < nk; ++k)
        {
            const ChannelRealization est = scenario.estimate(static_cast<int>(k), t);
            h_true[k] = scale * est.true_channel;
            h_hat[k] = scale * est.estimate;
            error_variance = std::max(error_variance, scale * scale * est.error_variance);

            const PosteriorSnapshot snap = predictors[k].snapshot();
            ctx[k].channel_estimate = h_hat[k];
            ctx[k].z_tilde = clip_norm(snap.z_tilde / cs, z_max);
            ctx[k].z_covariance = (snap.z_covariance + obs_var * Mat::Identity(d, d)) / (cs * cs);
            const double beam_scale = 1.0 / std::sqrt(static_cast<double>(d));
            ctx[k].static_beam = beam_scale * snap.v_tilde;
            ctx[k].static_moments.mean = beam_scale * snap.moments.mean;
            for (const auto& c : snap.moments.column_covariance)
                ctx[k].static_moments.column_covariance.push_back(beam_scale * beam_scale * c);
            priors[k] = {ctx[k].z_tilde, ctx[k].z_covariance};
            z_content[k] = clip_norm(content[k].observations.row(t).head(d).transpose() / cs, z_max);
        }
        const std::uint64_t eval_seed =
            mix_seed(seed, {static_cast<std::uint64_t>(num_users), static_cast<std::uint64_t>(t), kTagEval});

        for (SchemeKind scheme : config.schemes)
        {
            const auto start = std::chrono::steady_clock::now();
            SchemeOutput so;
            switch (scheme)
            {
            case SchemeKind::proposed:
            {
                PipelineResult r = full_pipeline_step(ctx, error_variance, 1.0, config.pipeline);
                so = {std::move(r.beamformers), std::move(r.combiners), std::move(r.states), r.iterations};
                break;
            }
            case SchemeKind::perfect_csi:
            {
                std::vector<UserContext> exact = ctx;
                for (std::size_t k = 0; k < nk; ++k)
                    exact[k].channel_estimate = h_true[k];
                PipelineResult r = full_pipeline_step(exact, 0.0, 1.0, perfect_cfg);
                so = {std::move(r.beamformers), std::move(r.combiners), std::move(r.states), r.iterations};
                break;
            }
            case SchemeKind::dft_tracking:
                for (std::size_t k = 0; k < nk; ++k)
                {
                    DftAssignment a = dft_tracking(bundle.codebook, tracked[k], h_hat[k], config.dft_window, d);
                    tracked[k] = a.indices.front();
                    so.beamformers.push_back(std::move(a.beamformer));
                    so.combiners.push_back(std::move(a.combiner));
                }
                so.states = z_content;
                break;
            case SchemeKind::naive_zf:
            {
                ZfResult zf = naive_zf(h_hat, d);
                so.beamformers = std::move(zf.beamformers);
                so.combiners = std::move(zf.combiners);
                so.states = z_content;
                break;
            }
            }
            const std::vector<UserMetrics> metrics = evaluate_transmission(
                h_true, so.beamformers, so.combiners, so.states, priors, 1.0, eval, eval_seed);
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            ExperimentRecord agg;
            agg.scheme = scheme;
            agg.num_users = num_users;
            agg.seed = seed;
            agg.t = t;
            agg.iterations = so.iterations;
            agg.wall_time = wall;
            agg.min_semantic_information = metrics.front().semantic_information;
            for (std::size_t k = 0; k < nk; ++k)
            {
                ExperimentRecord r = agg;
                r.user = static_cast<int>(k);
                r.semantic_information = r.min_semantic_information = metrics[k].semantic_information;
                r.semantic_reliability = metrics[k].reliability;
                r.distortion = metrics[k].distortion;
                out.push_back(r);
                agg.semantic_information += metrics[k].semantic_information / num_users;
                agg.min_semantic_information = std::min(agg.min_semantic_information, metrics[k].semantic_information);
                agg.semantic_reliability += metrics[k].reliability / num_users;
                agg.distortion += metrics[k].distortion / num_users;
            }
            out.push_back(agg);
        }

        for (std::size_t k = 0; k < nk; ++k)
            predictors[k].observe({content[k].observations.row(t).transpose(), h_hat[k] / scale, {}});
    }
}

auto record_key(const ExperimentRecord& r)
{
    return std::make_tuple(static_cast<int>(r.scheme), r.num_users, r.seed, r.t, r.user);
}

}  // namespace

// ------------------------------------------------------------- config

void ExperimentConfig::validate() const
{
    std::vector<std::string> errors;
    auto guard = [&errors](auto&& fn) {
        try
        {
            fn();
        }
        catch (const std::invalid_argument& e)
        {
            errors.emplace_back(e.what());
        }
    };
    guard([&] { link.validate(); });
    guard([&] { geometry.validate(semantic_dim); });
    guard([&] { pipeline.thresholds.validate(); });
    if (semantic_dim < 1)
        errors.emplace_back("semantic_dim must be >= 1");
    if (causal.num_nodes < semantic_dim)
        errors.emplace_back("causal.num_nodes must be >= semantic_dim (z is the leading nodes)");
    if (causal.model_path.empty() && causal.num_nodes > 6)
        errors.emplace_back("causal.num_nodes > 6 needs a trained model (causal.model_path)");
    if (!(causal.edge_probability >= 0.0 && causal.edge_probability <= 1.0))
        errors.emplace_back("causal.edge_probability must lie in [0, 1]");
    if (causal.warmup_steps < 3)
        errors.emplace_back("causal.warmup_steps must be >= 3");
    if (!(causal.content_scale > 0.0))
        errors.emplace_back("causal.content_scale must be > 0");
    if (!(causal.observation_variance > 0.0))
        errors.emplace_back("causal.observation_variance must be > 0");
    if (!(causal.forgetting >= 0.0 && causal.forgetting <= 1.0))
        errors.emplace_back("causal.forgetting must lie in [0, 1]");
    if (!(causal.codeword_sharpness >= 0.0))
        errors.emplace_back("causal.codeword_sharpness must be >= 0");
    if (causal.intervened_environments < 0)
        errors.emplace_back("causal.intervened_environments must be >= 0");
    if (causal.intervened_environments > 0 && causal.intervention_targets.empty())
        errors.emplace_back("causal.intervention_targets must not be empty when environments are intervened");
    for (const auto& targets : causal.intervention_targets)
        for (int j : targets)
            if (j < 0 || j >= causal.num_nodes)
                errors.emplace_back("causal.intervention_targets: node " + std::to_string(j) + " out of range");
    const auto& m = mobility;
    if (!(m.speed >= 0.0))
        errors.emplace_back("mobility.speed must be >= 0");
    if (!(m.min_distance > 0.0 && m.max_distance >= m.min_distance))
        errors.emplace_back("mobility: need 0 < min_distance <= max_distance");
    if (!(m.max_angle >= 0.0 && m.max_angle < kPi / 2.0))
        errors.emplace_back("mobility.max_angle must lie in [0, pi/2)");
    if (!(m.slot_duration > 0.0) || !(m.uplink_delay >= 0.0))
        errors.emplace_back("mobility: slot_duration must be > 0 and uplink_delay >= 0");
    const auto& p = pipeline;
    if (!(p.lambda >= 0.0 && p.lambda <= 1.0) || !(p.beta >= 0.0 && p.beta <= 1.0))
        errors.emplace_back("pipeline.lambda and pipeline.beta must lie in [0, 1]");
    if (!(p.z_max > 0.0))
        errors.emplace_back("pipeline.z_max must be > 0");
    if (p.outer_rounds < 1 || p.alternating.max_outer < 1 || !(p.alternating.tol > 0.0))
        errors.emplace_back("pipeline: outer_rounds and max_outer must be >= 1, alternating_tol > 0");
    if (p.feasibility.max_iters < 1 || p.feasibility.stall_window < 1 || p.feasibility.polish_steps < 0 ||
        p.feasibility.restarts < 0 || !(p.feasibility.temperature > 0.0))
        errors.emplace_back(
            "pipeline: max_iters, stall_window >= 1, polish_steps, restarts >= 0, temperature > 0 required");
    if (!(p.feasibility.min_temperature > 0.0 && p.feasibility.min_temperature <= p.feasibility.temperature) ||
        !(p.feasibility.cooling > 0.0 && p.feasibility.cooling < 1.0))
        errors.emplace_back("pipeline: 0 < min_temperature <= temperature and 0 < cooling < 1 required");
    if (!(p.bisection_relative_tol > 0.0 && p.bisection_relative_tol < 1.0))
        errors.emplace_back("pipeline.bisection_relative_tol must lie in (0, 1)");
    if (evaluation.noise_draws < 1 || evaluation.num_candidates < 1)
        errors.emplace_back("evaluation: noise_draws and num_candidates must be >= 1");
    if (!(tx_power > 0.0) || !std::isfinite(tx_power))
        errors.emplace_back("tx_power must be a positive finite number");
    if (std::isnan(pilot_snr_db) || pilot_snr_db == -std::numeric_limits<double>::infinity())
        errors.emplace_back("pilot_snr_db must be a number or +inf");
    if (dft_window < 0)
        errors.emplace_back("dft_window must be >= 0");
    if (schemes.empty())
        errors.emplace_back("schemes must not be empty");
    if (users.empty())
        errors.emplace_back("users must not be empty");
    for (int k : users)
    {
        if (k < 1)
            errors.emplace_back("users: every K must be >= 1");
        else if (std::find(schemes.begin(), schemes.end(), SchemeKind::naive_zf) != schemes.end() &&
                 k * semantic_dim > geometry.num_bs_antennas)
            errors.emplace_back("users: naive_zf needs K * D <= M, violated by K = " + std::to_string(k));
    }
    if (seeds.empty())
        errors.emplace_back("seeds must not be empty");
    if (steps < 1)
        errors.emplace_back("steps must be >= 1");
    if (!errors.empty())
        throw std::invalid_argument("invalid experiment config:" + join(errors));
}

std::vector<std::uint64_t> seed_range(int count)
{
    if (count < 1)
        throw std::invalid_argument("seed_range: count must be >= 1");
    std::vector<std::uint64_t> s(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        s[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i + 1);
    return s;
}

ExperimentConfig preset_config(const std::string& name)
{
    ExperimentConfig c;
    c.seeds = seed_range(20);
    if (name == "desk")
        return c;
    if (name == "paper")
    {
        c.geometry.num_bs_antennas = 64;
        c.users = {2, 4, 6, 8};
        return c;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
    }
    Overlay o;
    read_config(doc, base, o);
    try
    {
        base.validate();
    }
    catch (const std::invalid_argument& e)
    {
        o.errors.emplace_back(e.what());
    }
    if (!o.errors.empty())
        throw std::invalid_argument("invalid experiment config:" + join(o.errors));
    return base;
}

ExperimentConfig load_config(const std::string& path, const std::string& preset)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str(), preset_config(preset));
}

std::string config_to_json(const ExperimentConfig& c)
{
    json j;
    j["schema"] = kConfigSchema;
    const auto& l = c.link;
    j["link"] = {{"carrier_freq", l.carrier_freq},     {"absorption_coeff", l.absorption_coeff},
                 {"tx_gain", l.tx_gain},               {"rx_gain", l.rx_gain},
                 {"num_nlos_paths", l.num_nlos_paths}, {"sample_period", l.sample_period},
                 {"num_taps", l.num_taps},             {"num_subcarriers", l.num_subcarriers},
                 {"noise_variance", l.noise_variance}, {"rolloff", l.rolloff}};
    j["geometry"] = {{"num_bs_antennas", c.geometry.num_bs_antennas},
                     {"num_ue_antennas", c.geometry.num_ue_antennas},
                     {"element_spacing", c.geometry.element_spacing}};
    j["semantic_dim"] = c.semantic_dim;
    const auto& m = c.mobility;
    j["mobility"] = {{"speed", m.speed},           {"min_distance", m.min_distance},
                     {"max_distance", m.max_distance}, {"max_angle", m.max_angle},
                     {"slot_duration", m.slot_duration}, {"uplink_delay", m.uplink_delay}};
    const auto& cc = c.causal;
    j["causal"] = {{"num_nodes", cc.num_nodes},
                   {"edge_probability", cc.edge_probability},
                   {"warmup_steps", cc.warmup_steps},
                   {"content_scale", cc.content_scale},
                   {"observation_variance", cc.observation_variance},
                   {"forgetting", cc.forgetting},
                   {"codeword_sharpness", cc.codeword_sharpness},
                   {"model_path", cc.model_path},
                   {"intervened_environments", cc.intervened_environments},
                   {"intervention_targets", cc.intervention_targets}};
    const auto& p = c.pipeline;
    j["pipeline"] = {{"lambda", p.lambda},
                     {"beta", p.beta},
                     {"distortion_threshold", p.thresholds.distortion_threshold},
                     {"outage_tolerance", p.thresholds.outage_tolerance},
                     {"z_max", p.z_max},
                     {"outer_rounds", p.outer_rounds},
                     {"max_outer", p.alternating.max_outer},
                     {"alternating_tol", p.alternating.tol},
                     {"max_iters", p.feasibility.max_iters},
                     {"temperature", p.feasibility.temperature},
                     {"min_temperature", p.feasibility.min_temperature},
                     {"cooling", p.feasibility.cooling},
                     {"stall_window", p.feasibility.stall_window},
                     {"polish_steps", p.feasibility.polish_steps},
                     {"restarts", p.feasibility.restarts},
                     {"bisection_relative_tol", p.bisection_relative_tol},
                     {"robust", p.robust}};
    j["evaluation"] = {{"noise_draws", c.evaluation.noise_draws}, {"num_candidates", c.evaluation.num_candidates}};
    j["tx_power"] = c.tx_power;
    j["pilot_snr_db"] = c.pilot_snr_db;
    j["dft_window"] = c.dft_window;
    std::vector<std::string> names;
    for (auto s : c.schemes)
        names.push_back(scheme_name(s));
    j["schemes"] = names;
    j["users"] = c.users;
    j["seeds"] = c.seeds;
    j["steps"] = c.steps;
    return j.dump(2);
}

// ------------------------------------------------------------- run

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config)
{
    config.validate();
    std::vector<ExperimentRecord> out;
    for (int k : config.users)
        for (std::uint64_t seed : config.seeds)
            run_cell(config, k, seed, out);
    std::stable_sort(out.begin(), out.end(),
                     [](const ExperimentRecord& a, const ExperimentRecord& b) { return record_key(a) < record_key(b); });
    return out;
}

std::string records_csv(std::span<const ExperimentRecord> records)
{
    std::string s = "scheme,num_users,seed,t,user,semantic_information,min_semantic_information,"
                    "semantic_reliability,distortion,iterations\n";
    for (const auto& r : records)
    {
        s += scheme_name(r.scheme) + "," + std::to_string(r.num_users) + "," + std::to_string(r.seed) + "," +
             std::to_string(r.t) + "," + (r.user < 0 ? std::string("all") : std::to_string(r.user)) + "," +
             fmt(r.semantic_information) + "," + fmt(r.min_semantic_information) + "," +
             fmt(r.semantic_reliability) + "," + fmt(r.distortion) + "," + std::to_string(r.iterations) + "\n";
    }
    return s;
}

std::string timing_csv(std::span<const ExperimentRecord> records)
{
    std::string s = "scheme,num_users,seed,t,wall_time_s\n";
    for (const auto& r : records)
        if (r.user < 0)
            s += scheme_name(r.scheme) + "," + std::to_string(r.num_users) + "," + std::to_string(r.seed) + "," +
                 std::to_string(r.t) + "," + fmt(r.wall_time) + "\n";
    return s;
}

// ------------------------------------------------------------- summary

MetricSummary mean_ci95(std::span<const double> values)
{
    MetricSummary m;
    if (values.empty())
        throw std::invalid_argument("mean_ci95: no values");
    const auto n = static_cast<double>(values.size());
    for (double v : values)
        m.mean += v / n;
    if (values.size() < 2)
        return m;
    double ss = 0.0;
    for (double v : values)
        ss += (v - m.mean) * (v - m.mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    m.ci95 = boost::math::quantile(dist, 0.975) * sd / std::sqrt(n);
    return m;
}

std::vector<SummaryRow> summarize(std::span<const ExperimentRecord> records)
{
    struct Acc
    {
        double rel = 0, info = 0, min_info = 0, dist = 0, iters = 0;
        int n = 0;
    };
    std::map<std::tuple<int, int, std::uint64_t>, Acc> per_seed;
    for (const auto& r : records)
    {
        if (r.user >= 0)
            continue;
        Acc& a = per_seed[{static_cast<int>(r.scheme), r.num_users, r.seed}];
        a.rel += r.semantic_reliability;
        a.info += r.semantic_information;
        a.min_info += r.min_semantic_information;
        a.dist += r.distortion;
        a.iters += r.iterations;
        ++a.n;
    }
    struct Cell
    {
        std::vector<double> rel, info, min_info, dist, iters;
    };
    std::map<std::pair<int, int>, Cell> cells;
    for (const auto& [key, a] : per_seed)
    {
        Cell& c = cells[{std::get<0>(key), std::get<1>(key)}];
        c.rel.push_back(a.rel / a.n);
        c.info.push_back(a.info / a.n);
        c.min_info.push_back(a.min_info / a.n);
        c.dist.push_back(a.dist / a.n);
        c.iters.push_back(a.iters / a.n);
    }
    std::vector<SummaryRow> rows;
    std::map<int, std::pair<double, int>> overall;
    for (const auto& [key, c] : cells)
    {
        SummaryRow r;
        r.scheme = static_cast<SchemeKind>(key.first);
        r.num_users = key.second;
        r.num_seeds = static_cast<int>(c.rel.size());
        r.reliability = mean_ci95(c.rel);
        r.information = mean_ci95(c.info);
        r.min_information = mean_ci95(c.min_info);
        r.distortion = mean_ci95(c.dist);
        r.iterations = mean_ci95(c.iters).mean;
        auto& o = overall[key.first];
        o.first += r.min_information.mean;
        ++o.second;
        rows.push_back(r);
    }
    std::stable_sort(rows.begin(), rows.end(), [&overall](const SummaryRow& a, const SummaryRow& b) {
        const auto& oa = overall[static_cast<int>(a.scheme)];
        const auto& ob = overall[static_cast<int>(b.scheme)];
        const double ma = oa.first / oa.second;
        const double mb = ob.first / ob.second;
        if (ma != mb)
            return ma > mb;
        if (a.scheme != b.scheme)
            return a.scheme < b.scheme;
        return a.num_users < b.num_users;
    });
    return rows;
}

std::string summary_csv(std::span<const SummaryRow> rows)
{
    std::string s = "scheme,num_users,num_seeds,reliability_mean,reliability_ci95,information_mean,information_ci95,"
                    "min_information_mean,min_information_ci95,distortion_mean,distortion_ci95,iterations_mean\n";
    for (const auto& r : rows)
        s += scheme_name(r.scheme) + "," + std::to_string(r.num_users) + "," + std::to_string(r.num_seeds) + "," +
             fmt(r.reliability.mean) + "," + fmt(r.reliability.ci95) + "," + fmt(r.information.mean) + "," +
             fmt(r.information.ci95) + "," + fmt(r.min_information.mean) + "," + fmt(r.min_information.ci95) + "," +
             fmt(r.distortion.mean) + "," + fmt(r.distortion.ci95) + "," + fmt(r.iterations) + "\n";
    return s;
}

std::string summary_json(std::span<const SummaryRow> rows)
{
    json arr = json::array();
    auto metric = [](const MetricSummary& m) { return json{{"mean", m.mean}, {"ci95", m.ci95}}; };
    for (const auto& r : rows)
        arr.push_back({{"scheme", scheme_name(r.scheme)},
                       {"num_users", r.num_users},
                       {"num_seeds", r.num_seeds},
                       {"semantic_reliability", metric(r.reliability)},
                       {"semantic_information", metric(r.information)},
                       {"min_semantic_information", metric(r.min_information)},
                       {"distortion", metric(r.distortion)},
                       {"iterations", r.iterations}});
    return arr.dump(2) + "\n";
}

void write_outputs(const std::string& dir, std::span<const ExperimentRecord> records)
{
    std::filesystem::create_directories(dir);
    const auto rows = summarize(records);
    const std::pair<const char*, std::string> files[] = {{"records.csv", records_csv(records)},
                                                         {"summary.csv", summary_csv(rows)},
                                                         {"summary.json", summary_json(rows)},
                                                         {"timing.csv", timing_csv(records)}};
    for (const auto& [name, body] : files)
    {
        const auto path = std::filesystem::path(dir) / name;
        std::ofstream f(path, std::ios::binary);
        f << body;
        if (!f)
            throw std::runtime_error("cannot write " + path.string());
    }
}

}  // namespace thzsim
