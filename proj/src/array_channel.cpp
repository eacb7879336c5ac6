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

#include "thzsim/array_channel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace thzsim {

void ArrayGeometry::validate(int semantic_dim) const
{
    if (num_bs_antennas < 1 || num_ue_antennas < 1)
        throw std::invalid_argument("ArrayGeometry: antenna counts must be positive");
    if (!(element_spacing > 0.0) || !std::isfinite(element_spacing))
        throw std::invalid_argument("ArrayGeometry: element spacing must be positive");
    if (semantic_dim > 0 && std::min(num_bs_antennas, num_ue_antennas) < semantic_dim)
        throw std::invalid_argument("ArrayGeometry: min(M, N) must be >= semantic dimension D = " +
                                    std::to_string(semantic_dim));
}

double AbsorptionTable::lookup(double frequency) const
{
    if (entries.empty())
        throw std::invalid_argument("AbsorptionTable: empty table");
    for (const auto& [edge, kappa] : entries)
        if (frequency <= edge)
            return kappa;
    return entries.back().second;
}

void ThzLinkConfig::validate() const
{
    if (!(carrier_freq > 0.0))
        throw std::invalid_argument("ThzLinkConfig: carrier frequency must be > 0");
    if (!(distance > 0.0))
        throw std::invalid_argument("ThzLinkConfig: distance must be > 0");
    if (!(absorption_coeff >= 0.0))
        throw std::invalid_argument("ThzLinkConfig: absorption coefficient must be >= 0");
    if (num_nlos_paths < 0 || num_nlos_paths > 5)
        throw std::invalid_argument("ThzLinkConfig: number of NLOS paths must be in [0, 5]");
    if (num_taps < 1 || num_subcarriers < 1)
        throw std::invalid_argument("ThzLinkConfig: taps and subcarriers must be >= 1");
    if (!(sample_period > 0.0) || !(noise_variance > 0.0))
        throw std::invalid_argument("ThzLinkConfig: sample period and noise variance must be > 0");
}

CVec steering_vector(const ArrayGeometry& geometry, double angle, ArraySide side)
{
    if (!std::isfinite(angle))
        throw std::invalid_argument("steering_vector: non-finite angle");
    const int n = side == ArraySide::tx ? geometry.num_bs_antennas : geometry.num_ue_antennas;
    const double phase = 2.0 * kPi * geometry.element_spacing * std::sin(angle);
    CVec a(n);
    for (int m = 0; m < n; ++m)
        a(m) = std::polar(1.0, phase * m);
    return a;
}

cd los_gain(const ThzLinkConfig& cfg)
{
    return los_gain(cfg, cfg.distance / kSpeedOfLight);
}

cd los_gain(const ThzLinkConfig& cfg, double los_delay)
{
    if (!(cfg.distance > 0.0))
        throw std::invalid_argument("los_gain: distance must be > 0");
    if (!(cfg.carrier_freq > 0.0))
        throw std::invalid_argument("los_gain: carrier frequency must be > 0");
    const double magnitude = kSpeedOfLight / (4.0 * kPi * cfg.carrier_freq * cfg.distance) *
                             std::exp(-0.5 * cfg.absorption_coeff * cfg.distance);
    const double phase = std::fmod(-2.0 * kPi * cfg.carrier_freq * los_delay, 2.0 * kPi);
    return std::polar(magnitude, phase);
}

double raised_cosine_pulse(double t, double sample_period, double rolloff)
{
    const double x = t / sample_period;
    if (std::abs(x) > 4.0)
        return 0.0;
    const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(kPi * x) / (kPi * x);
    const double denom = 1.0 - 4.0 * rolloff * rolloff * x * x;
    if (std::abs(denom) < 1e-10)
        return 0.25 * kPi * (rolloff > 0.0 ? std::sin(kPi / (2.0 * rolloff)) / (kPi / (2.0 * rolloff)) : 1.0);
    return sinc * std::cos(kPi * rolloff * x) / denom;
}

CMat generate_tap(const ThzLinkConfig& cfg, const ArrayGeometry& geometry,
                  std::span<const PathParams> paths, int tap, double time)
{
    if (paths.empty())
        throw std::invalid_argument("generate_tap: empty path list (path 0 must be the LOS)");
    CMat h = CMat::Zero(geometry.num_ue_antennas, geometry.num_bs_antennas);
    for (const auto& p : paths)
    {
        const double pulse = raised_cosine_pulse(tap * cfg.sample_period - p.delay, cfg.sample_period, cfg.rolloff);
        if (pulse == 0.0)
            continue;
        const cd coeff = p.gain * cfg.tx_gain * cfg.rx_gain * pulse *
                         std::polar(1.0, std::fmod(2.0 * kPi * p.doppler * time, 2.0 * kPi));
        h.noalias() += coeff * steering_vector(geometry, p.aoa, ArraySide::rx) *
                       steering_vector(geometry, p.aod, ArraySide::tx).transpose();
    }
    return h;
}

CMat subcarrier_channel(std::span<const CMat> taps, int subcarrier, int num_subcarriers)
{
    if (taps.empty())
        throw std::invalid_argument("subcarrier_channel: no taps");
    if (num_subcarriers < 1)
        throw std::invalid_argument("subcarrier_channel: num_subcarriers must be >= 1");
    CMat out = CMat::Zero(taps.front().rows(), taps.front().cols());
    for (std::size_t d = 0; d < taps.size(); ++d)
    {
        if (taps[d].rows() != out.rows() || taps[d].cols() != out.cols())
            throw std::invalid_argument("subcarrier_channel: tap shape mismatch");
        const double phase = -2.0 * kPi * static_cast<double>(subcarrier) * static_cast<double>(d) / num_subcarriers;
        out += std::polar(1.0, phase) * taps[d];
    }
    return out;
}

double estimation_error_variance(double prior_variance, double pilot_snr_db, double aging)
{
    const double pilot_noise = std::isinf(pilot_snr_db) ? 0.0 : prior_variance * std::pow(10.0, -pilot_snr_db / 10.0);
    if (prior_variance + pilot_noise <= 0.0)
        return 0.0;
    return prior_variance - aging * aging * prior_variance * prior_variance / (prior_variance + pilot_noise);
}

ChannelRealization estimate_channel(const CMat& true_channel, double pilot_snr_db, double aging,
                                    Rng& rng, double prior_variance)
{
    if (std::isnan(pilot_snr_db) || pilot_snr_db == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("estimate_channel: pilot SNR must be a number or +inf");
    if (!(aging >= 0.0 && aging <= 1.0))
        throw std::invalid_argument("estimate_channel: aging must lie in [0, 1]");

    const auto rows = true_channel.rows();
    const auto cols = true_channel.cols();
    const double sh2 = prior_variance > 0.0 ? prior_variance
                                            : true_channel.squaredNorm() / static_cast<double>(rows * cols);
    const double sp2 = std::isinf(pilot_snr_db) ? 0.0 : sh2 * std::pow(10.0, -pilot_snr_db / 10.0);

    // Draw both noise terms unconditionally so the stream position does not
    // depend on the parameters.
    const CMat innovation = complex_normal(rng, rows, cols, 1.0);
    const CMat pilot_noise = complex_normal(rng, rows, cols, 1.0);

    ChannelRealization out;
    out.true_channel = true_channel;
    if (sh2 + sp2 <= 0.0)
    {
        out.estimate = CMat::Zero(rows, cols);
        out.error_covariance = CMat::Zero(rows, rows);
        return out;
    }
    const CMat observation = aging * true_channel +
                             std::sqrt(std::max(0.0, 1.0 - aging * aging) * sh2) * innovation +
                             std::sqrt(sp2) * pilot_noise;
    const double gain = aging * sh2 / (sh2 + sp2);
    out.estimate = gain * observation;
    out.error_variance = std::max(0.0, estimation_error_variance(sh2, pilot_snr_db, aging));
    out.error_covariance = CMat::Identity(rows, rows) * (static_cast<double>(cols) * out.error_variance);
    return out;
}

double mobility_to_doppler(double speed, double carrier_freq, double angle)
{
    if (speed < 0.0)
        throw std::invalid_argument("mobility_to_doppler: speed must be >= 0");
    return carrier_freq * speed * std::cos(angle) / kSpeedOfLight;
}

std::vector<PathParams> draw_nlos_paths(const ThzLinkConfig& cfg, cd los, Rng& rng, double max_excess_delay)
{
    std::vector<PathParams> out;
    out.reserve(static_cast<std::size_t>(cfg.num_nlos_paths));
    for (int i = 0; i < cfg.num_nlos_paths; ++i)
    {
        PathParams p;
        const double drop_db = uniform(rng, 15.0, 25.0);
        const double psi = uniform(rng, 0.0, 2.0 * kPi);
        p.gain = los * std::pow(10.0, -drop_db / 20.0) * std::polar(1.0, psi);
        p.aoa = uniform(rng, -kPi / 3.0, kPi / 3.0);
        p.aod = uniform(rng, -kPi / 3.0, kPi / 3.0);
        p.delay = uniform(rng, 0.0, max_excess_delay);
        out.push_back(p);
    }
    return out;
}

}  // namespace thzsim
