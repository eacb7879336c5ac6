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

#pragma once

#include "thzsim/types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace thzsim {

/// Uniform linear arrays at both link ends.
struct ArrayGeometry
{
    int num_bs_antennas = 16;     ///< M
    int num_ue_antennas = 4;      ///< N
    double element_spacing = 0.5; ///< in wavelengths

    /// Throws std::invalid_argument when sizes are non-positive or smaller than
    /// the semantic dimension (pass 0 to skip that check).
    void validate(int semantic_dim = 0) const;
};

enum class ArraySide { tx, rx };

/// One propagation path. Angles in radians, delay relative to the sampling
/// reference in seconds, Doppler in Hz.
struct PathParams
{
    cd gain{0.0, 0.0};
    double aoa = 0.0;
    double aod = 0.0;
    double delay = 0.0;
    double doppler = 0.0;
};

/// Piecewise-constant molecular absorption coefficient over frequency.
/// Each entry is (upper band edge in Hz, kappa in 1/m); the last entry covers
/// everything above.
struct AbsorptionTable
{
    std::vector<std::pair<double, double>> entries{{300e9, 0.0033}, {450e9, 0.0033}};

    double lookup(double frequency) const;
};

struct ThzLinkConfig
{
    double carrier_freq = 300e9;     // Hz
    double absorption_coeff = 0.0033; // 1/m
    double distance = 10.0;          // m
    double tx_gain = 10.0;           // linear amplitude factor (20 dBi)
    double rx_gain = 10.0;
    int num_nlos_paths = 2;
    double sample_period = 1e-9;     // s (1 GHz bandwidth)
    int num_taps = 4;
    int num_subcarriers = 64;
    double noise_variance = 3.1622776601683795e-11; // W (-75 dBm)
    double rolloff = 0.3;

    void validate() const;
};

struct ChannelRealization
{
    int time_index = 0;
    CMat true_channel;     ///< H (N x M)
    CMat estimate;         ///< H-hat (N x M)
    CMat error_covariance; ///< E[H~ H~^H] (N x N)
    double error_variance = 0.0; ///< per-element variance of H~
};

CVec steering_vector(const ArrayGeometry& geometry, double angle, ArraySide side);

/// Complex LOS gain c/(4 pi f r) exp(-kappa r / 2) exp(-j 2 pi f tau0) with
/// tau0 = r / c unless given explicitly.
cd los_gain(const ThzLinkConfig& cfg);
cd los_gain(const ThzLinkConfig& cfg, double los_delay);

/// Truncated raised-cosine pulse with p(0) = 1, support |t| <= 4 sample periods.
double raised_cosine_pulse(double t, double sample_period, double rolloff);

/// Delay-domain channel matrix at tap `tap` and absolute time `time` (seconds).
CMat generate_tap(const ThzLinkConfig& cfg, const ArrayGeometry& geometry,
                  std::span<const PathParams> paths, int tap, double time);

/// Frequency response at bin `subcarrier` of the tap sequence.
CMat subcarrier_channel(std::span<const CMat> taps, int subcarrier, int num_subcarriers);

/// Gauss-Markov aged pilot observation followed by an LMMSE estimate under an
/// i.i.d. prior with per-element variance `prior_variance` (<= 0 means use the
/// mean element power of `true_channel`).
ChannelRealization estimate_channel(const CMat& true_channel, double pilot_snr_db, double aging,
                                    Rng& rng, double prior_variance = -1.0);

/// Closed-form per-element error variance used by estimate_channel.
double estimation_error_variance(double prior_variance, double pilot_snr_db, double aging);

double mobility_to_doppler(double speed, double carrier_freq, double angle);

/// NLOS path draw: gains 15..25 dB below the LOS with uniform phase, angles
/// uniform in [-pi/3, pi/3], excess delay uniform in [0, max_excess_delay].
std::vector<PathParams> draw_nlos_paths(const ThzLinkConfig& cfg, cd los, Rng& rng,
                                        double max_excess_delay);

}  // namespace thzsim
