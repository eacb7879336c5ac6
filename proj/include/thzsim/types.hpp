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

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace thzsim {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 2.99792458e8;

using Rng = std::mt19937_64;

// Deterministic stream derivation: the same (seed, tags...) always yields the
// same generator, independent of how many other streams were created.
std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);
Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

double standard_normal(Rng& rng);
double uniform(Rng& rng, double lo, double hi);

// Circularly-symmetric complex Gaussian entries with E|x|^2 = variance.
CMat complex_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double variance = 1.0);
Vec real_normal(Rng& rng, Eigen::Index n, double variance = 1.0);

// Hermitian part (A + A^H)/2.
inline CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

// Real-composite embedding of a complex matrix acting on real vectors:
// [Re A; Im A] (2r x c).
Mat stack_real_imag(const CMat& a);

// Real covariance of [Re x; Im x] for circular x with covariance C.
Mat realify_covariance(const CMat& c);

// log det of a Hermitian positive definite matrix via Cholesky; throws when not PD.
double log_det_hpd(const CMat& a);
double log_det_spd(const Mat& a);

}  // namespace thzsim
