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

#include "thzsim/types.hpp"

#include <stdexcept>

namespace thzsim {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags)
{
    std::uint64_t h = splitmix64(seed);
    for (auto t : tags)
        h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
    return h;
}

Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags)
{
    return Rng(mix_seed(seed, tags));
}

// Box-Muller on the raw 53-bit uniforms keeps draws identical across standard
// library implementations (std::normal_distribution is unspecified).
double standard_normal(Rng& rng)
{
    constexpr double scale = 1.0 / 9007199254740992.0;
    double u1 = 0.0;
    while (u1 <= 0.0)
        u1 = static_cast<double>(rng() >> 11) * scale;
    const double u2 = static_cast<double>(rng() >> 11) * scale;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double uniform(Rng& rng, double lo, double hi)
{
    constexpr double scale = 1.0 / 9007199254740992.0;
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * scale;
}

CMat complex_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double variance)
{
    const double s = std::sqrt(0.5 * variance);
    CMat out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
        {
            const double re = standard_normal(rng);
            const double im = standard_normal(rng);
            out(r, c) = cd(s * re, s * im);
        }
    return out;
}

Vec real_normal(Rng& rng, Eigen::Index n, double variance)
{
    const double s = std::sqrt(variance);
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out(i) = s * standard_normal(rng);
    return out;
}

Mat stack_real_imag(const CMat& a)
{
    Mat out(2 * a.rows(), a.cols());
    out.topRows(a.rows()) = a.real();
    out.bottomRows(a.rows()) = a.imag();
    return out;
}

Mat realify_covariance(const CMat& c)
{
    const Eigen::Index n = c.rows();
    Mat out(2 * n, 2 * n);
    out.topLeftCorner(n, n) = c.real();
    out.topRightCorner(n, n) = -c.imag();
    out.bottomLeftCorner(n, n) = c.imag();
    out.bottomRightCorner(n, n) = c.real();
    return 0.5 * out;
}

double log_det_hpd(const CMat& a)
{
    Eigen::LLT<CMat> llt(hermitian_part(a));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("log_det_hpd: matrix is not positive definite");
    double acc = 0.0;
    const CMat& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i)
        acc += std::log(l(i, i).real());
    return 2.0 * acc;
}

double log_det_spd(const Mat& a)
{
    Eigen::LLT<Mat> llt(0.5 * (a + a.transpose()));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("log_det_spd: matrix is not positive definite");
    double acc = 0.0;
    const Mat& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i)
        acc += std::log(l(i, i));
    return 2.0 * acc;
}

}  // namespace thzsim
