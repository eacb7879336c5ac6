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

#include "thzsim/maxmin_semantics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace thzsim {
namespace {

// Re tr(A B) for square matrices.
double re_trace_prod(const CMat& a, const CMat& b) { return (a.transpose().array() * b.array()).sum().real(); }

CMat inverse_hpd(const CMat& a)
{
    Eigen::LLT<CMat> llt(hermitian_part(a));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("MaxMinProblem: covariance is not positive definite");
    return llt.solve(CMat::Identity(a.rows(), a.cols()));
}

// Orthonormal basis of D x D Hermitian matrices under Re tr(A^H B).
std::vector<CMat> hermitian_basis(int d)
{
    std::vector<CMat> out;
    const double s = 1.0 / std::sqrt(2.0);
    for (int r = 0; r < d; ++r)
    {
        CMat e = CMat::Zero(d, d);
        e(r, r) = 1.0;
        out.push_back(e);
        for (int c = r + 1; c < d; ++c)
        {
            CMat re = CMat::Zero(d, d);
            re(r, c) = s;
            re(c, r) = s;
            out.push_back(re);
            CMat im = CMat::Zero(d, d);
            im(r, c) = cd(0.0, s);
            im(c, r) = cd(0.0, -s);
            out.push_back(im);
        }
    }
    return out;
}

// Euclidean projection of x onto {y >= 0, sum y <= cap}.
Vec project_capped_simplex(const Vec& x, double cap)
{
    Vec y = x.cwiseMax(0.0);
    if (y.sum() <= cap)
        return y;
    std::vector<double> u(x.data(), x.data() + x.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j)
    {
        cumulative += u[j];
        const double t = (cumulative - cap) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0)
            theta = t;
    }
    return (x.array() - theta).cwiseMax(0.0);
}

Vec principal_direction(const Mat& z, double& top, double& trace)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (z + z.transpose()));
    const auto d = z.rows();
    top = std::max(0.0, es.eigenvalues()(d - 1));
    trace = std::max(0.0, es.eigenvalues().cwiseMax(0.0).sum());
    Vec v = es.eigenvectors().col(d - 1);
    for (Eigen::Index i = 0; i < d; ++i)
        if (std::abs(v(i)) > 1e-12)
        {
            if (v(i) < 0.0)
                v = -v;
            break;
        }
    return v;
}

std::vector<Mat> lift(std::span<const Vec> states)
{
    std::vector<Mat> out;
    out.reserve(states.size());
    for (const auto& z : states)
        out.emplace_back(z * z.transpose());
    return out;
}

}  // namespace

MaxMinProblem::MaxMinProblem(const LiftedCovarianceModel& model, std::vector<double> weights,
                             SemanticThresholds thresholds, double z_max, bool enforce_chance)
    : model_(&model), weights_(std::move(weights)), thresholds_(thresholds), z_max_(z_max),
      enforce_chance_(enforce_chance)
{
    if (static_cast<int>(weights_.size()) != model.num_users())
        throw std::invalid_argument("MaxMinProblem: one weight per user required");
    for (double w : weights_)
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("MaxMinProblem: weights must be finite and non-negative");
    if (!(z_max > 0.0))
        throw std::invalid_argument("MaxMinProblem: z_max must be > 0");
    thresholds_.validate();
    info_scale_ = std::max(upper_bound(), 1e-12);
}

double MaxMinProblem::prior_variance() const { return z_max_ * z_max_ / static_cast<double>(dim()); }

double MaxMinProblem::information(int k, std::span<const Mat> lifted) const
{
    return weights_[static_cast<std::size_t>(k)] * log_det_ratio(model_->evaluate(k, lifted));
}

double MaxMinProblem::chance_margin(int k, std::span<const Mat> lifted) const
{
    const CMat rbar = model_->interference(k, lifted);
    const LmmseDecoder dec(model_->effective_channel(k), rbar, prior_variance());
    const auto [mu, sd] = dec.distortion_moments_lifted(lifted[static_cast<std::size_t>(k)]);
    return thresholds_.distortion_threshold - mu - cantelli_factor(thresholds_.outage_tolerance) * sd;
}

bool MaxMinProblem::satisfies(std::span<const Vec> states, double alpha, double slack) const
{
    const auto lifted = lift(states);
    for (int k = 0; k < num_users(); ++k)
    {
        if (states[static_cast<std::size_t>(k)].norm() > z_max_ * (1.0 + 1e-12))
            return false;
        if (information(k, lifted) < alpha - slack)
            return false;
        if (enforce_chance_ && chance_margin(k, lifted) < -slack)
            return false;
    }
    return true;
}

double MaxMinProblem::min_information(std::span<const Vec> states) const
{
    const auto lifted = lift(states);
    double m = std::numeric_limits<double>::infinity();
    for (int k = 0; k < num_users(); ++k)
        m = std::min(m, information(k, lifted));
    return m;
}

std::vector<double> MaxMinProblem::isolated_bounds() const
{
    const int d = dim();
    std::vector<double> out;
    for (int k = 0; k < num_users(); ++k)
    {
        const CMat& noise = model_->noise(k);
        CMat total = noise;
        for (int a = 0; a < d; ++a)
            total += z_max_ * z_max_ * model_->basis(k, k, a, a, true);
        const double ld = log_det_hpd(total) - log_det_hpd(noise);
        out.push_back(weights_[static_cast<std::size_t>(k)] * std::max(0.0, ld));
    }
    return out;
}

double MaxMinProblem::upper_bound() const
{
    const auto b = isolated_bounds();
    return 1.1 * *std::max_element(b.begin(), b.end());
}

void MaxMinProblem::margins(std::span<const Mat> lifted, double alpha, std::vector<double>& out,
                            std::vector<std::vector<Mat>>* grads) const
{
    const int nk = num_users();
    const int d = dim();
    out.clear();
    if (grads)
        grads->clear();

    for (int k = 0; k < nk; ++k)
    {
        const CovariancePair cov = model_->evaluate(k, lifted);
        const double w = weights_[static_cast<std::size_t>(k)];
        const double f = w * (log_det_hpd(cov.signal_plus_interference) - log_det_hpd(cov.interference));
        out.push_back((f - alpha) / info_scale_);
        if (!grads)
            continue;
        const CMat rinv = inverse_hpd(cov.signal_plus_interference);
        const CMat rbinv = inverse_hpd(cov.interference);
        std::vector<Mat> g(static_cast<std::size_t>(nk), Mat::Zero(d, d));
        for (int i = 0; i < nk; ++i)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                {
                    const CMat& coh = model_->basis(k, i, a, b, true);
                    const CMat& err = model_->basis(k, i, a, b, false);
                    double v = re_trace_prod(rinv, coh) + re_trace_prod(rinv - rbinv, err);
                    if (i != k)
                        v -= re_trace_prod(rbinv, coh);
                    g[static_cast<std::size_t>(i)](a, b) = w * v / info_scale_;
                }
        grads->push_back(std::move(g));
    }

    if (!enforce_chance_)
        return;

    const double delta = thresholds_.distortion_threshold;
    const double cf = cantelli_factor(thresholds_.outage_tolerance);
    const double pv = prior_variance();
    const auto basis = hermitian_basis(d);
    for (int k = 0; k < nk; ++k)
    {
        const auto ku = static_cast<std::size_t>(k);
        const CMat rbar = model_->interference(k, lifted);
        const CMat& g_eff = model_->effective_channel(k);
        const Mat& zk = lifted[ku];
        auto margin_at = [&](const CMat& r) {
            const LmmseDecoder dec(g_eff, r, pv);
            const auto [mu, sd] = dec.distortion_moments_lifted(zk);
            return delta - mu - cf * sd;
        };
        const LmmseDecoder dec(g_eff, rbar, pv);
        const auto [mu, sd] = dec.distortion_moments_lifted(zk);
        out.push_back((delta - mu - cf * sd) / delta);
        if (!grads)
            continue;

        const Mat& f = dec.bias_map();
        const Mat& c = dec.output_noise();
        std::vector<Mat> g(static_cast<std::size_t>(nk), Mat::Zero(d, d));
        g[ku] = -(f.transpose() * f) - (cf * 2.0 / std::max(sd, 1e-300)) * (f.transpose() * c * f);

        // Sensitivity to the interference covariance by central differences.
        const double h = 1e-6 * std::max(1.0, rbar.norm());
        CMat gamma = CMat::Zero(d, d);
        for (const auto& p : basis)
            gamma += ((margin_at(rbar + h * p) - margin_at(rbar - h * p)) / (2.0 * h)) * p;
        for (int i = 0; i < nk; ++i)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                {
                    double v = re_trace_prod(gamma, model_->basis(k, i, a, b, false));
                    if (i != k)
                        v += re_trace_prod(gamma, model_->basis(k, i, a, b, true));
                    g[static_cast<std::size_t>(i)](a, b) += v;
                }
        for (auto& m : g)
            m /= delta;
        grads->push_back(std::move(g));
    }
}

double MaxMinProblem::soft_min(std::span<const Mat> lifted, double alpha, double temperature,
                               std::vector<Mat>* grad, double* hard_min) const
{
    std::vector<double> m;
    std::vector<std::vector<Mat>> g;
    margins(lifted, alpha, m, grad ? &g : nullptr);
    const double lo = *std::min_element(m.begin(), m.end());
    if (hard_min)
        *hard_min = lo;
    std::vector<double> pi(m.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j)
    {
        pi[j] = std::exp(-(m[j] - lo) / temperature);
        sum += pi[j];
    }
    if (grad)
    {
        const int d = dim();
        grad->assign(static_cast<std::size_t>(num_users()), Mat::Zero(d, d));
        for (std::size_t j = 0; j < m.size(); ++j)
            for (std::size_t i = 0; i < grad->size(); ++i)
                (*grad)[i] += (pi[j] / sum) * g[j][i];
        for (auto& x : *grad)
            x = 0.5 * (x + x.transpose()).eval();
    }
    return lo - temperature * std::log(sum);
}

double MaxMinProblem::min_margin(std::span<const Mat> lifted, double alpha) const
{
    std::vector<double> m;
    margins(lifted, alpha, m, nullptr);
    return *std::min_element(m.begin(), m.end());
}

Mat project_trace_psd(const Mat& z, double cap)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (z + z.transpose()));
    const Vec lam = project_capped_simplex(es.eigenvalues(), cap);
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

std::vector<Mat> step_lifted(const std::vector<Mat>& x, const std::vector<Mat>& g, double eta, double cap)
{
    std::vector<Mat> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = project_trace_psd(x[i] + eta * g[i], cap);
    return out;
}

double flat_norm(const std::vector<Mat>& x)
{
    double s = 0.0;
    for (const auto& m : x)
        s += m.squaredNorm();
    return std::sqrt(s);
}

// Lipschitz estimate of the soft-min gradient by power iteration on gradient differences.
double estimate_lipschitz(const MaxMinProblem& problem, const std::vector<Mat>& x, double alpha, double temperature)
{
    const int d = problem.dim();
    std::vector<Mat> g0;
    problem.soft_min(x, alpha, temperature, &g0);
    std::vector<Mat> u(x.size(), Mat::Identity(d, d));
    double nu = flat_norm(u);
    for (auto& m : u)
        m /= nu;
    const double h = 1e-4 * problem.z_max() * problem.z_max();
    double lip = 1e-12;
    for (int it = 0; it < 6; ++it)
    {
        std::vector<Mat> xp(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            xp[i] = x[i] + h * u[i];
        std::vector<Mat> g1;
        problem.soft_min(xp, alpha, temperature, &g1);
        for (std::size_t i = 0; i < x.size(); ++i)
            u[i] = (g1[i] - g0[i]) / h;
        nu = flat_norm(u);
        if (!(nu > 0.0) || !std::isfinite(nu))
            break;
        lip = std::max(lip, nu);
        for (auto& m : u)
            m /= nu;
    }
    return lip;
}

// Rank-one candidates from the relaxed point, then gradient polishing in z.
bool extract_rank_one(const MaxMinProblem& problem, const std::vector<Mat>& lifted, double alpha,
                      const FeasibilityOptions& options, double temperature, std::vector<Vec>& states)
{
    const std::size_t nk = lifted.size();
    std::vector<Vec> top(nk), full(nk);
    for (std::size_t k = 0; k < nk; ++k)
    {
        double lam = 0.0, tr = 0.0;
        const Vec v = principal_direction(lifted[k], lam, tr);
        top[k] = std::sqrt(lam) * v;
        full[k] = std::min(std::sqrt(tr), problem.z_max()) * v;
    }
    if (problem.satisfies(top, alpha))
    {
        states = top;
        return true;
    }
    if (problem.satisfies(full, alpha))
    {
        states = full;
        return true;
    }

    auto value = [&](const std::vector<Vec>& z, std::vector<Mat>* g) {
        const auto lz = lift(z);
        return problem.soft_min(lz, alpha, temperature, g);
    };
    std::vector<Vec> z = value(top, nullptr) >= value(full, nullptr) ? top : full;
    std::vector<Mat> g;
    double cur = value(z, &g);
    double eta = 0.1 * problem.z_max();
    for (int it = 0; it < options.polish_steps; ++it)
    {
        std::vector<Vec> gz(nk);
        double gnorm = 0.0;
        for (std::size_t k = 0; k < nk; ++k)
        {
            gz[k] = 2.0 * g[k] * z[k];
            gnorm += gz[k].squaredNorm();
        }
        gnorm = std::sqrt(gnorm);
        if (!(gnorm > 0.0))
            break;
        bool moved = false;
        for (int bt = 0; bt < 20; ++bt)
        {
            std::vector<Vec> cand(nk);
            for (std::size_t k = 0; k < nk; ++k)
            {
                cand[k] = z[k] + (eta / gnorm) * gz[k];
                const double n = cand[k].norm();
                if (n > problem.z_max())
                    cand[k] *= problem.z_max() / n;
            }
            std::vector<Mat> gc;
            const double v = value(cand, &gc);
            if (v > cur)
            {
                z = std::move(cand);
                g = std::move(gc);
                cur = v;
                moved = true;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
        }
        if (problem.satisfies(z, alpha))
        {
            states = z;
            return true;
        }
        if (!moved)
            break;
    }
    return false;
}

// Projected soft-min ascent from x0 with temperature continuation: the soft-min
// sits up to T log(#margins) below the hard minimum and its maximizer balances
// margins instead of lifting the smallest, so each stall cools T until
// min_temperature. On success fills the witness and returns true; otherwise
// leaves the final relaxed point in res.lifted.
bool ascend(const MaxMinProblem& problem, std::vector<Mat> x, double alpha, const FeasibilityOptions& options,
            FeasibilityResult& res)
{
    const double cap = problem.z_max() * problem.z_max();
    double temp = options.temperature;
    double eta = 1.0 / estimate_lipschitz(problem, x, alpha, temp);
    int budget = options.max_iters;

    while (true)
    {
        std::vector<Mat> g;
        double cur_min = 0.0;
        double cur = problem.soft_min(x, alpha, temp, &g, &cur_min);
        double best = cur;
        int since_best = 0;
        bool stalled = false;
        for (; budget > 0; --budget)
        {
            ++res.iterations;
            if (cur_min >= 0.0 && extract_rank_one(problem, x, alpha, options, temp, res.states))
                break;
            bool accepted = false;
            for (int bt = 0; bt < 30; ++bt)
            {
                auto cand = step_lifted(x, g, eta, cap);
                // Gradients only for accepted steps; rejected ones need the value alone.
                double cand_min = 0.0;
                const double v = problem.soft_min(cand, alpha, temp, nullptr, &cand_min);
                if (v >= cur)
                {
                    x = std::move(cand);
                    problem.soft_min(x, alpha, temp, &g);
                    cur = v;
                    cur_min = cand_min;
                    accepted = true;
                    eta *= 1.25;
                    break;
                }
                eta *= 0.5;
            }
            if (!accepted)
            {
                stalled = true;
                break;
            }
            // Stalled: less than a small fraction of T gained over the last window.
            if (++since_best >= options.stall_window)
            {
                if (cur - best < 0.05 * temp)
                {
                    stalled = true;
                    break;
                }
                best = cur;
                since_best = 0;
            }
        }
        if (!res.states.empty() || !stalled || budget <= 0 || temp <= options.min_temperature)
            break;
        temp = std::max(options.min_temperature, temp * options.cooling);
    }

    res.lifted = x;
    if (!res.states.empty() || extract_rank_one(problem, x, alpha, options, temp, res.states))
    {
        res.feasible = true;
        res.min_margin = problem.min_margin(lift(res.states), alpha);
        return true;
    }
    return false;
}

}  // namespace

FeasibilityResult feasibility(const MaxMinProblem& problem, double alpha, const FeasibilityOptions& options,
                              const std::vector<Mat>* warm_start)
{
    if (!std::isfinite(alpha))
        throw std::invalid_argument("feasibility: alpha must be finite");
    const int nk = problem.num_users();
    const int d = problem.dim();
    const double cap = problem.z_max() * problem.z_max();

    FeasibilityResult res;
    const auto bounds = problem.isolated_bounds();
    if (alpha > *std::min_element(bounds.begin(), bounds.end()))
    {
        res.certified = true;
        res.min_margin = -std::numeric_limits<double>::infinity();
        return res;
    }

    std::vector<std::vector<Mat>> starts;
    if (warm_start && static_cast<int>(warm_start->size()) == nk)
    {
        std::vector<Mat> w;
        for (const auto& m : *warm_start)
            w.push_back(project_trace_psd(m, cap));
        starts.push_back(std::move(w));
    }
    starts.emplace_back(static_cast<std::size_t>(nk), Mat::Identity(d, d) * (cap / (2.0 * d)));
    // The problem is nonconvex in the lifted variables, and a tight distortion
    // constraint can leave the isotropic start in a poor basin. Extra starts are
    // rank-one points with random directions and powers from a fixed stream, so
    // the result stays a deterministic function of the inputs.
    Rng rng(0x6d61786d696eULL);
    for (int r = 0; r < options.restarts; ++r)
    {
        std::vector<Mat> x0;
        for (int k = 0; k < nk; ++k)
        {
            Vec v = real_normal(rng, d);
            v *= std::sqrt(cap * uniform(rng, 0.05, 1.0)) / v.norm();
            x0.push_back(v * v.transpose());
        }
        starts.push_back(std::move(x0));
    }

    for (const auto& x0 : starts)
    {
        if (ascend(problem, x0, alpha, options, res))
            return res;
    }
    res.states.clear();
    res.min_margin = problem.min_margin(res.lifted, alpha);
    res.warning = res.iterations >= options.max_iters ? "feasibility: iteration limit reached without a witness"
                                                       : "feasibility: ascent stalled without a witness";
    return res;
}

int bisection_iterations(double lo, double hi, double tol)
{
    if (!(tol > 0.0))
        throw std::invalid_argument("bisection_iterations: tol must be > 0");
    if (!(hi >= lo))
        throw std::invalid_argument("bisection_iterations: empty bracket");
    int n = 0;
    for (double w = hi - lo; w > tol; w *= 0.5)
        ++n;
    return n;
}

BisectionResult bisect_maxmin(const MaxMinProblem& problem, double tol, const FeasibilityOptions& options,
                              std::optional<std::pair<double, double>> bracket)
{
    double lo = bracket ? bracket->first : 0.0;
    double hi = bracket ? bracket->second : problem.upper_bound();
    const int n = bisection_iterations(lo, hi, tol);

    FeasibilityResult first = feasibility(problem, lo, options);
    if (!first.feasible)
        throw std::runtime_error("bisect_maxmin: no feasible point at the lower end of the bracket");
    std::vector<Vec> witness = first.states;
    std::vector<Mat> warm = first.lifted;

    BisectionResult out;
    for (int it = 0; it < n; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        FeasibilityResult r = feasibility(problem, mid, options, &warm);
        if (r.feasible)
        {
            lo = mid;
            witness = std::move(r.states);
            warm = std::move(r.lifted);
        }
        else
        {
            hi = mid;
        }
        ++out.iterations;
    }
    out.states = witness;
    out.alpha = lo;
    out.lower = lo;
    out.upper = hi;
    const auto lifted = lift(witness);
    for (int k = 0; k < problem.num_users(); ++k)
        out.information.push_back(problem.information(k, lifted));
    out.achieved_min_information = *std::min_element(out.information.begin(), out.information.end());
    return out;
}

}  // namespace thzsim
