#ifndef RTABC_BASELINES_HPP
#define RTABC_BASELINES_HPP

#include <algorithm>
#include <chrono>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rtabc/common.hpp"
#include "rtabc/error_model.hpp"

namespace rtabc {

namespace detail {

inline double rms_distance(const Observation& obs, const Vec& pred) {
    const int m = obs.compared_dim();
    double ss = 0.0;
    for (int i = 0; i < m; ++i) ss += sq(obs.values[i] - pred[i]);
    return std::sqrt(ss / m);
}

inline LatentPoint sample_prior(const PriorBounds& b, std::mt19937_64& rng) {
    LatentPoint x(b.dim());
    for (int d = 0; d < b.dim(); ++d) {
        std::uniform_real_distribution<double> u(b.center[d] - b.radius[d], b.center[d] + b.radius[d]);
        x[d] = u(rng);
    }
    return x;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace detail

struct GridConfig {
    double h = 0.1;                      // cell spacing, latent units
    long long max_cells = 10000000;
    int batch = 8192;
};

// Exhaustive scan over the centers of all ceil(2r/h)^k cells of the prior box.
inline InferenceResult grid_map(const GridConfig& cfg, const ErrorModel& model, const Observation& obs,
                                const ForwardFn& forward) {
    if (!(cfg.h > 0.0)) throw numeric_error("grid_map: h must be > 0");
    const auto& b = model.prior_bounds;
    const int k = b.dim();
    std::vector<long long> cells(k);
    long long total = 1;
    for (int d = 0; d < k; ++d) {
        cells[d] = static_cast<long long>(std::ceil(2.0 * b.radius[d] / cfg.h));
        total *= cells[d];
    }
    if (total > cfg.max_cells) throw numeric_error("grid_map: cell count exceeds cap");

    detail::Timer timer;
    InferenceResult res;
    std::vector<LatentPoint> batch;
    batch.reserve(cfg.batch);
    const auto flush = [&]() {
        const auto preds = forward(batch);
        for (size_t i = 0; i < batch.size(); ++i) {
            const auto s = score_prediction_over_slack(obs, preds[i], model);
            if (s.log_posterior > res.log_posterior) {
                res.log_posterior = s.log_posterior;
                res.map_x = batch[i];
                res.map_slack = s.slack;
            }
        }
        res.n_evals += static_cast<long long>(batch.size());
        batch.clear();
    };
    std::vector<long long> idx(k, 0);
    for (long long c = 0; c < total; ++c) {
        LatentPoint x(k);
        for (int d = 0; d < k; ++d) {
            const double width = 2.0 * b.radius[d] / cells[d];
            x[d] = b.center[d] - b.radius[d] + (idx[d] + 0.5) * width;
        }
        batch.push_back(std::move(x));
        if (static_cast<int>(batch.size()) == cfg.batch) flush();
        for (int d = k - 1; d >= 0; --d) {
            if (++idx[d] < cells[d]) break;
            idx[d] = 0;
        }
    }
    if (!batch.empty()) flush();
    res.wall_time_ms = timer.ms();
    return res;
}

struct RejectConfig {
    double tolerance = 0.1;   // RMS residual over the observed prefix
    long long budget = 15000;
    int batch = 4096;
    std::uint64_t seed = 0;
};

inline InferenceResult abc_reject(const RejectConfig& cfg, const ErrorModel& model, const Observation& obs,
                                  const ForwardFn& forward) {
    if (!(cfg.tolerance > 0.0) || cfg.budget < 1)
        throw numeric_error("abc_reject: tolerance and budget must be positive");
    detail::Timer timer;
    std::mt19937_64 rng(cfg.seed);
    InferenceResult res;
    long long accepted = 0;
    SlackScore best_rejected;
    LatentPoint best_rejected_x;
    while (res.n_evals < cfg.budget) {
        const int n = static_cast<int>(std::min<long long>(cfg.batch, cfg.budget - res.n_evals));
        std::vector<LatentPoint> xs(n);
        for (auto& x : xs) x = detail::sample_prior(model.prior_bounds, rng);
        const auto preds = forward(xs);
        res.n_evals += n;
        for (int i = 0; i < n; ++i) {
            const auto s = score_prediction_over_slack(obs, preds[i], model);
            if (detail::rms_distance(obs, preds[i]) < cfg.tolerance) {
                ++accepted;
                res.draws.emplace_back(xs[i], 1.0);
                if (s.log_posterior > res.log_posterior) {
                    res.log_posterior = s.log_posterior;
                    res.map_x = xs[i];
                    res.map_slack = s.slack;
                }
            } else if (s.log_posterior > best_rejected.log_posterior) {
                best_rejected = s;
                best_rejected_x = xs[i];
            }
        }
    }
    res.acceptance_rate = double(accepted) / double(res.n_evals);
    if (accepted == 0) {
        res.flagged = true;
        res.flag_reason = "no samples accepted; reporting best rejected sample";
        res.map_x = best_rejected_x;
        res.map_slack = best_rejected.slack;
        res.log_posterior = best_rejected.log_posterior;
    }
    res.wall_time_ms = timer.ms();
    return res;
}

struct SmcConfig {
    Vec tolerance_schedule = {0.4, 0.2, 0.1, 0.05};  // strictly decreasing RMS tolerances
    int population = 1000;
    long long budget = 15000;
    std::uint64_t seed = 0;

    void validate() const {
        if (tolerance_schedule.empty()) throw numeric_error("SmcConfig: empty tolerance schedule");
        for (size_t t = 1; t < tolerance_schedule.size(); ++t)
            if (!(tolerance_schedule[t] < tolerance_schedule[t - 1]))
                throw numeric_error("SmcConfig: tolerance schedule must be strictly decreasing");
        if (population < 1 || budget < 1) throw numeric_error("SmcConfig: population/budget must be positive");
    }
};

// Population Monte Carlo ABC: generation 1 from the prior, later generations
// resample ancestors by weight and perturb with a Gaussian kernel of std
// twice the weighted population std per dimension.
inline InferenceResult abc_smc(const SmcConfig& cfg, const ErrorModel& model, const Observation& obs,
                               const ForwardFn& forward) {
    cfg.validate();
    detail::Timer timer;
    std::mt19937_64 rng(cfg.seed);
    const auto& b = model.prior_bounds;
    const int k = b.dim();
    const int P = cfg.population;
    InferenceResult res;

    std::vector<LatentPoint> particles;
    Vec weights;
    const int T = static_cast<int>(cfg.tolerance_schedule.size());
    for (int t = 0; t < T && res.n_evals < cfg.budget; ++t) {
        const double tol = cfg.tolerance_schedule[t];
        std::vector<LatentPoint> next;
        Vec next_w;

        Vec kernel_std(k, 0.0);
        std::discrete_distribution<int> ancestor;
        if (t > 0) {
            // weighted std per dimension, doubled
            const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
            for (int d = 0; d < k; ++d) {
                double mean = 0.0;
                for (size_t i = 0; i < particles.size(); ++i) mean += weights[i] * particles[i][d];
                mean /= wsum;
                double var = 0.0;
                for (size_t i = 0; i < particles.size(); ++i) var += weights[i] * sq(particles[i][d] - mean);
                kernel_std[d] = 2.0 * std::sqrt(std::max(var / wsum, 1e-12));
            }
            ancestor = std::discrete_distribution<int>(weights.begin(), weights.end());
        }

        std::normal_distribution<double> gauss(0.0, 1.0);
        while (static_cast<int>(next.size()) < P && res.n_evals < cfg.budget) {
            LatentPoint x;
            if (t == 0) {
                x = detail::sample_prior(b, rng);
            } else {
                const auto& anc = particles[ancestor(rng)];
                x.resize(k);
                for (int d = 0; d < k; ++d) x[d] = anc[d] + kernel_std[d] * gauss(rng);
                if (!b.contains(x)) continue;  // zero prior mass, no forward call needed
            }
            const Vec pred = forward_one(forward, x);
            ++res.n_evals;
            if (detail::rms_distance(obs, pred) >= tol) continue;
            double w = 1.0;
            if (t > 0) {
                // importance weight prior(x) / sum_j w_j K(x | x_j)
                double denom = 0.0;
                for (size_t j = 0; j < particles.size(); ++j) {
                    double lk = 0.0;
                    for (int d = 0; d < k; ++d)
                        lk += -0.5 * sq((x[d] - particles[j][d]) / kernel_std[d]) -
                              std::log(kernel_std[d] * std::sqrt(2.0 * std::numbers::pi));
                    denom += weights[j] * std::exp(lk);
                }
                w = denom > 0.0 ? std::exp(b.log_density()) / denom : 0.0;
            }
            next.push_back(std::move(x));
            next_w.push_back(w);
        }
        if (next.empty()) {
            res.flagged = true;
            res.flag_reason = "generation " + std::to_string(t) + " produced no particles";
            break;
        }
        double wsum = std::accumulate(next_w.begin(), next_w.end(), 0.0);
        if (!(wsum > 0.0)) {
            // degenerate population: restart this generation from the prior
            res.flagged = true;
            res.flag_reason = "degenerate weights at generation " + std::to_string(t) + "; restarted from prior";
            for (auto& x : next) x = detail::sample_prior(b, rng);
            const auto preds = forward(next);
            res.n_evals += static_cast<long long>(next.size());
            (void)preds;
            std::fill(next_w.begin(), next_w.end(), 1.0);
            wsum = static_cast<double>(next_w.size());
        }
        for (auto& w : next_w) w /= wsum;
        particles = std::move(next);
        weights = std::move(next_w);
    }

    if (particles.empty()) throw numeric_error("abc_smc: no particles survived generation 1");
    const auto preds = forward(particles);
    res.n_evals += static_cast<long long>(particles.size());
    for (size_t i = 0; i < particles.size(); ++i) {
        const auto s = score_prediction_over_slack(obs, preds[i], model);
        if (s.log_posterior > res.log_posterior) {
            res.log_posterior = s.log_posterior;
            res.map_x = particles[i];
            res.map_slack = s.slack;
        }
        res.draws.emplace_back(particles[i], weights[i]);
    }
    res.wall_time_ms = timer.ms();
    return res;
}

struct MhConfig {
    long long chain_length = 5000;  // total forward evaluations including the initial state
    long long burn_in = 1000;
    Vec proposal_std;               // per-dimension; default 5% of prior radius
    double slack_log_step = 0.3;    // random-walk step on ln(eps)
    std::uint64_t seed = 0;
};

// Random-walk Metropolis on the joint (x, eps), with eps proposed on log
// scale. The log-scale walk targets the eps-space posterior via the usual
// change-of-variable factor.
inline InferenceResult mcmc_mh(const MhConfig& cfg, const ErrorModel& model, const Observation& obs,
                               const ForwardFn& forward) {
    if (cfg.chain_length < 2 || cfg.burn_in < 0 || cfg.burn_in >= cfg.chain_length)
        throw numeric_error("mcmc_mh: need 0 <= burn_in < chain_length");
    detail::Timer timer;
    std::mt19937_64 rng(cfg.seed);
    const auto& b = model.prior_bounds;
    const int k = b.dim();
    Vec prop_std = cfg.proposal_std;
    if (prop_std.empty()) {
        prop_std.resize(k);
        for (int d = 0; d < k; ++d) prop_std[d] = 0.05 * b.radius[d];
    }

    const auto log_target = [&](const LatentPoint& x, double log_eps, const Vec& pred) {
        if (!b.contains(x)) return kNegInf;
        const double eps = std::exp(log_eps);
        // + log_eps is the Jacobian of the log-scale parameterization
        return b.log_density() + slack_log_prior(eps) + gaussian_loglik(obs, pred, eps) + log_eps;
    };

    InferenceResult res;
    LatentPoint x = b.center;
    double log_eps = std::log(model.slack_grid.values[model.slack_grid.values.size() / 2]);
    Vec pred = forward_one(forward, x);
    res.n_evals = 1;
    double lt = log_target(x, log_eps, pred);
    long long accepted = 0;

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (long long i = 1; i < cfg.chain_length; ++i) {
        LatentPoint xp(k);
        for (int d = 0; d < k; ++d) xp[d] = x[d] + prop_std[d] * gauss(rng);
        const double log_eps_p = log_eps + cfg.slack_log_step * gauss(rng);
        const Vec pred_p = forward_one(forward, xp);
        ++res.n_evals;
        const double lt_p = log_target(xp, log_eps_p, pred_p);
        if (lt_p > lt || unif(rng) < std::exp(lt_p - lt)) {
            x = std::move(xp);
            log_eps = log_eps_p;
            pred = pred_p;
            lt = lt_p;
            ++accepted;
        }
        if (i >= cfg.burn_in) {
            res.draws.emplace_back(x, 1.0);
            const auto s = score_prediction_over_slack(obs, pred, model, b.contains(x));
            if (s.log_posterior > res.log_posterior) {
                res.log_posterior = s.log_posterior;
                res.map_x = x;
                res.map_slack = s.slack;
            }
        }
    }
    res.acceptance_rate = double(accepted) / double(cfg.chain_length - 1);
    if (accepted == 0) {
        res.flagged = true;
        res.flag_reason = "zero acceptance over the whole chain";
        res.map_x = x;
    }
    res.wall_time_ms = timer.ms();
    return res;
}

struct PfConfig {
    int particles = 300;
    double resample_frac = 0.5;   // resample when ESS < particles * resample_frac
    double jitter_frac = 0.01;    // jitter std as a fraction of prior radius
    double weight_slack = 0.05;   // observation std used in the weight update
    std::uint64_t seed = 0;
};

// Bootstrap filter over a static latent: the observation arrives as a growing
// trajectory prefix and each frame multiplies the weights by the likelihood
// of the newly observed samples. Systematic resampling plus Gaussian jitter
// keeps the static-latent cloud from collapsing.
inline std::vector<InferenceResult> particle_filter(const PfConfig& cfg, const ErrorModel& model,
                                                    const Observation& full_obs, int n_frames,
                                                    const ForwardFn& forward) {
    if (cfg.particles < 1) throw numeric_error("particle_filter: need at least one particle");
    if (n_frames < 1 || n_frames > full_obs.dim() / full_obs.point_dim)
        throw dimension_error("particle_filter: invalid frame count");
    detail::Timer timer;
    std::mt19937_64 rng(cfg.seed);
    const auto& b = model.prior_bounds;
    const int k = b.dim();
    const int P = cfg.particles;
    const int pdim = full_obs.point_dim;

    std::vector<LatentPoint> particles(P);
    for (auto& p : particles) p = detail::sample_prior(b, rng);
    Vec log_w(P, 0.0);

    std::vector<InferenceResult> per_frame;
    long long n_evals = 0;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int f = 1; f <= n_frames; ++f) {
        const auto preds = forward(particles);
        n_evals += P;
        // weight update with the newly observed slice only
        for (int i = 0; i < P; ++i) {
            double ss = 0.0;
            for (int j = (f - 1) * pdim; j < f * pdim; ++j) ss += sq(full_obs.values[j] - preds[i][j]);
            log_w[i] += -0.5 * pdim * std::log(2.0 * std::numbers::pi * sq(cfg.weight_slack)) -
                        ss / (2.0 * sq(cfg.weight_slack));
        }
        const double max_lw = *std::max_element(log_w.begin(), log_w.end());
        Vec w(P);
        double wsum = 0.0;
        for (int i = 0; i < P; ++i) {
            w[i] = std::isfinite(max_lw) ? std::exp(log_w[i] - max_lw) : 0.0;
            wsum += w[i];
        }

        InferenceResult frame;
        frame.n_evals = n_evals;
        if (!(wsum > 0.0)) {
            frame.flagged = true;
            frame.flag_reason = "total weight collapse; re-initialized from prior";
            for (auto& p : particles) p = detail::sample_prior(b, rng);
            std::fill(log_w.begin(), log_w.end(), 0.0);
            std::fill(w.begin(), w.end(), 1.0);
            wsum = P;
        }
        for (auto& wi : w) wi /= wsum;

        // per-frame MAP: highest-weight particle, rescored over the slack grid
        Observation prefix(full_obs.values, pdim, f);
        int best = static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
        const auto s = score_prediction_over_slack(prefix, preds[best], model);
        frame.map_x = particles[best];
        frame.map_slack = s.slack;
        frame.log_posterior = s.log_posterior;
        for (int i = 0; i < P; ++i) frame.draws.emplace_back(particles[i], w[i]);

        // resample on low effective sample size
        double ess = 0.0;
        for (double wi : w) ess += wi * wi;
        ess = 1.0 / ess;
        if (ess < cfg.resample_frac * P) {
            std::vector<LatentPoint> resampled(P);
            std::uniform_real_distribution<double> u(0.0, 1.0 / P);
            const double u0 = u(rng);
            double cum = w[0];
            int j = 0;
            for (int i = 0; i < P; ++i) {
                const double target = u0 + double(i) / P;
                while (cum < target && j + 1 < P) cum += w[++j];
                resampled[i] = particles[j];
            }
            particles = std::move(resampled);
            std::fill(log_w.begin(), log_w.end(), 0.0);
            for (auto& p : particles)
                for (int d = 0; d < k; ++d) {
                    p[d] += cfg.jitter_frac * b.radius[d] * gauss(rng);
                    p[d] = std::clamp(p[d], b.center[d] - b.radius[d], b.center[d] + b.radius[d]);
                }
        }
        frame.wall_time_ms = timer.ms();
        per_frame.push_back(std::move(frame));
    }
    return per_frame;
}

}  // namespace rtabc

#endif
