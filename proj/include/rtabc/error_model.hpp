#ifndef RTABC_ERROR_MODEL_HPP
#define RTABC_ERROR_MODEL_HPP

#include <algorithm>
#include <chrono>
#include <functional>
#include <numbers>
#include <utility>

#include "rtabc/common.hpp"

namespace rtabc {

// An observation vector, optionally a partial trajectory: only the first
// observed_prefix * point_dim entries take part in likelihoods.
struct Observation {
    Vec values;
    int point_dim = 1;
    int observed_prefix = 0;  // number of valid leading samples

    Observation() = default;
    Observation(Vec vals, int pdim, int prefix)
        : values(std::move(vals)), point_dim(pdim), observed_prefix(prefix) {
        validate();
    }
    static Observation full(Vec vals) {
        const int m = static_cast<int>(vals.size());
        return Observation(std::move(vals), 1, m);
    }

    int dim() const { return static_cast<int>(values.size()); }
    int compared_dim() const { return observed_prefix * point_dim; }

    void validate() const {
        require_finite(values, "Observation");
        if (point_dim < 1 || observed_prefix < 1 || compared_dim() > dim())
            throw dimension_error("Observation: invalid prefix (need 1 <= n*point_dim <= M)");
    }
};

using LatentPoint = Vec;

struct SlackGrid {
    Vec values;

    SlackGrid() = default;
    explicit SlackGrid(Vec v) : values(std::move(v)) {
        if (values.empty()) throw dimension_error("SlackGrid: empty");
        double prev = 0.0;
        for (double s : values) {
            if (!(s > prev)) throw numeric_error("SlackGrid: values must be positive and strictly increasing");
            prev = s;
        }
    }

    // 16 log-spaced values spanning the slack range seen in practice.
    static SlackGrid log_spaced(double lo = 0.01, double hi = 5.0, int n = 16) {
        Vec v(n);
        for (int i = 0; i < n; ++i)
            v[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1));
        return SlackGrid(std::move(v));
    }
};

// Axis-aligned box over latent space: center c, per-axis half-width r.
struct PriorBounds {
    Vec center;
    Vec radius;

    PriorBounds() = default;
    PriorBounds(Vec c, Vec r) : center(std::move(c)), radius(std::move(r)) {
        if (center.size() != radius.size()) throw dimension_error("PriorBounds: center/radius dim mismatch");
        for (double ri : radius)
            if (!(ri > 0.0)) throw numeric_error("PriorBounds: radius must be > 0");
    }

    int dim() const { return static_cast<int>(center.size()); }

    bool contains(const LatentPoint& x) const {
        if (x.size() != center.size()) throw dimension_error("PriorBounds: point dim mismatch");
        for (size_t i = 0; i < x.size(); ++i)
            if (x[i] < center[i] - radius[i] || x[i] > center[i] + radius[i]) return false;
        return true;
    }

    // log of the uniform density inside the box
    double log_density() const {
        double s = 0.0;
        for (double ri : radius) s -= std::log(2.0 * ri);
        return s;
    }
};

struct ErrorModel {
    SlackGrid slack_grid;
    PriorBounds prior_bounds;
};

// Batched forward function: maps a list of latent points to predicted
// observation vectors. Both the surrogate and the raw simulator satisfy this.
using ForwardFn = std::function<std::vector<Vec>(const std::vector<LatentPoint>&)>;

inline Vec forward_one(const ForwardFn& f, const LatentPoint& x) {
    return f(std::vector<LatentPoint>{x}).at(0);
}

// Wraps a forward function and counts how many latent points it evaluated.
struct CountingForward {
    ForwardFn inner;
    long long count = 0;

    std::vector<Vec> operator()(const std::vector<LatentPoint>& xs) {
        count += static_cast<long long>(xs.size());
        return inner(xs);
    }
    ForwardFn fn() {
        return [this](const std::vector<LatentPoint>& xs) { return (*this)(xs); };
    }
};

struct LeafRecord {
    Vec center;
    double radius = 0.0;
    double log_likelihood = kNegInf;
};

struct InferenceResult {
    LatentPoint map_x;
    double map_slack = 0.0;
    double log_posterior = kNegInf;
    long long n_evals = 0;
    double wall_time_ms = 0.0;
    std::vector<LeafRecord> leaves;   // empty for non-tree methods
    // method diagnostics
    bool flagged = false;             // acceptance failure, weight collapse, budget hit...
    std::string flag_reason;
    double acceptance_rate = -1.0;    // MH / ABC-rej, when meaningful
    // weighted posterior draws for stochastic methods (diagnostics/estimators)
    std::vector<std::pair<LatentPoint, double>> draws;
};

// Isotropic Gaussian log-likelihood over the observed prefix of obs.
inline double gaussian_loglik(const Observation& obs, const Vec& pred, double slack) {
    const int m = obs.compared_dim();
    if (static_cast<int>(pred.size()) < m)
        throw dimension_error("gaussian_loglik: prediction shorter than observed prefix");
    if (!(slack > 0.0) || !std::isfinite(slack))
        throw numeric_error("gaussian_loglik: slack must be positive finite");
    double ss = 0.0;
    for (int i = 0; i < m; ++i) {
        const double r = obs.values[i] - pred[i];
        if (!std::isfinite(r)) throw numeric_error("gaussian_loglik: non-finite residual");
        ss += r * r;
    }
    return -0.5 * m * std::log(2.0 * std::numbers::pi * slack * slack) - ss / (2.0 * slack * slack);
}

// log Gamma(1,1) = Exponential(1) density
inline double slack_log_prior(double slack) {
    if (slack < 0.0) throw numeric_error("slack_log_prior: negative slack");
    return -slack;
}

inline double joint_log_posterior(const LatentPoint& x, double slack, const Observation& obs,
                                  const ErrorModel& model, const ForwardFn& forward) {
    if (!model.prior_bounds.contains(x)) return kNegInf;
    return model.prior_bounds.log_density() + slack_log_prior(slack) +
           gaussian_loglik(obs, forward_one(forward, x), slack);
}

struct SlackScore {
    double log_posterior = kNegInf;
    double slack = 0.0;
};

// Score a prediction (one forward output, reused) against every slack in the
// grid; keep the max. Ties break toward the smaller slack.
inline SlackScore score_prediction_over_slack(const Observation& obs, const Vec& pred,
                                              const ErrorModel& model, bool in_bounds = true) {
    SlackScore best;
    if (!in_bounds) return best;
    const int m = obs.compared_dim();
    double ss = 0.0;
    for (int i = 0; i < m; ++i) ss += sq(obs.values[i] - pred[i]);
    if (!std::isfinite(ss)) throw numeric_error("score_prediction_over_slack: non-finite residual");
    const double lp_x = model.prior_bounds.log_density();
    for (double eps : model.slack_grid.values) {
        const double ll = -0.5 * m * std::log(2.0 * std::numbers::pi * eps * eps) - ss / (2.0 * eps * eps);
        const double lp = lp_x + slack_log_prior(eps) + ll;
        if (lp > best.log_posterior) {
            best.log_posterior = lp;
            best.slack = eps;
        }
    }
    return best;
}

inline SlackScore score_over_slack(const LatentPoint& x, const Observation& obs,
                                   const ErrorModel& model, const ForwardFn& forward) {
    if (!model.prior_bounds.contains(x)) return SlackScore{};
    return score_prediction_over_slack(obs, forward_one(forward, x), model);
}

// Plug-in MAP slack over a discrete candidate set (typically posterior
// leaves): the slack of the best-scoring (x, eps) pair. High values flag
// observations the model cannot explain.
inline double infer_slack_map(const Observation& obs, const ErrorModel& model,
                              const ForwardFn& forward, const std::vector<LatentPoint>& x_candidates) {
    if (x_candidates.empty()) throw dimension_error("infer_slack_map: empty candidate set");
    const auto preds = forward(x_candidates);
    SlackScore best;
    for (size_t i = 0; i < x_candidates.size(); ++i) {
        const auto s = score_prediction_over_slack(obs, preds[i], model,
                                                   model.prior_bounds.contains(x_candidates[i]));
        if (s.log_posterior > best.log_posterior) best = s;
    }
    if (best.log_posterior == kNegInf)
        throw numeric_error("infer_slack_map: no candidate inside prior bounds");
    return best.slack;
}

}  // namespace rtabc

#endif
