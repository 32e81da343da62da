#ifndef RTABC_TREE_PYRAMID_HPP
#define RTABC_TREE_PYRAMID_HPP

#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "rtabc/error_model.hpp"

namespace rtabc {

// Node of a k-dimensional Tree-Pyramid: a full tree where every node has
// either zero or 2^k children, each child halving the parent hypercube.
struct KdTpNode {
    Vec center;
    double radius = 0.0;            // half-width, identical per axis
    double log_likelihood = kNegInf;
    double best_slack = 0.0;
    bool scored = false;
    int children_begin = -1;        // index of first child in the arena, contiguous 2^k block
    int depth = 0;

    bool is_leaf() const { return children_begin < 0; }
};

struct KdTp {
    int k = 0;
    std::vector<KdTpNode> nodes;    // nodes[0] is the root

    KdTp(int dim, Vec center, double radius) : k(dim) {
        if (dim < 1) throw dimension_error("KdTp: dimension must be >= 1");
        if (static_cast<int>(center.size()) != dim) throw dimension_error("KdTp: center dim mismatch");
        if (!(radius > 0.0)) throw numeric_error("KdTp: radius must be > 0");
        KdTpNode root;
        root.center = std::move(center);
        root.radius = radius;
        nodes.push_back(std::move(root));
    }

    const KdTpNode& root() const { return nodes[0]; }
    int n_children() const { return 1 << k; }

    std::vector<int> leaf_indices() const {
        std::vector<int> out;
        for (size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].is_leaf()) out.push_back(static_cast<int>(i));
        return out;
    }
};

struct TpConfig {
    double tau = -450.0;         // expansion threshold (relative to running max by default)
    bool tau_is_relative = true; // absolute-tau mode reproduces the plain expansion rule
    double rho = 0.01;           // resolution limit: min circumscribed cell radius
    long long max_evals = 1000000;

    void validate(int k) const {
        if (!(rho > 0.0)) throw numeric_error("TpConfig: rho must be > 0");
        if (max_evals < (1LL << k) + 1) throw numeric_error("TpConfig: max_evals too small");
        if (tau_is_relative && tau > 0.0) throw numeric_error("TpConfig: relative tau must be <= 0");
    }
};

// Expand every node in expansion_set into its 2^k children and return the new
// children as a flat list. Child centers are parent.center + delta with
// delta in {+r/2, -r/2}^k, enumerated lexicographically with + before -.
inline std::vector<int> gen_candidate_expansions(KdTp& tree, const std::vector<int>& expansion_set) {
    std::vector<int> created;
    const int k = tree.k;
    const int nc = tree.n_children();
    for (int ni : expansion_set) {
        if (!tree.nodes[ni].is_leaf()) throw numeric_error("gen_candidate_expansions: node is not a leaf");
        const Vec c = tree.nodes[ni].center;
        const double r = tree.nodes[ni].radius;
        const int depth = tree.nodes[ni].depth;
        const int first = static_cast<int>(tree.nodes.size());
        tree.nodes[ni].children_begin = first;
        for (int pat = 0; pat < nc; ++pat) {
            KdTpNode child;
            child.center.resize(k);
            for (int d = 0; d < k; ++d) {
                // bit 0 of pat -> axis 0 via the high bit, so pattern 0 is all-plus
                const bool minus = (pat >> (k - 1 - d)) & 1;
                child.center[d] = c[d] + (minus ? -r / 2.0 : r / 2.0);
            }
            child.radius = r / 2.0;
            child.depth = depth + 1;
            tree.nodes.push_back(std::move(child));
            created.push_back(first + pat);
        }
    }
    return created;
}

// Adaptive-discretization posterior approximation. Seeds the expansion set
// with the root, then repeatedly expands, scores all candidates in one
// batched forward call (maximizing over the slack grid per candidate), and
// keeps expanding candidates above the threshold until the resolution limit
// or evaluation budget is reached.
inline std::pair<KdTp, InferenceResult> compute_tp_posterior(const TpConfig& cfg, const ErrorModel& model,
                                                             const Observation& obs, const ForwardFn& forward) {
    const int k = model.prior_bounds.dim();
    cfg.validate(k);
    for (size_t i = 1; i < model.prior_bounds.radius.size(); ++i)
        if (model.prior_bounds.radius[i] != model.prior_bounds.radius[0])
            throw dimension_error("compute_tp_posterior: prior box must be a hypercube");

    const auto t0 = std::chrono::steady_clock::now();
    KdTp tree(k, model.prior_bounds.center, model.prior_bounds.radius[0]);
    InferenceResult res;

    std::vector<int> expansion_set{0};  // root expands unconditionally
    double running_max = kNegInf;
    int best_idx = -1;

    while (!expansion_set.empty()) {
        const auto candidates = gen_candidate_expansions(tree, expansion_set);
        expansion_set.clear();

        std::vector<LatentPoint> centers;
        centers.reserve(candidates.size());
        for (int ci : candidates) centers.push_back(tree.nodes[ci].center);
        const auto preds = forward(centers);
        res.n_evals += static_cast<long long>(candidates.size());

        for (size_t i = 0; i < candidates.size(); ++i) {
            auto& node = tree.nodes[candidates[i]];
            const auto s = score_prediction_over_slack(obs, preds[i], model);
            node.log_likelihood = s.log_posterior;
            node.best_slack = s.slack;
            node.scored = true;
            if (s.log_posterior > running_max) {
                running_max = s.log_posterior;
                best_idx = candidates[i];
            }
        }
        if (res.n_evals >= cfg.max_evals) {
            res.flagged = true;
            res.flag_reason = "evaluation budget exhausted";
            break;
        }
        const double threshold = cfg.tau_is_relative ? running_max + cfg.tau : cfg.tau;
        // A node's radius here is its circumscribed (bounding-ball) radius,
        // half-width * sqrt(k): refinement continues until no point of the
        // cell is further than rho from the scored center, which keeps the
        // leaf quantization error within rho of a dense grid at spacing rho.
        const double rho_halfwidth = cfg.rho / std::sqrt(static_cast<double>(k));
        for (int ci : candidates) {
            const auto& node = tree.nodes[ci];
            if (node.log_likelihood > threshold && node.radius > rho_halfwidth)
                expansion_set.push_back(ci);
        }
    }

    if (best_idx < 0) throw numeric_error("compute_tp_posterior: no node scored");
    res.map_x = tree.nodes[best_idx].center;
    res.map_slack = tree.nodes[best_idx].best_slack;
    res.log_posterior = running_max;
    for (const auto& n : tree.nodes)
        if (n.is_leaf() && n.scored)
            res.leaves.push_back(LeafRecord{n.center, n.radius, n.log_likelihood});
    res.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(tree), std::move(res)};
}

struct LeafMass {
    Vec center;
    double radius = 0.0;
    double log_likelihood = kNegInf;
    double mass = 0.0;
};

// Piecewise-constant posterior over the leaf partition:
// mass_i proportional to exp(L_i - max L) * volume_i, normalized to 1.
inline std::vector<LeafMass> leaf_density(const KdTp& tree) {
    std::vector<LeafMass> out;
    double max_ll = kNegInf;
    for (int li : tree.leaf_indices()) {
        const auto& n = tree.nodes[li];
        if (!n.scored) throw numeric_error("leaf_density: unscored leaf");
        if (n.log_likelihood > max_ll) max_ll = n.log_likelihood;
        out.push_back(LeafMass{n.center, n.radius, n.log_likelihood, 0.0});
    }
    double total = 0.0;
    for (auto& lm : out) {
        const double vol = std::pow(2.0 * lm.radius, tree.k);
        lm.mass = std::exp(lm.log_likelihood - max_ll) * vol;
        total += lm.mass;
    }
    for (auto& lm : out) lm.mass /= total;
    return out;
}

// MAP = center of the max-likelihood leaf; ties keep the first-inserted leaf.
inline std::pair<LatentPoint, double> map_estimate(const KdTp& tree) {
    int best = -1;
    double best_ll = kNegInf;
    for (int li : tree.leaf_indices()) {
        const auto& n = tree.nodes[li];
        if (!n.scored) throw numeric_error("map_estimate: unscored leaf");
        if (n.log_likelihood > best_ll) {
            best_ll = n.log_likelihood;
            best = li;
        }
    }
    if (best < 0) throw numeric_error("map_estimate: empty tree");
    return {tree.nodes[best].center, best_ll};
}

// One leaf per line: center[k] radius loglik mass, decimal text.
inline void write_leaf_dump(const KdTp& tree, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("write_leaf_dump: cannot open " + path);
    out << "#";
    for (int d = 0; d < tree.k; ++d) out << " center" << d;
    out << " radius loglik mass\n";
    out.precision(17);
    for (const auto& lm : leaf_density(tree)) {
        for (int d = 0; d < tree.k; ++d) out << lm.center[d] << ' ';
        out << lm.radius << ' ' << lm.log_likelihood << ' ' << lm.mass << '\n';
    }
    if (!out) throw io_error("write_leaf_dump: write failed for " + path);
}

}  // namespace rtabc

#endif
