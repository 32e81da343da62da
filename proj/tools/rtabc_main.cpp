// rtabc command-line front end: dataset generation, surrogate training,
// single-shot and streaming inference, multi-method benchmarking, and
// slack-based anomaly scanning.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rtabc/rtabc.hpp"

namespace fs = std::filesystem;
using namespace rtabc;

// exit codes
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitParse = 4;
constexpr int kExitNumeric = 5;

// ---------------------------------------------------------------------------
// config handling: built-in defaults < config file < CLI flags
// ---------------------------------------------------------------------------

struct Config {
    std::map<std::string, std::string> values;

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open config file " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw parse_error("config line " + std::to_string(lineno) + ": expected key=value");
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
    }

    double get(const std::string& key, double def) const {
        const auto it = values.find(key);
        if (it == values.end()) return def;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw parse_error("config key " + key + ": not a number: " + it->second);
        }
    }
    long long get(const std::string& key, long long def) const {
        return static_cast<long long>(get(key, static_cast<double>(def)));
    }
    void set_num(const std::string& key, double v) {
        std::ostringstream ss;
        ss.precision(17);
        ss << v;
        values[key] = ss.str();
    }

    void echo(const std::string& dir) const {
        std::ofstream out(fs::path(dir) / "effective_config.txt");
        for (const auto& [k, v] : values) out << k << " = " << v << "\n";
    }
};

static ErrorModel make_model(const Config& cfg) {
    ErrorModel model;
    model.slack_grid = SlackGrid::log_spaced(cfg.get("slack.lo", 0.01), cfg.get("slack.hi", 5.0),
                                             static_cast<int>(cfg.get("slack.n", 16ll)));
    const double r = cfg.get("prior.radius", 2.0);
    model.prior_bounds = PriorBounds({cfg.get("prior.cx", 2.4), cfg.get("prior.cy", 0.0)}, {r, r});
    return model;
}

static ControllerGains make_gains(const Config& cfg) {
    ControllerGains g;
    g.kp = cfg.get("gains.kp", g.kp);
    g.ki = cfg.get("gains.ki", g.ki);
    g.kd = cfg.get("gains.kd", g.kd);
    g.k_rep = cfg.get("gains.k_rep", g.k_rep);
    g.nullspace_gain = cfg.get("gains.nullspace", g.nullspace_gain);
    g.damping = cfg.get("gains.damping", g.damping);
    g.v_max = cfg.get("gains.v_max", g.v_max);
    return g;
}

static ForwardFn make_forward(const std::string& weights_path, bool raw_sim, const Config& cfg, Mlp& net_storage) {
    if (raw_sim) return make_simulator_forward(ArmModel::default_arm(), make_gains(cfg));
    if (weights_path.empty()) throw parse_error("need --weights <file> or --raw-sim");
    net_storage = load_weights(weights_path);
    return [&net_storage](const std::vector<LatentPoint>& xs) { return forward_batch(net_storage, xs); };
}

static Observation make_observation(const Vec& flat, double observed_frac) {
    int n = static_cast<int>(std::lround(observed_frac * kTrajectorySamples));
    n = std::clamp(n, 1, kTrajectorySamples);
    return Observation(flat, 3, n);
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

static int cmd_gen_data(const Config& cfg, int n, std::uint64_t seed, const std::string& out_path,
                        double sigma_obs) {
    const ArmModel arm = ArmModel::default_arm();
    const ControllerGains gains = make_gains(cfg);
    DatasetBounds bounds;
    bounds.x_lo = cfg.get("table.x_lo", bounds.x_lo);
    bounds.x_hi = cfg.get("table.x_hi", bounds.x_hi);
    bounds.y_lo = cfg.get("table.y_lo", bounds.y_lo);
    bounds.y_hi = cfg.get("table.y_hi", bounds.y_hi);
    const auto res = generate_dataset(arm, gains, n, bounds, sigma_obs, seed);
    write_dataset(res.trajectories, out_path);
    std::ofstream meta(out_path + ".meta");
    meta << "format_version=" << kDatasetFormatVersion << "\n"
         << "n=" << n << "\nseed=" << seed << "\nsigma_obs=" << sigma_obs << "\n"
         << "arm_dof=" << arm.dof() << "\narm_max_reach=" << arm.max_reach() << "\n"
         << "gains.kp=" << gains.kp << "\ngains.ki=" << gains.ki << "\ngains.kd=" << gains.kd << "\n"
         << "gains.nullspace=" << gains.nullspace_gain << "\n"
         << "table=" << bounds.x_lo << "," << bounds.x_hi << "," << bounds.y_lo << "," << bounds.y_hi << "\n"
         << "unreachable_rejected=" << res.n_unreachable_rejected << "\n";
    std::cout << "wrote " << res.trajectories.size() << " trajectories to " << out_path << "\n";
    return kExitOk;
}

// scaling bounds from the data, slightly padded so targets stay inside [-1,1]
static void fit_scaling(Mlp& net, const Dataset& data) {
    const int k = net.input_dim(), M = net.output_dim();
    Vec ilo(k, 1e300), ihi(k, -1e300), olo(M, 1e300), ohi(M, -1e300);
    for (const auto& x : data.inputs)
        for (int d = 0; d < k; ++d) {
            ilo[d] = std::min(ilo[d], x[d]);
            ihi[d] = std::max(ihi[d], x[d]);
        }
    for (const auto& y : data.targets)
        for (int d = 0; d < M; ++d) {
            olo[d] = std::min(olo[d], y[d]);
            ohi[d] = std::max(ohi[d], y[d]);
        }
    for (int d = 0; d < k; ++d) {
        const double pad = std::max(0.05 * (ihi[d] - ilo[d]), 1e-6);
        ilo[d] -= pad;
        ihi[d] += pad;
    }
    for (int d = 0; d < M; ++d) {
        // floor keeps near-constant output dims (e.g. a fixed table height)
        // from collapsing the scale and blowing up the training-noise std
        const double pad = std::max(0.05 * (ohi[d] - olo[d]), 0.05);
        olo[d] -= pad;
        ohi[d] += pad;
    }
    net.set_scaling(ilo, ihi, olo, ohi);
}

static int cmd_train(const Config& cfg, const std::string& data_path, const std::string& out_path,
                     std::uint64_t seed) {
    const Dataset data = read_dataset(data_path);
    std::vector<int> sizes{2};
    const int n_hidden = static_cast<int>(cfg.get("train.hidden_layers", 2ll));
    const int width = static_cast<int>(cfg.get("train.hidden_width", 128ll));
    for (int i = 0; i < n_hidden; ++i) sizes.push_back(width);
    sizes.push_back(static_cast<int>(data.targets[0].size()));

    Mlp net(sizes, subseed(seed, 0));
    fit_scaling(net, data);
    TrainConfig tc;
    tc.epsilon_star = cfg.get("train.eps_star", tc.epsilon_star);
    tc.learning_rate = cfg.get("train.lr", tc.learning_rate);
    tc.batch_size = static_cast<int>(cfg.get("train.batch", (long long)tc.batch_size));
    tc.epochs = static_cast<int>(cfg.get("train.epochs", (long long)tc.epochs));
    tc.seed = subseed(seed, 1);
    const TrainReport report = train_sgd(net, data, tc);
    if (report.diverged) {
        std::cerr << "training diverged at epoch " << report.diverged_epoch << "\n";
        return kExitNumeric;
    }
    save_weights(net, out_path);
    std::ofstream loss(out_path + ".loss.csv");
    loss << "epoch,mean_loss\n";
    loss.precision(17);
    for (size_t e = 0; e < report.epoch_mean_loss.size(); ++e)
        loss << e << "," << report.epoch_mean_loss[e] << "\n";
    std::cout << "trained " << tc.epochs << " epochs, final mean loss " << report.epoch_mean_loss.back()
              << ", weights in " << out_path << "\n";
    return kExitOk;
}

struct MethodParams {
    TpConfig tp;
    GridConfig grid;
    RejectConfig rej;
    SmcConfig smc;
    MhConfig mh;
    PfConfig pf;
};

static MethodParams make_params(const Config& cfg, std::uint64_t seed) {
    MethodParams p;
    p.tp.tau = cfg.get("tp.tau", p.tp.tau);
    p.tp.tau_is_relative = cfg.get("tp.tau_relative", 1.0) != 0.0;
    p.tp.rho = cfg.get("tp.rho", p.tp.rho);
    p.tp.max_evals = cfg.get("tp.max_evals", p.tp.max_evals);
    p.grid.h = cfg.get("grid.h", p.grid.h);
    p.rej.tolerance = cfg.get("rej.tolerance", p.rej.tolerance);
    p.rej.budget = cfg.get("rej.budget", p.rej.budget);
    p.rej.seed = subseed(seed, 101);
    p.smc.population = static_cast<int>(cfg.get("smc.population", (long long)p.smc.population));
    p.smc.budget = cfg.get("smc.budget", p.smc.budget);
    p.smc.seed = subseed(seed, 102);
    p.mh.chain_length = cfg.get("mh.chain_length", p.mh.chain_length);
    p.mh.burn_in = cfg.get("mh.burn_in", p.mh.burn_in);
    p.mh.slack_log_step = cfg.get("mh.slack_log_step", p.mh.slack_log_step);
    p.mh.seed = subseed(seed, 103);
    p.pf.particles = static_cast<int>(cfg.get("pf.particles", (long long)p.pf.particles));
    p.pf.weight_slack = cfg.get("pf.weight_slack", p.pf.weight_slack);
    p.pf.seed = subseed(seed, 104);
    return p;
}

static InferenceResult run_method(const std::string& method, const MethodParams& p, const ErrorModel& model,
                                  const Observation& obs, const ForwardFn& forward, KdTp* tree_out = nullptr) {
    if (method == "tp") {
        auto [tree, res] = compute_tp_posterior(p.tp, model, obs, forward);
        if (tree_out) *tree_out = std::move(tree);
        return res;
    }
    if (method == "grid") return grid_map(p.grid, model, obs, forward);
    if (method == "abc-rej") return abc_reject(p.rej, model, obs, forward);
    if (method == "abc-smc") return abc_smc(p.smc, model, obs, forward);
    if (method == "mcmc-mh") return mcmc_mh(p.mh, model, obs, forward);
    if (method == "pf") return particle_filter(p.pf, model, obs, obs.observed_prefix, forward).back();
    throw parse_error("unknown method tag: " + method);
}

static void write_result(std::ostream& out, const InferenceResult& r) {
    out.precision(17);
    out << "map_x =";
    for (double v : r.map_x) out << " " << v;
    out << "\nmap_slack = " << r.map_slack << "\nlog_posterior = " << r.log_posterior
        << "\nn_evals = " << r.n_evals << "\nwall_time_ms = " << r.wall_time_ms << "\nflagged = " << r.flagged
        << "\n";
    if (r.flagged) out << "flag_reason = " << r.flag_reason << "\n";
}

static int cmd_infer(const Config& cfg, const std::string& method, const std::string& obs_path, int index,
                     double observed_frac, bool stream, const std::string& weights, bool raw_sim,
                     std::uint64_t seed, const std::string& out_dir) {
    const Dataset data = read_dataset(obs_path);
    if (index < 0 || index >= static_cast<int>(data.inputs.size()))
        throw parse_error("--index out of range for " + obs_path);
    Mlp net;
    const ForwardFn forward = make_forward(weights, raw_sim, cfg, net);
    const ErrorModel model = make_model(cfg);
    const MethodParams params = make_params(cfg, seed);
    fs::create_directories(out_dir);
    cfg.echo(out_dir);

    if (stream) {
        const int n_frames = std::clamp(static_cast<int>(std::lround(observed_frac * kTrajectorySamples)), 1,
                                        kTrajectorySamples);
        std::ofstream out(fs::path(out_dir) / "stream.csv");
        out << "frame,map_x,map_y,map_slack,log_posterior,n_evals,wall_time_ms\n";
        out.precision(17);
        if (method == "pf") {
            const Observation full(data.targets[index], 3, n_frames);
            const auto frames = particle_filter(params.pf, model, full, n_frames, forward);
            for (int f = 0; f < n_frames; ++f)
                out << (f + 1) << "," << frames[f].map_x[0] << "," << frames[f].map_x[1] << ","
                    << frames[f].map_slack << "," << frames[f].log_posterior << "," << frames[f].n_evals << ","
                    << frames[f].wall_time_ms << "\n";
        } else {
            // each frame builds a fresh posterior from the prefix observed so far
            long long cum_evals = 0;
            for (int f = 1; f <= n_frames; ++f) {
                const Observation prefix(data.targets[index], 3, f);
                const InferenceResult r = run_method(method, params, model, prefix, forward);
                cum_evals += r.n_evals;
                out << f << "," << r.map_x[0] << "," << r.map_x[1] << "," << r.map_slack << ","
                    << r.log_posterior << "," << cum_evals << "," << r.wall_time_ms << "\n";
            }
        }
        std::cout << "stream results in " << (fs::path(out_dir) / "stream.csv").string() << "\n";
        return kExitOk;
    }

    const Observation obs = make_observation(data.targets[index], observed_frac);
    KdTp tree(model.prior_bounds.dim(), model.prior_bounds.center, model.prior_bounds.radius[0]);
    const InferenceResult res = run_method(method, params, model, obs, forward, &tree);
    std::ofstream out(fs::path(out_dir) / "result.txt");
    write_result(out, res);
    if (method == "tp") write_leaf_dump(tree, (fs::path(out_dir) / "leaves.txt").string());
    const LatentPoint& truth = data.inputs[index];
    const double err = std::hypot(res.map_x[0] - truth[0], res.map_x[1] - truth[1]);
    std::cout << "method=" << method << " map=(" << res.map_x[0] << ", " << res.map_x[1] << ") err=" << err
              << " m  n_evals=" << res.n_evals << " time=" << res.wall_time_ms << " ms\n";
    return kExitOk;
}

static int cmd_bench(const Config& cfg, const std::vector<std::string>& methods, const std::string& data_path,
                     int trials, double observed_frac, const std::string& weights, bool raw_sim,
                     std::uint64_t seed, const std::string& out_dir) {
    const Dataset data = read_dataset(data_path);
    if (trials < 1 || trials > static_cast<int>(data.inputs.size()))
        throw parse_error("--trials must be in [1, dataset size]");
    Mlp net;
    const ForwardFn forward_raw = make_forward(weights, raw_sim, cfg, net);
    const ErrorModel model = make_model(cfg);
    fs::create_directories(out_dir);
    cfg.echo(out_dir);

    struct Row {
        std::string method;
        int trial;
        double error_m, time_ms, map_slack;
        long long n_evals;
        bool failed;
    };
    std::vector<Row> rows;
    for (int trial = 0; trial < trials; ++trial) {
        const Observation obs = make_observation(data.targets[trial], observed_frac);
        const LatentPoint& truth = data.inputs[trial];
        for (size_t mi = 0; mi < methods.size(); ++mi) {
            const MethodParams params = make_params(cfg, subseed(subseed(seed, trial), mi));
            Row row{methods[mi], trial, 0.0, 0.0, 0.0, 0, false};
            try {
                CountingForward counter{forward_raw};
                const InferenceResult r = run_method(methods[mi], params, model, obs, counter.fn());
                row.error_m = std::hypot(r.map_x[0] - truth[0], r.map_x[1] - truth[1]);
                row.time_ms = r.wall_time_ms;
                row.n_evals = counter.count;
                row.map_slack = r.map_slack;
            } catch (const std::exception& e) {
                row.failed = true;
                std::cerr << "trial " << trial << " method " << methods[mi] << " failed: " << e.what() << "\n";
            }
            rows.push_back(row);
        }
    }

    std::ofstream raw(fs::path(out_dir) / "raw.csv");
    raw << "method,trial,observed_frac,error_m,time_ms,n_evals,map_slack,failed\n";
    raw.precision(17);
    for (const auto& r : rows)
        raw << r.method << "," << r.trial << "," << observed_frac << "," << r.error_m << "," << r.time_ms << ","
            << r.n_evals << "," << r.map_slack << "," << r.failed << "\n";

    std::ofstream summary(fs::path(out_dir) / "summary.csv");
    summary << "method,trials,err_mean_m,err_std_m,time_mean_ms,time_std_ms,evals_mean,evals_std\n";
    summary.precision(17);
    std::cout << "method      err(cm)            time(ms)           #evals\n";
    for (const auto& m : methods) {
        Vec errs, times, evals;
        for (const auto& r : rows)
            if (r.method == m && !r.failed) {
                errs.push_back(r.error_m);
                times.push_back(r.time_ms);
                evals.push_back(static_cast<double>(r.n_evals));
            }
        auto mean = [](const Vec& v) {
            return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        };
        auto stdev = [&](const Vec& v) {
            if (v.size() < 2) return 0.0;
            const double mu = mean(v);
            double ss = 0.0;
            for (double x : v) ss += sq(x - mu);
            return std::sqrt(ss / (v.size() - 1));
        };
        summary << m << "," << errs.size() << "," << mean(errs) << "," << stdev(errs) << "," << mean(times)
                << "," << stdev(times) << "," << mean(evals) << "," << stdev(evals) << "\n";
        std::printf("%-10s  %6.1f +- %-6.1f   %7.1f +- %-6.1f  %9.0f +- %-8.0f\n", m.c_str(),
                    100 * mean(errs), 100 * stdev(errs), mean(times), stdev(times), mean(evals), stdev(evals));
        std::ofstream pts(fs::path(out_dir) / (m + "_time_error.txt"));
        pts << "# time_ms error_m\n";
        pts.precision(17);
        for (const auto& r : rows)
            if (r.method == m && !r.failed) pts << r.time_ms << " " << r.error_m << "\n";
    }
    return kExitOk;
}

static int cmd_slack_scan(const Config& cfg, const std::string& data_path, double threshold,
                          double observed_frac, const std::string& weights, bool raw_sim, std::uint64_t seed,
                          const std::string& out_dir) {
    const Dataset data = read_dataset(data_path);
    Mlp net;
    const ForwardFn forward = make_forward(weights, raw_sim, cfg, net);
    const ErrorModel model = make_model(cfg);
    const MethodParams params = make_params(cfg, seed);
    fs::create_directories(out_dir);
    cfg.echo(out_dir);

    std::ofstream out(fs::path(out_dir) / "slack_scan.csv");
    out << "index,slack,anomalous\n";
    out.precision(17);
    int n_anomalous = 0;
    for (size_t i = 0; i < data.targets.size(); ++i) {
        const Observation obs = make_observation(data.targets[i], observed_frac);
        const auto [tree, res] = compute_tp_posterior(params.tp, model, obs, forward);
        std::vector<LatentPoint> candidates;
        for (const auto& leaf : res.leaves) candidates.push_back(leaf.center);
        const double slack = infer_slack_map(obs, model, forward, candidates);
        const bool anomalous = slack > threshold;
        n_anomalous += anomalous;
        out << i << "," << slack << "," << anomalous << "\n";
    }
    std::cout << "scanned " << data.targets.size() << " observations, " << n_anomalous << " above slack "
              << threshold << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"real-time likelihood-free inference engine"};
    app.set_help_flag("--help", "print help");  // frees -h/--h for the grid spacing
    app.require_subcommand(1);

    std::string config_path, out, data_path, weights, method = "tp";
    std::string methods_csv = "tp,grid,abc-rej,abc-smc,mcmc-mh,pf";
    std::uint64_t seed = 0;
    int n = 1000, index = 0, trials = 100;
    double sigma_obs = 0.0, observed_frac = 0.5, slack_threshold = 0.5;
    bool raw_sim = false, stream = false;

    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--seed", seed, "run seed (all randomness derives from it)");

    auto* gen = app.add_subcommand("gen-data", "simulate reaching trajectories into a dataset file");
    gen->add_option("--n", n, "number of trajectories");
    gen->add_option("--sigma-obs", sigma_obs, "observation noise std (m)");
    gen->add_option("--out", out, "output dataset file")->required();

    auto* train = app.add_subcommand("train", "train the neural surrogate on a dataset");
    train->add_option("--data", data_path, "training dataset file")->required();
    train->add_option("--out", out, "output weight file")->required();

    auto* infer = app.add_subcommand("infer", "run one inference method on one observation");
    infer->add_option("--method", method, "tp|grid|abc-rej|abc-smc|mcmc-mh|pf");
    infer->add_option("--data", data_path, "observation dataset file")->required();
    infer->add_option("--index", index, "record index in the dataset");
    infer->add_option("--observed-frac", observed_frac, "fraction of the trajectory observed");
    infer->add_flag("--stream", stream, "replay the trajectory frame by frame");
    infer->add_option("--weights", weights, "surrogate weight file");
    infer->add_flag("--raw-sim", raw_sim, "use the raw simulator as the forward function");
    infer->add_option("--out", out, "output directory")->required();

    auto* bench = app.add_subcommand("bench", "run the method comparison suite");
    bench->add_option("--methods", methods_csv, "comma-separated method tags");
    bench->add_option("--data", data_path, "test dataset file with ground-truth goals")->required();
    bench->add_option("--trials", trials, "number of trials");
    bench->add_option("--observed-frac", observed_frac, "fraction of the trajectory observed");
    bench->add_option("--weights", weights, "surrogate weight file");
    bench->add_flag("--raw-sim", raw_sim, "use the raw simulator as the forward function");
    bench->add_option("--out", out, "output directory")->required();

    auto* scan = app.add_subcommand("slack-scan", "report inferred slack per observation");
    scan->add_option("--data", data_path, "observation dataset file")->required();
    scan->add_option("--threshold", slack_threshold, "anomaly threshold on inferred slack");
    scan->add_option("--observed-frac", observed_frac, "fraction of the trajectory observed");
    scan->add_option("--weights", weights, "surrogate weight file");
    scan->add_flag("--raw-sim", raw_sim, "use the raw simulator as the forward function");
    scan->add_option("--out", out, "output directory")->required();

    // numeric overrides shared with the config file
    std::map<std::string, double> overrides;
    for (auto [flag, key] : std::initializer_list<std::pair<const char*, const char*>>{
             {"--h", "grid.h"},          {"--grid-h", "grid.h"},     {"--tp-tau", "tp.tau"},
             {"--tp-rho", "tp.rho"},     {"--epochs", "train.epochs"}, {"--lr", "train.lr"},
             {"--eps-star", "train.eps_star"}, {"--batch", "train.batch"}, {"--tolerance", "rej.tolerance"},
             {"--particles", "pf.particles"}, {"--chain-length", "mh.chain_length"}})
        app.add_option_function<double>(
               flag, [&overrides, key = key](double v) { overrides[key] = v; }, "")
            ->group("Overrides");

    // let --seed/--config/override flags appear after the subcommand name
    for (auto* sub : {gen, train, infer, bench, scan}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        Config cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& [k, v] : overrides) cfg.set_num(k, v);

        if (gen->parsed()) return cmd_gen_data(cfg, n, seed, out, sigma_obs);
        if (train->parsed()) return cmd_train(cfg, data_path, out, seed);
        if (infer->parsed())
            return cmd_infer(cfg, method, data_path, index, observed_frac, stream, weights, raw_sim, seed, out);
        if (bench->parsed()) {
            std::vector<std::string> methods;
            std::stringstream ss(methods_csv);
            std::string tok;
            while (std::getline(ss, tok, ','))
                if (!tok.empty()) methods.push_back(tok);
            return cmd_bench(cfg, methods, data_path, trials, observed_frac, weights, raw_sim, seed, out);
        }
        if (scan->parsed())
            return cmd_slack_scan(cfg, data_path, slack_threshold, observed_frac, weights, raw_sim, seed, out);
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const dimension_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
