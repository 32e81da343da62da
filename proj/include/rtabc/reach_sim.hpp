#ifndef RTABC_REACH_SIM_HPP
#define RTABC_REACH_SIM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rtabc/common.hpp"
#include "rtabc/error_model.hpp"
#include "rtabc/mlp.hpp"

namespace rtabc {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline double norm3(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

// Rodrigues rotation about a unit axis.
inline Mat3 axis_angle_matrix(const Vec3& axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    const double x = axis[0], y = axis[1], z = axis[2];
    return {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
             {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
             {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
}

inline Mat3 matmul3(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int l = 0; l < 3; ++l) r[i][j] += a[i][l] * b[l][j];
    return r;
}

inline Vec3 matvec3(const Mat3& m, const Vec3& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

struct Joint {
    Vec3 axis;          // rotation axis in the local frame, unit length
    Vec3 link;          // translation to the next joint after rotating
    double lo = -2.9;   // joint limits, radians
    double hi = 2.9;
};

// Serial kinematic chain. The default is a desk-scale 4-DOF planar arm whose
// base sits at the table edge; the 4 m x 4 m table rectangle lies entirely in
// front of it so reaching paths never fold through the base singularity.
struct ArmModel {
    std::vector<Joint> joints;
    Vec3 base = {0.0, 0.0, 0.0};
    Vec theta_sec;  // secondary posture objective, radians

    static ArmModel default_arm() {
        ArmModel arm;
        arm.joints = {
            Joint{{0, 0, 1}, {1.8, 0, 0}},
            Joint{{0, 0, 1}, {1.5, 0, 0}},
            Joint{{0, 0, 1}, {1.2, 0, 0}},
            Joint{{0, 0, 1}, {0.8, 0, 0}},
        };
        arm.theta_sec = {0.7, -1.1, 0.9, -0.5};
        return arm;
    }

    int dof() const { return static_cast<int>(joints.size()); }

    double max_reach() const {
        double r = 0.0;
        for (const auto& j : joints) r += norm3(j.link);
        return r;
    }

    Vec clamp_to_limits(const Vec& theta, bool* clamped = nullptr) const {
        Vec out = theta;
        if (clamped) *clamped = false;
        for (int i = 0; i < dof(); ++i) {
            if (out[i] < joints[i].lo || out[i] > joints[i].hi) {
                out[i] = std::clamp(out[i], joints[i].lo, joints[i].hi);
                if (clamped) *clamped = true;
            }
        }
        return out;
    }
};

struct FkFrames {
    Vec3 hand;
    std::vector<Vec3> joint_origins;  // world position of each joint
    std::vector<Vec3> joint_axes;     // world rotation axis of each joint
};

inline FkFrames forward_kinematics_frames(const ArmModel& arm, const Vec& theta) {
    if (static_cast<int>(theta.size()) != arm.dof())
        throw dimension_error("forward_kinematics: theta dim mismatch");
    FkFrames fk;
    Mat3 R{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Vec3 p = arm.base;
    for (int i = 0; i < arm.dof(); ++i) {
        fk.joint_origins.push_back(p);
        fk.joint_axes.push_back(matvec3(R, arm.joints[i].axis));
        R = matmul3(R, axis_angle_matrix(arm.joints[i].axis, theta[i]));
        const Vec3 dl = matvec3(R, arm.joints[i].link);
        p = {p[0] + dl[0], p[1] + dl[1], p[2] + dl[2]};
    }
    fk.hand = p;
    return fk;
}

inline Vec3 forward_kinematics(const ArmModel& arm, const Vec& theta) {
    return forward_kinematics_frames(arm, theta).hand;
}

// Geometric Jacobian of the hand position, 3 x J, column-major by joint:
// column i = axis_i x (hand - origin_i).
inline std::vector<Vec3> jacobian(const ArmModel& arm, const Vec& theta) {
    const FkFrames fk = forward_kinematics_frames(arm, theta);
    std::vector<Vec3> cols(arm.dof());
    for (int i = 0; i < arm.dof(); ++i) cols[i] = cross(fk.joint_axes[i], sub(fk.hand, fk.joint_origins[i]));
    return cols;
}

// Damped least-squares pseudo-inverse J^T (J J^T + lambda^2 I)^-1, J x 3.
inline std::vector<Vec3> pseudo_inverse(const std::vector<Vec3>& jac_cols, double damping = 1e-3) {
    const int J = static_cast<int>(jac_cols.size());
    Mat3 A{};  // J J^T + lambda^2 I
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            for (int c = 0; c < J; ++c) A[i][j] += jac_cols[c][i] * jac_cols[c][j];
            if (i == j) A[i][j] += damping * damping;
        }
    // closed-form 3x3 inverse via adjugate
    const double det = A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
                       A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
                       A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
    if (det == 0.0) throw numeric_error("pseudo_inverse: singular J J^T (use damping > 0)");
    Mat3 Ainv;
    Ainv[0][0] = (A[1][1] * A[2][2] - A[1][2] * A[2][1]) / det;
    Ainv[0][1] = (A[0][2] * A[2][1] - A[0][1] * A[2][2]) / det;
    Ainv[0][2] = (A[0][1] * A[1][2] - A[0][2] * A[1][1]) / det;
    Ainv[1][0] = (A[1][2] * A[2][0] - A[1][0] * A[2][2]) / det;
    Ainv[1][1] = (A[0][0] * A[2][2] - A[0][2] * A[2][0]) / det;
    Ainv[1][2] = (A[0][2] * A[1][0] - A[0][0] * A[1][2]) / det;
    Ainv[2][0] = (A[1][0] * A[2][1] - A[1][1] * A[2][0]) / det;
    Ainv[2][1] = (A[0][1] * A[2][0] - A[0][0] * A[2][1]) / det;
    Ainv[2][2] = (A[0][0] * A[1][1] - A[0][1] * A[1][0]) / det;
    std::vector<Vec3> pinv(J);
    for (int r = 0; r < J; ++r)
        for (int c = 0; c < 3; ++c)
            pinv[r][c] = jac_cols[r][0] * Ainv[0][c] + jac_cols[r][1] * Ainv[1][c] + jac_cols[r][2] * Ainv[2][c];
    return pinv;
}

struct ControllerGains {
    double kp = 10.0;
    double ki = 0.0;
    double kd = 0.1;
    double k_rep = 0.0;
    double nullspace_gain = 2.0;
    std::vector<Vec3> obstacles;
    bool linear_repulsion = false;  // literal (x - x_obj) * K_rep spring form
    double damping = 1e-3;
    double v_max = 2.0;             // task-space speed cap, m/s
};

struct ControllerState {
    Vec theta;
    Vec3 integral_e = {0, 0, 0};
    Vec3 prev_e = {0, 0, 0};
    bool has_prev_e = false;
    bool repulsion_skipped = false;  // obstacle coincident with the hand
};

// One velocity-level control step: task-space PID plus obstacle force field,
// mapped to joint space through the damped pseudo-inverse with the secondary
// posture projected through I - J+J. Integrates theta by explicit Euler.
inline Vec3 controller_step(const ArmModel& arm, const ControllerGains& gains, ControllerState& state,
                            const Vec3& goal, double dt) {
    if (!(dt > 0.0)) throw numeric_error("controller_step: dt must be > 0");
    const FkFrames fk = forward_kinematics_frames(arm, state.theta);
    const Vec3 e = sub(goal, fk.hand);
    for (double v : e)
        if (!std::isfinite(v)) throw numeric_error("controller_step: non-finite state");

    Vec3 de = {0, 0, 0};
    if (state.has_prev_e)
        for (int i = 0; i < 3; ++i) de[i] = (e[i] - state.prev_e[i]) / dt;
    for (int i = 0; i < 3; ++i) state.integral_e[i] += e[i] * dt;

    Vec3 xdot;
    for (int i = 0; i < 3; ++i)
        xdot[i] = gains.kp * e[i] + gains.ki * state.integral_e[i] + gains.kd * de[i];
    state.repulsion_skipped = false;
    for (const auto& obs : gains.obstacles) {
        const Vec3 d = sub(fk.hand, obs);
        const double dist = norm3(d);
        if (gains.linear_repulsion) {
            for (int i = 0; i < 3; ++i) xdot[i] += d[i] * gains.k_rep;
        } else if (dist < 1e-6) {
            state.repulsion_skipped = true;  // singular repulsion, term skipped
        } else {
            for (int i = 0; i < 3; ++i) xdot[i] += d[i] / (dist * dist * dist) * gains.k_rep;
        }
    }
    const double speed = norm3(xdot);
    if (speed > gains.v_max)
        for (int i = 0; i < 3; ++i) xdot[i] *= gains.v_max / speed;

    const auto jac = jacobian(arm, state.theta);
    const auto pinv = pseudo_inverse(jac, gains.damping);
    const int J = arm.dof();
    Vec theta_dot(J, 0.0);
    for (int r = 0; r < J; ++r)
        for (int c = 0; c < 3; ++c) theta_dot[r] += pinv[r][c] * xdot[c];
    // nullspace projector I - J+J applied to the posture error
    std::vector<double> posture_err(J);
    for (int i = 0; i < J; ++i) posture_err[i] = arm.theta_sec[i] - state.theta[i];
    for (int r = 0; r < J; ++r) {
        double proj = posture_err[r];
        for (int c = 0; c < J; ++c) {
            double pjj = 0.0;  // (J+J)[r][c]
            for (int i = 0; i < 3; ++i) pjj += pinv[r][i] * jac[c][i];
            proj -= pjj * posture_err[c];
        }
        theta_dot[r] += gains.nullspace_gain * proj;
    }

    for (int i = 0; i < J; ++i) state.theta[i] += theta_dot[i] * dt;
    state.theta = arm.clamp_to_limits(state.theta);
    state.prev_e = e;
    state.has_prev_e = true;
    return xdot;
}

constexpr int kTrajectorySamples = 90;
constexpr double kSampleRateHz = 30.0;
constexpr double kConvergenceThreshold = 5e-3;  // meters

struct Trajectory {
    std::vector<Vec3> samples;  // exactly 90 hand positions at 30 Hz
    LatentPoint goal;           // 2D table-plane goal
    bool reachable = true;
    bool converged = false;
    std::uint64_t seed = 0;

    Vec flat() const {
        Vec out;
        out.reserve(samples.size() * 3);
        for (const auto& s : samples)
            out.insert(out.end(), s.begin(), s.end());
        return out;
    }
};

inline Vec3 lift_goal(const LatentPoint& goal_xy, double table_height = 0.0) {
    if (goal_xy.size() != 2) throw dimension_error("lift_goal: expected 2D table-plane goal");
    return {goal_xy[0], goal_xy[1], table_height};
}

// 3 seconds of hand trajectory at 30 Hz; after convergence the hand holds the
// goal position for the remaining samples. Observation noise is i.i.d.
// Gaussian per coordinate, drawn from the seed.
inline Trajectory simulate_trajectory(const ArmModel& arm, const ControllerGains& gains, const LatentPoint& goal_xy,
                                      const Vec& init_theta, double sigma_obs = 0.0, std::uint64_t seed = 0) {
    Trajectory traj;
    traj.goal = goal_xy;
    traj.seed = seed;
    const Vec3 goal = lift_goal(goal_xy);
    const double dist = norm3(sub(goal, arm.base));
    traj.reachable = dist <= 0.98 * arm.max_reach();

    ControllerState state;
    state.theta = arm.clamp_to_limits(init_theta);
    const double dt = 1.0 / kSampleRateHz;
    Vec3 held{};
    bool holding = false;
    for (int s = 0; s < kTrajectorySamples; ++s) {
        if (!holding) {
            controller_step(arm, gains, state, goal, dt);
            const Vec3 hand = forward_kinematics(arm, state.theta);
            if (norm3(sub(goal, hand)) < kConvergenceThreshold) {
                holding = true;
                traj.converged = true;
                held = hand;
            }
            traj.samples.push_back(hand);
        } else {
            traj.samples.push_back(held);
        }
    }
    for (const auto& s : traj.samples)
        for (double v : s)
            if (!std::isfinite(v)) throw numeric_error("simulate_trajectory: diverged (non-finite sample)");

    if (sigma_obs > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, sigma_obs);
        for (auto& s : traj.samples)
            for (auto& v : s) v += gauss(rng);
    }
    return traj;
}

// Default init posture: the secondary objective itself, a mildly folded elbow
// with the hand hovering past the far table edge.
inline Vec default_init_theta(const ArmModel& arm) {
    return arm.theta_sec;
}

struct DatasetBounds {
    double x_lo = 0.4, x_hi = 4.4, y_lo = -2.0, y_hi = 2.0;  // table rectangle, meters
};

constexpr const char* kDatasetFormatVersion = "1";

// One record per line: goal_x goal_y then 270 floats (90 x y z triples).
inline void write_dataset(const std::vector<Trajectory>& trajs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("write_dataset: cannot open " + path);
    out << "# goal_x goal_y hand_xyz[90x3]  (meters)\n";
    out.precision(17);
    for (const auto& t : trajs) {
        out << t.goal[0] << ' ' << t.goal[1];
        for (const auto& s : t.samples) out << ' ' << s[0] << ' ' << s[1] << ' ' << s[2];
        out << '\n';
    }
    if (!out) throw io_error("write_dataset: write failed for " + path);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_dataset: cannot open " + path);
    Dataset data;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Vec goal(2), target(kTrajectorySamples * 3);
        if (!(ss >> goal[0] >> goal[1]))
            throw parse_error("read_dataset: bad goal at line " + std::to_string(lineno));
        for (auto& v : target)
            if (!(ss >> v)) throw parse_error("read_dataset: short record at line " + std::to_string(lineno));
        double extra;
        if (ss >> extra) throw parse_error("read_dataset: trailing fields at line " + std::to_string(lineno));
        data.inputs.push_back(std::move(goal));
        data.targets.push_back(std::move(target));
    }
    if (data.inputs.empty()) throw parse_error("read_dataset: no records in " + path);
    return data;
}

struct GenDatasetResult {
    std::vector<Trajectory> trajectories;
    int n_unreachable_rejected = 0;
};

// Samples goals uniformly in the table rectangle and simulates each. Aborts
// if more than half of the attempted goals fall outside the workspace.
inline GenDatasetResult generate_dataset(const ArmModel& arm, const ControllerGains& gains, int n,
                                         const DatasetBounds& bounds, double sigma_obs, std::uint64_t seed) {
    if (n < 1) throw dimension_error("generate_dataset: n must be >= 1");
    GenDatasetResult res;
    std::mt19937_64 rng(subseed(seed, 0x60a15));
    std::uniform_real_distribution<double> ux(bounds.x_lo, bounds.x_hi), uy(bounds.y_lo, bounds.y_hi);
    const Vec init = default_init_theta(arm);
    int attempts = 0;
    while (static_cast<int>(res.trajectories.size()) < n) {
        ++attempts;
        const LatentPoint goal{ux(rng), uy(rng)};
        if (attempts > 2 * n && res.n_unreachable_rejected * 2 > attempts)
            throw numeric_error("generate_dataset: over half of sampled goals are unreachable; "
                                "table bounds exceed the arm workspace (max reach " +
                                std::to_string(arm.max_reach()) + " m)");
        auto t = simulate_trajectory(arm, gains, goal, init, sigma_obs,
                                     subseed(seed, res.trajectories.size() + 1));
        if (!t.reachable) {
            ++res.n_unreachable_rejected;
            continue;
        }
        res.trajectories.push_back(std::move(t));
    }
    return res;
}

// Raw-simulator forward handle for the inference pipeline: 2D goal -> flat
// 270-sample noiseless trajectory.
inline ForwardFn make_simulator_forward(const ArmModel& arm, const ControllerGains& gains) {
    const Vec init = default_init_theta(arm);
    return [arm, gains, init](const std::vector<LatentPoint>& xs) {
        std::vector<Vec> out;
        out.reserve(xs.size());
        for (const auto& x : xs) out.push_back(simulate_trajectory(arm, gains, x, init).flat());
        return out;
    };
}

}  // namespace rtabc

#endif
