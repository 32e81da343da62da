#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "rtabc/reach_sim.hpp"

using namespace rtabc;
using Catch::Matchers::WithinAbs;

namespace {

// independent FK oracle: chain of 4x4 homogeneous transforms built with Eigen
Eigen::Vector3d fk_oracle(const ArmModel& arm, const Vec& theta) {
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    T.block<3, 1>(0, 3) = Eigen::Vector3d(arm.base[0], arm.base[1], arm.base[2]);
    for (int i = 0; i < arm.dof(); ++i) {
        const auto& j = arm.joints[i];
        Eigen::Matrix4d step = Eigen::Matrix4d::Identity();
        step.block<3, 3>(0, 0) =
            Eigen::AngleAxisd(theta[i], Eigen::Vector3d(j.axis[0], j.axis[1], j.axis[2])).toRotationMatrix();
        Eigen::Matrix4d link = Eigen::Matrix4d::Identity();
        link.block<3, 1>(0, 3) = Eigen::Vector3d(j.link[0], j.link[1], j.link[2]);
        T = T * step * link;
    }
    return T.block<3, 1>(0, 3);
}

Vec random_theta(const ArmModel& arm, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    Vec theta(arm.dof());
    for (auto& t : theta) t = u(rng);
    return theta;
}

}  // namespace

TEST_CASE("forward kinematics: stretched and quarter-turn poses") {
    const auto arm = ArmModel::default_arm();
    CHECK(arm.max_reach() == 5.3);

    const Vec3 straight = forward_kinematics(arm, {0, 0, 0, 0});
    CHECK_THAT(straight[0], WithinAbs(5.3, 1e-12));
    CHECK_THAT(straight[1], WithinAbs(0.0, 1e-12));
    CHECK_THAT(straight[2], WithinAbs(0.0, 1e-12));

    const double half_pi = std::acos(0.0);
    const Vec3 up = forward_kinematics(arm, {half_pi, 0, 0, 0});
    CHECK_THAT(up[0], WithinAbs(0.0, 1e-12));
    CHECK_THAT(up[1], WithinAbs(5.3, 1e-12));

    // folding the second joint by pi doubles back the distal links
    const Vec3 folded = forward_kinematics(arm, {0, 2 * half_pi, 0, 0});
    CHECK_THAT(folded[0], WithinAbs(1.8 - 3.5, 1e-12));
    CHECK_THAT(folded[1], WithinAbs(0.0, 1e-12));

    CHECK_THROWS_AS(forward_kinematics(arm, {0, 0}), dimension_error);
}

TEST_CASE("forward kinematics matches a homogeneous-transform oracle") {
    const auto arm = ArmModel::default_arm();
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec theta = random_theta(arm, rng);
        const Vec3 hand = forward_kinematics(arm, theta);
        const Eigen::Vector3d expect = fk_oracle(arm, theta);
        for (int d = 0; d < 3; ++d) CHECK_THAT(hand[d], WithinAbs(expect(d), 1e-12));
    }
}

TEST_CASE("jacobian matches central finite differences") {
    const auto arm = ArmModel::default_arm();
    std::mt19937_64 rng(21);
    const double h = 1e-7;
    for (int trial = 0; trial < 20; ++trial) {
        const Vec theta = random_theta(arm, rng);
        const auto cols = jacobian(arm, theta);
        REQUIRE(cols.size() == size_t(arm.dof()));
        for (int j = 0; j < arm.dof(); ++j) {
            Vec plus = theta, minus = theta;
            plus[j] += h;
            minus[j] -= h;
            const Vec3 hp = forward_kinematics(arm, plus), hm = forward_kinematics(arm, minus);
            for (int d = 0; d < 3; ++d) CHECK_THAT(cols[j][d], WithinAbs((hp[d] - hm[d]) / (2 * h), 1e-6));
        }
    }
}

TEST_CASE("undamped pseudo-inverse satisfies the Moore-Penrose identities") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Vec3> cols(5);
        for (auto& c : cols) c = {g(rng), g(rng), g(rng)};
        const auto pinv = pseudo_inverse(cols, 0.0);
        // J (3x5) and J+ (5x3) as Eigen for the identity checks
        Eigen::MatrixXd J(3, 5), P(5, 3);
        for (int c = 0; c < 5; ++c)
            for (int r = 0; r < 3; ++r) {
                J(r, c) = cols[c][r];
                P(c, r) = pinv[c][r];
            }
        CHECK(((J * P * J) - J).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(((P * J * P) - P).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(((J * P) - (J * P).transpose()).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("damping regularizes singular configurations") {
    std::vector<Vec3> degenerate(4, Vec3{0.0, 0.0, 0.0});
    CHECK_THROWS_AS(pseudo_inverse(degenerate, 0.0), numeric_error);
    const auto pinv = pseudo_inverse(degenerate, 1e-3);  // lambda^2 I is invertible
    for (const auto& row : pinv)
        for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("controller at the goal commands near-zero task motion") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    ControllerState state;
    state.theta = {0.5, -0.8, 0.6, -0.3};
    const Vec3 goal = forward_kinematics(arm, state.theta);
    const Vec3 xdot = controller_step(arm, gains, state, goal, 1.0 / 30.0);
    CHECK(norm3(xdot) < 1e-12);
    // the hand stays put even though the nullspace term reshapes the posture
    const Vec3 hand = forward_kinematics(arm, state.theta);
    CHECK(norm3(sub(hand, goal)) < 1e-3);
}

TEST_CASE("nullspace motion leaves the hand nearly stationary") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    gains.kp = gains.ki = gains.kd = 0.0;
    gains.nullspace_gain = 1.0;
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        ControllerState state;
        state.theta = random_theta(arm, rng);
        const Vec3 before = forward_kinematics(arm, state.theta);
        const double dt = 1e-3;
        controller_step(arm, gains, state, before, dt);
        const Vec3 after = forward_kinematics(arm, state.theta);
        CHECK(norm3(sub(after, before)) < 1e-4);
    }
}

TEST_CASE("repulsion field pushes the hand away from an obstacle") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    gains.kp = gains.ki = gains.kd = 0.0;
    gains.nullspace_gain = 0.0;
    gains.k_rep = 1.0;
    gains.v_max = 1e9;  // keep the cap out of the way of the scaling checks
    ControllerState state;
    state.theta = {0.7, -1.1, 0.9, -0.5};
    const Vec3 hand = forward_kinematics(arm, state.theta);
    gains.obstacles = {{hand[0] - 0.3, hand[1], hand[2]}};  // obstacle behind the hand in x
    const Vec3 xdot = controller_step(arm, gains, state, hand, 1e-3);
    CHECK(xdot[0] > 0.0);  // pushed along +x, away from the obstacle
    CHECK_THAT(xdot[1], WithinAbs(0.0, 1e-12));

    // inverse-square scaling: twice the distance, a quarter of the force
    ControllerGains g2 = gains;
    g2.obstacles = {{hand[0] - 0.6, hand[1], hand[2]}};
    ControllerState s2;
    s2.theta = {0.7, -1.1, 0.9, -0.5};
    const Vec3 xdot2 = controller_step(arm, g2, s2, hand, 1e-3);
    CHECK_THAT(xdot2[0], WithinAbs(xdot[0] / 4.0, 1e-9));

    // coincident obstacle is skipped, not a crash
    ControllerGains g3 = gains;
    g3.obstacles = {hand};
    ControllerState s3;
    s3.theta = {0.7, -1.1, 0.9, -0.5};
    controller_step(arm, g3, s3, hand, 1e-3);
    CHECK(s3.repulsion_skipped);

    // linear spring variant
    ControllerGains g4 = gains;
    g4.linear_repulsion = true;
    g4.obstacles = {{hand[0] - 0.5, hand[1], hand[2]}};
    ControllerState s4;
    s4.theta = {0.7, -1.1, 0.9, -0.5};
    const Vec3 xdot4 = controller_step(arm, g4, s4, hand, 1e-3);
    CHECK_THAT(xdot4[0], WithinAbs(0.5 * g4.k_rep, 1e-12));
}

TEST_CASE("task-space speed is capped") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;  // kp = 10, far goal would demand far more than v_max
    ControllerState state;
    state.theta = default_init_theta(arm);
    const Vec3 xdot = controller_step(arm, gains, state, {4.0, -1.9, 0.0}, 1.0 / 30.0);
    CHECK_THAT(norm3(xdot), WithinAbs(gains.v_max, 1e-12));
}

TEST_CASE("trajectories have 90 samples and hold the goal after converging") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    const auto traj = simulate_trajectory(arm, gains, {2.0, 0.5}, default_init_theta(arm));
    REQUIRE(traj.samples.size() == 90);
    CHECK(traj.reachable);
    REQUIRE(traj.converged);
    const Vec3 goal = lift_goal(traj.goal);
    CHECK(norm3(sub(traj.samples.back(), goal)) < kConvergenceThreshold);
    // the held tail is constant
    CHECK(traj.samples[88] == traj.samples[89]);
    CHECK(traj.flat().size() == 270);

    const auto beyond = simulate_trajectory(arm, gains, {6.0, 0.0}, default_init_theta(arm));
    CHECK(!beyond.reachable);

    CHECK_THROWS_AS(lift_goal({1.0, 2.0, 3.0}), dimension_error);
    CHECK_THAT(lift_goal({1.0, 2.0}, 0.7)[2], WithinAbs(0.7, 1e-15));
}

TEST_CASE("default gains converge across the whole table") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    DatasetBounds bounds;
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> ux(bounds.x_lo, bounds.x_hi), uy(bounds.y_lo, bounds.y_hi);
    int converged = 0;
    for (int i = 0; i < 50; ++i) {
        const LatentPoint goal{ux(rng), uy(rng)};
        const auto t = simulate_trajectory(arm, gains, goal, default_init_theta(arm));
        converged += t.converged;
    }
    CHECK(converged == 50);
}

TEST_CASE("observation noise is seed-deterministic") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    const auto a = simulate_trajectory(arm, gains, {2.5, -1.0}, default_init_theta(arm), 0.05, 99);
    const auto b = simulate_trajectory(arm, gains, {2.5, -1.0}, default_init_theta(arm), 0.05, 99);
    const auto c = simulate_trajectory(arm, gains, {2.5, -1.0}, default_init_theta(arm), 0.05, 100);
    CHECK(a.samples == b.samples);
    CHECK(a.samples != c.samples);
    // noise perturbs but does not replace the clean signal
    const auto clean = simulate_trajectory(arm, gains, {2.5, -1.0}, default_init_theta(arm));
    double max_dev = 0.0;
    for (size_t i = 0; i < a.samples.size(); ++i)
        max_dev = std::max(max_dev, norm3(sub(a.samples[i], clean.samples[i])));
    CHECK(max_dev > 0.0);
    CHECK(max_dev < 0.05 * 6.0);
}

TEST_CASE("joint limits clamp and report") {
    const auto arm = ArmModel::default_arm();
    bool clamped = false;
    const Vec inside = arm.clamp_to_limits({0.1, -0.2, 0.3, -0.4}, &clamped);
    CHECK(!clamped);
    CHECK(inside == Vec{0.1, -0.2, 0.3, -0.4});
    const Vec out = arm.clamp_to_limits({3.5, 0.0, -4.0, 0.0}, &clamped);
    CHECK(clamped);
    CHECK(out[0] == 2.9);
    CHECK(out[2] == -2.9);
}

TEST_CASE("dataset files round-trip exactly") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    const auto gen = generate_dataset(arm, gains, 5, DatasetBounds{}, 0.02, 31);
    REQUIRE(gen.trajectories.size() == 5);
    write_dataset(gen.trajectories, "ds_test.txt");
    const Dataset data = read_dataset("ds_test.txt");
    REQUIRE(data.inputs.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(data.inputs[i] == gen.trajectories[i].goal);
        CHECK(data.targets[i] == gen.trajectories[i].flat());
    }
    std::remove("ds_test.txt");
}

TEST_CASE("dataset parser names the offending line") {
    {
        std::ofstream out("ds_bad.txt");
        out << "# header\n";
        out << "1.0 2.0";
        for (int i = 0; i < 270; ++i) out << " 0.0";
        out << "\n";
        out << "1.0 2.0 3.0\n";  // short record on line 3
    }
    try {
        read_dataset("ds_bad.txt");
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::remove("ds_bad.txt");

    {
        std::ofstream out("ds_long.txt");
        out << "1.0 2.0";
        for (int i = 0; i < 271; ++i) out << " 0.0";  // one extra field
        out << "\n";
    }
    CHECK_THROWS_AS(read_dataset("ds_long.txt"), parse_error);
    std::remove("ds_long.txt");

    CHECK_THROWS_AS(read_dataset("no_such_dataset.txt"), io_error);

    {
        std::ofstream out("ds_empty.txt");
        out << "# only a header\n";
    }
    CHECK_THROWS_AS(read_dataset("ds_empty.txt"), parse_error);
    std::remove("ds_empty.txt");
}

TEST_CASE("dataset generation is deterministic and bounds-checked") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    const auto a = generate_dataset(arm, gains, 4, DatasetBounds{}, 0.01, 7);
    const auto b = generate_dataset(arm, gains, 4, DatasetBounds{}, 0.01, 7);
    for (int i = 0; i < 4; ++i) {
        CHECK(a.trajectories[i].goal == b.trajectories[i].goal);
        CHECK(a.trajectories[i].samples == b.trajectories[i].samples);
    }
    CHECK_THROWS_AS(generate_dataset(arm, gains, 0, DatasetBounds{}, 0.0, 1), dimension_error);

    DatasetBounds far;
    far.x_lo = 10.0;
    far.x_hi = 12.0;
    CHECK_THROWS_AS(generate_dataset(arm, gains, 10, far, 0.0, 1), numeric_error);
}

TEST_CASE("simulator forward handle matches direct simulation") {
    const auto arm = ArmModel::default_arm();
    ControllerGains gains;
    const auto fwd = make_simulator_forward(arm, gains);
    const auto preds = fwd({{1.5, 0.3}, {3.0, -1.0}});
    REQUIRE(preds.size() == 2);
    CHECK(preds[0].size() == 270);
    const auto direct = simulate_trajectory(arm, gains, {1.5, 0.3}, default_init_theta(arm));
    CHECK(preds[0] == direct.flat());
}
