#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "rtabc/mlp.hpp"

using namespace rtabc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("construction validates layer sizes") {
    CHECK_THROWS_AS(Mlp(std::vector<int>{3}), dimension_error);
    CHECK_THROWS_AS(Mlp(std::vector<int>{3, 0, 2}), dimension_error);
    Mlp net({2, 5, 3});
    CHECK(net.input_dim() == 2);
    CHECK(net.output_dim() == 3);
    REQUIRE(net.weights.size() == 2);
    CHECK(net.weights[0].rows() == 5);
    CHECK(net.weights[0].cols() == 2);
    CHECK(net.biases[1].size() == 3);
}

TEST_CASE("single linear layer reproduces a hand-computed affine map") {
    Mlp net({2, 2});
    net.weights[0] << 1.0, 2.0, -0.5, 3.0;
    net.biases[0] << 0.25, -1.0;
    // identity scaling bounds are [-1,1] so no rescaling happens
    const auto out = forward_batch(net, {{0.5, -0.25}});
    CHECK_THAT(out[0][0], WithinAbs(1.0 * 0.5 + 2.0 * (-0.25) + 0.25, 1e-14));
    CHECK_THAT(out[0][1], WithinAbs(-0.5 * 0.5 + 3.0 * (-0.25) - 1.0, 1e-14));
}

TEST_CASE("two-layer forward matches a scalar tanh oracle") {
    Mlp net({1, 2, 1});
    net.weights[0] << 0.7, -1.3;
    net.biases[0] << 0.1, 0.2;
    net.weights[1] << 2.0, -0.4;
    net.biases[1] << 0.05;
    const double x = 0.3;
    const double h0 = std::tanh(0.7 * x + 0.1), h1 = std::tanh(-1.3 * x + 0.2);
    const double y = 2.0 * h0 - 0.4 * h1 + 0.05;
    CHECK_THAT(forward_batch(net, {{x}})[0][0], WithinAbs(y, 1e-14));
}

TEST_CASE("input/output rescaling round-trips") {
    Mlp net({1, 1});
    net.weights[0] << 1.0;
    net.biases[0] << 0.0;
    net.set_scaling({0.0}, {10.0}, {-4.0}, {4.0});
    // x=5 scales to 0, identity net outputs 0, unscales to 0
    CHECK_THAT(forward_batch(net, {{5.0}})[0][0], WithinAbs(0.0, 1e-14));
    // x=10 scales to 1 -> unscale(1) = 4
    CHECK_THAT(forward_batch(net, {{10.0}})[0][0], WithinAbs(4.0, 1e-14));
    CHECK_THAT(net.scale_output(net.unscale_output(0.37, 0), 0), WithinAbs(0.37, 1e-12));
    CHECK_THROWS_AS(net.set_scaling({0.0}, {0.0}, {-1.0}, {1.0}), numeric_error);
    CHECK_THROWS_AS(net.set_scaling({0.0, 1.0}, {1.0, 2.0}, {-1.0}, {1.0}), dimension_error);
    CHECK_THROWS_AS(forward_batch(net, {{1.0, 2.0}}), dimension_error);
}

TEST_CASE("backprop gradient matches central finite differences") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 0.7);
    Mlp net({2, 3, 2}, 41);
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(2, [&](int) { return g(rng); });
    const Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(2, [&](int) { return g(rng); });

    std::vector<Eigen::MatrixXd> gw;
    std::vector<Eigen::VectorXd> gb;
    for (size_t l = 0; l < net.weights.size(); ++l) {
        gw.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        gb.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    detail::backprop_sample(net, x, y, gw, gb);

    auto loss_at = [&](const Mlp& n) {
        Eigen::VectorXd a = x;
        for (size_t l = 0; l < n.weights.size(); ++l) {
            a = n.weights[l] * a + n.biases[l];
            if (l + 1 < n.weights.size()) a = a.array().tanh().matrix();
        }
        return (a - y).squaredNorm();
    };
    const double h = 1e-6;
    for (size_t l = 0; l < net.weights.size(); ++l) {
        for (int i = 0; i < net.weights[l].rows(); ++i)
            for (int j = 0; j < net.weights[l].cols(); ++j) {
                Mlp plus = net, minus = net;
                plus.weights[l](i, j) += h;
                minus.weights[l](i, j) -= h;
                const double fd = (loss_at(plus) - loss_at(minus)) / (2 * h);
                CHECK_THAT(gw[l](i, j), WithinAbs(fd, 1e-4 * std::max(1.0, std::abs(fd))));
            }
        for (int i = 0; i < net.biases[l].size(); ++i) {
            Mlp plus = net, minus = net;
            plus.biases[l](i) += h;
            minus.biases[l](i) -= h;
            const double fd = (loss_at(plus) - loss_at(minus)) / (2 * h);
            CHECK_THAT(gb[l](i), WithinAbs(fd, 1e-4 * std::max(1.0, std::abs(fd))));
        }
    }
}

TEST_CASE("noiseless SGD drives a realizable problem to near-zero loss") {
    // target is itself a small tanh net, so the model class contains it
    Mlp teacher({1, 4, 1}, 7);
    Dataset data;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double x = u(rng);
        data.inputs.push_back({x});
        data.targets.push_back(forward_batch(teacher, {{x}})[0]);
    }
    Mlp net({1, 16, 1}, 99);
    TrainConfig cfg;
    cfg.epsilon_star = 0.0;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 16;
    cfg.epochs = 800;
    cfg.seed = 123;
    const auto report = train_sgd(net, data, cfg);
    REQUIRE(!report.diverged);
    REQUIRE(report.epoch_mean_loss.size() == 800);
    CHECK(report.epoch_mean_loss.back() < 1e-3);
    CHECK(report.epoch_mean_loss.back() < report.epoch_mean_loss.front() / 100.0);
}

TEST_CASE("per-presentation noise regresses to the clean mean") {
    // constant target with heavy noise: the fit should land on the mean, not
    // on any particular corrupted draw
    Dataset data;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng);
        data.inputs.push_back({x});
        data.targets.push_back({0.3});
    }
    Mlp net({1, 8, 1}, 5);
    TrainConfig cfg;
    cfg.epsilon_star = 0.4;
    cfg.learning_rate = 0.02;
    cfg.batch_size = 32;
    cfg.epochs = 600;
    cfg.seed = 77;
    const auto report = train_sgd(net, data, cfg);
    REQUIRE(!report.diverged);
    double max_err = 0.0;
    for (double x = -0.9; x <= 0.9; x += 0.1)
        max_err = std::max(max_err, std::abs(forward_batch(net, {{x}})[0][0] - 0.3));
    CHECK(max_err < 0.1);
    // residual loss stays near the noise floor (scaled-space variance 0.4^2)
    double tail = 0.0;
    for (size_t i = report.epoch_mean_loss.size() - 50; i < report.epoch_mean_loss.size(); ++i)
        tail += report.epoch_mean_loss[i];
    tail /= 50.0;
    CHECK_THAT(tail, WithinAbs(0.16, 0.06));
}

TEST_CASE("training is deterministic for a fixed seed") {
    Dataset data;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 64; ++i) {
        const double x = u(rng);
        data.inputs.push_back({x});
        data.targets.push_back({std::sin(2 * x)});
    }
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.seed = 42;
    Mlp a({1, 8, 1}, 9), b({1, 8, 1}, 9);
    const auto ra = train_sgd(a, data, cfg);
    const auto rb = train_sgd(b, data, cfg);
    CHECK(ra.epoch_mean_loss == rb.epoch_mean_loss);
    save_weights(a, "det_a.net");
    save_weights(b, "det_b.net");
    CHECK(slurp("det_a.net") == slurp("det_b.net"));
    std::remove("det_a.net");
    std::remove("det_b.net");
}

TEST_CASE("training rejects invalid configuration and data") {
    Dataset data;
    data.inputs.push_back({0.0});
    data.targets.push_back({0.0});
    Mlp net({1, 2, 1});
    TrainConfig bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train_sgd(net, data, bad), numeric_error);
    bad = TrainConfig{};
    bad.epsilon_star = -0.1;
    CHECK_THROWS_AS(train_sgd(net, data, bad), numeric_error);
    Dataset mismatched;
    mismatched.inputs.push_back({0.0});
    CHECK_THROWS_AS(train_sgd(net, mismatched, TrainConfig{}), dimension_error);
    Dataset wrong_dim;
    wrong_dim.inputs.push_back({0.0});
    wrong_dim.targets.push_back({0.0, 0.0});
    CHECK_THROWS_AS(train_sgd(net, wrong_dim, TrainConfig{}), dimension_error);
}

TEST_CASE("weight files round-trip bit-exactly") {
    Mlp net({2, 7, 3}, 1234);
    net.set_scaling({-3.0, 0.0}, {3.0, 5.0}, Vec(3, -2.0), Vec(3, 9.0));
    save_weights(net, "roundtrip.net");
    const Mlp loaded = load_weights("roundtrip.net");
    REQUIRE(loaded.sizes == net.sizes);
    for (size_t l = 0; l < net.weights.size(); ++l) {
        CHECK(loaded.weights[l] == net.weights[l]);
        CHECK(loaded.biases[l] == net.biases[l]);
    }
    CHECK(loaded.in_lo == net.in_lo);
    CHECK(loaded.in_hi == net.in_hi);
    CHECK(loaded.out_lo == net.out_lo);
    CHECK(loaded.out_hi == net.out_hi);
    // saving the loaded net reproduces the file byte-for-byte
    save_weights(loaded, "roundtrip2.net");
    CHECK(slurp("roundtrip.net") == slurp("roundtrip2.net"));
    std::remove("roundtrip.net");
    std::remove("roundtrip2.net");
}

TEST_CASE("weight loader distinguishes failure modes") {
    Mlp net({2, 3, 2}, 5);
    save_weights(net, "probe.net");
    const std::string good = slurp("probe.net");

    auto write_file = [](const std::string& path, const std::string& bytes) {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    };

    SECTION("bad magic") {
        std::string bad = good;
        bad[0] = 'X';
        write_file("bad.net", bad);
        try {
            load_weights("bad.net");
            FAIL("expected weight_file_error");
        } catch (const weight_file_error& e) {
            CHECK(e.kind == weight_file_error::Kind::bad_magic);
        }
    }
    SECTION("bad version") {
        std::string bad = good;
        bad[8] = 99;
        write_file("bad.net", bad);
        try {
            load_weights("bad.net");
            FAIL("expected weight_file_error");
        } catch (const weight_file_error& e) {
            CHECK(e.kind == weight_file_error::Kind::bad_version);
        }
    }
    SECTION("truncated") {
        write_file("bad.net", good.substr(0, good.size() / 2));
        try {
            load_weights("bad.net");
            FAIL("expected weight_file_error");
        } catch (const weight_file_error& e) {
            CHECK(e.kind == weight_file_error::Kind::truncated);
        }
    }
    SECTION("malformed layer size") {
        std::string bad = good;
        // zero out the first layer-size field (offset: 8 magic + 4 version + 4 count)
        for (int i = 0; i < 4; ++i) bad[16 + i] = 0;
        write_file("bad.net", bad);
        try {
            load_weights("bad.net");
            FAIL("expected weight_file_error");
        } catch (const weight_file_error& e) {
            CHECK(e.kind == weight_file_error::Kind::malformed);
        }
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_weights("no_such_file.net"), io_error);
    }
    std::remove("probe.net");
    std::remove("bad.net");
}
