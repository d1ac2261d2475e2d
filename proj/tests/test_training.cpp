#include <cmath>
#include <sstream>

#include <doctest.h>

#include "spgsn/error.hpp"
#include "spgsn/rng.hpp"
#include "spgsn/training.hpp"

using namespace spgsn;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.blocks = 1;
    cfg.scatter_layers = 1;
    cfg.filter_order = 1;
    cfg.hidden = 4;
    cfg.joints = 2;
    cfg.partition_name = "upper_lower";
    cfg.upper_joints = {0};
    cfg.lower_joints = {1};
    cfg.history = 4;
    cfg.horizon = 2;
    return cfg;
}

MotionClip clip_of(std::size_t frames, std::size_t joints,
                   const std::function<double(std::size_t, std::size_t, std::size_t)>& f) {
    MotionClip c;
    c.joints = joints;
    c.frame_rate = 25.0;
    c.data.resize(frames * joints * 3);
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t j = 0; j < joints; ++j)
            for (std::size_t k = 0; k < 3; ++k) c.at(t, j, k) = f(t, j, k);
    return c;
}

std::vector<ClipPair> toy_pairs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ClipPair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        const double phase = rng.uniform(0.0, 6.28);
        MotionClip whole = clip_of(6, 2, [&](std::size_t t, std::size_t j, std::size_t k) {
            return 0.3 * std::sin(0.4 * static_cast<double>(t) + phase + 0.5 * j + 0.3 * k);
        });
        auto segs = segment_clips(whole, 4, 2, 6);
        pairs.push_back(segs.at(0));
    }
    return pairs;
}

}  // namespace

TEST_CASE("learning-rate schedule: paper values, nonincreasing, positive") {
    Schedule s;  // 0.001, 0.96 every 2 epochs
    CHECK(s.lr(0) == 0.001);
    CHECK(s.lr(1) == 0.001);
    CHECK(s.lr(2) == doctest::Approx(0.00096).epsilon(1e-12));
    CHECK(s.lr(3) == doctest::Approx(0.00096).epsilon(1e-12));
    CHECK(s.lr(4) == doctest::Approx(0.0009216).epsilon(1e-12));
    double prev = s.lr(0);
    for (int e = 1; e < 200; ++e) {
        CHECK(s.lr(e) <= prev);
        CHECK(s.lr(e) > 0.0);
        prev = s.lr(e);
    }
}

TEST_CASE("loss: exact, analytic, homogeneous") {
    Tensor pred = Tensor::from({1, 3}, {3, 4, 0});
    Tensor zero = Tensor::zeros({1, 3});
    CHECK(loss({zero}, {zero}).item() == 0.0);
    // one sample, one frame, one joint: ||(3,4,0)||^2 / (1*1) = 25
    CHECK(loss({pred}, {zero}).item() == doctest::Approx(25.0));
    // halving all errors quarters the loss
    Tensor half = scale(pred, 0.5);
    CHECK(loss({half}, {zero}).item() == doctest::Approx(6.25));

    CHECK_THROWS_AS(loss({}, {}), ContractError);
    CHECK_THROWS_AS(loss({pred}, {Tensor::zeros({2, 3})}), ContractError);

    // normalization: loss is independent of horizon for the same per-frame error
    Tensor p2 = Tensor::from({2, 3}, {3, 4, 0, 3, 4, 0});
    CHECK(loss({p2}, {Tensor::zeros({2, 3})}).item() == doctest::Approx(25.0));
}

TEST_CASE("mpjpe: analytic cases and metric properties") {
    MotionClip exact = clip_of(2, 2, [](std::size_t, std::size_t, std::size_t) { return 1.0; });
    CHECK(mpjpe(exact, exact, 1) == 0.0);
    CHECK(mpjpe(exact, exact, 2) == 0.0);

    MotionClip off = exact;
    for (std::size_t j = 0; j < 2; ++j) off.at(0, j, 2) += 1.0;  // every joint off by (0,0,1)
    CHECK(mpjpe(off, exact, 1) == doctest::Approx(1.0));

    MotionClip one_join = exact;
    one_join.at(0, 0, 0) += 3.0;
    one_join.at(0, 0, 1) += 4.0;  // joint 0 off by (3,4,0), joint 1 exact
    CHECK(mpjpe(one_join, exact, 1) == doctest::Approx(2.5));

    CHECK_THROWS_AS(mpjpe(exact, exact, 0), ContractError);
    CHECK_THROWS_AS(mpjpe(exact, exact, 3), ContractError);

    // symmetry and the per-term triangle inequality
    Rng rng(1);
    auto r = [&](std::size_t, std::size_t, std::size_t) { return rng.uniform(-1.0, 1.0); };
    MotionClip p = clip_of(1, 3, r), q = clip_of(1, 3, r), s = clip_of(1, 3, r);
    CHECK(mpjpe(p, q, 1) == doctest::Approx(mpjpe(q, p, 1)));
    CHECK(mpjpe(p, s, 1) <= mpjpe(p, q, 1) + mpjpe(q, s, 1) + 1e-12);
    CHECK(mpjpe(p, q, 1) >= 0.0);
}

TEST_CASE("adam: first step, no-op on zero gradients, hand-unrolled recurrence") {
    auto make_param = [](double v) {
        std::vector<std::pair<std::string, Tensor>> params;
        params.emplace_back("theta", Tensor::from({1, 1}, {v}, true));
        return params;
    };

    SUBCASE("bias-corrected first step has magnitude lr/(1+eps)") {
        auto params = make_param(1.0);
        params[0].second.zero_grad();
        backward(sum(params[0].second));  // gradient 1
        AdamState state = AdamState::for_params(params);
        adam_step(params, state, 0.1);
        const double expect = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
        CHECK(params[0].second.item() == doctest::Approx(expect).epsilon(1e-14));
        CHECK(state.step == 1);
    }

    SUBCASE("zero gradient leaves parameters untouched, advances the step") {
        auto params = make_param(2.5);
        params[0].second.zero_grad();
        AdamState state = AdamState::for_params(params);
        adam_step(params, state, 0.1);
        CHECK(params[0].second.item() == 2.5);
        CHECK(state.step == 1);
    }

    SUBCASE("two steps with constant gradient match the hand recurrence") {
        const double g = 0.7, lr = 0.05;
        auto params = make_param(1.0);
        AdamState state = AdamState::for_params(params);
        double theta = 1.0, m = 0.0, v = 0.0;
        for (int step = 1; step <= 2; ++step) {
            params[0].second.zero_grad();
            backward(scale(sum(params[0].second), g));
            adam_step(params, state, lr);
            // independent recurrence
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            const double mhat = m / (1.0 - std::pow(0.9, step));
            const double vhat = v / (1.0 - std::pow(0.999, step));
            theta -= lr * mhat / (std::sqrt(vhat) + 1e-8);
            CHECK(params[0].second.item() == doctest::Approx(theta).epsilon(1e-14));
        }
    }

    SUBCASE("non-finite gradients abort before any mutation") {
        auto params = make_param(1.0);
        params[0].second.zero_grad();
        params[0].second.node()->grad[0] = std::nan("");
        AdamState state = AdamState::for_params(params);
        CHECK_THROWS_AS(adam_step(params, state, 0.1), ContractError);
        CHECK(params[0].second.item() == 1.0);
        CHECK(state.step == 0);
    }
}

TEST_CASE("split_dataset: every fifth clip validates") {
    std::vector<MotionClip> clips(7);
    for (std::size_t i = 0; i < clips.size(); ++i) {
        clips[i].joints = 2;
        clips[i].data.assign(6, static_cast<double>(i));
    }
    std::vector<MotionClip> train_clips, val_clips;
    split_dataset(clips, train_clips, val_clips);
    CHECK(train_clips.size() == 6);
    REQUIRE(val_clips.size() == 1);
    CHECK(val_clips[0].data[0] == 4.0);
}

TEST_CASE("train: logged lr follows the schedule and runs are byte-identical") {
    ModelConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 7;
    tc.batch_size = 4;

    auto run = [&] {
        SpgsnModel model(cfg, tc.seed);
        auto pairs = toy_pairs(6, 99);
        std::vector<ClipPair> val(pairs.begin() + 4, pairs.end());
        pairs.resize(4);
        std::ostringstream metrics;
        TrainResult result = train(model, pairs, val, tc, &metrics);
        return std::make_pair(result, metrics.str());
    };
    auto [r1, m1] = run();
    auto [r2, m2] = run();

    REQUIRE(r1.log.size() == 5);
    CHECK(r1.log[0].lr == 0.001);
    CHECK(r1.log[1].lr == 0.001);
    CHECK(r1.log[2].lr == doctest::Approx(0.00096).epsilon(1e-12));
    CHECK(r1.log[3].lr == doctest::Approx(0.00096).epsilon(1e-12));
    CHECK(r1.log[4].lr == doctest::Approx(0.0009216).epsilon(1e-12));

    CHECK(m1 == m2);  // byte-identical metrics
    for (std::size_t e = 0; e < r1.log.size(); ++e) {
        CHECK(r1.log[e].train_loss == r2.log[e].train_loss);
        REQUIRE_FALSE(r1.log[e].val_mpjpe.empty());
        CHECK(r1.log[e].val_mpjpe[0].second == r2.log[e].val_mpjpe[0].second);
    }

    // metrics lines are JSON with the expected fields
    CHECK(m1.find("\"epoch\":0") != std::string::npos);
    CHECK(m1.find("\"lr\":0.001") != std::string::npos);
    CHECK(m1.find("\"val_mpjpe\":{\"2\":") != std::string::npos);
}

TEST_CASE("training on identical pairs trends the loss downward over 20 epochs") {
    ModelConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 20;
    tc.seed = 3;
    tc.batch_size = 32;

    auto one = toy_pairs(1, 5).front();
    std::vector<ClipPair> pairs(8, one);
    SpgsnModel model(cfg, tc.seed);
    TrainResult result = train(model, pairs, {}, tc);
    REQUIRE(result.log.size() == 20);
    CHECK(result.log.back().train_loss < result.log.front().train_loss);
    int increases = 0;
    for (std::size_t e = 1; e < result.log.size(); ++e)
        if (result.log[e].train_loss > result.log[e - 1].train_loss) ++increases;
    CHECK(increases <= 5);  // single-step wobbles allowed, trend must fall
}

TEST_CASE("train validates dataset/config agreement") {
    ModelConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 1;
    auto pairs = toy_pairs(2, 1);
    pairs[1].history.joints = 3;  // skeleton mismatch
    SpgsnModel model(cfg, 1);
    CHECK_THROWS_AS(train(model, pairs, {}, tc), ConfigError);

    auto short_pairs = toy_pairs(2, 1);
    short_pairs[0].future.data.resize(short_pairs[0].future.joints * 3);  // 1 frame
    CHECK_THROWS_AS(train(model, short_pairs, {}, tc), ConfigError);
}

TEST_CASE("evaluate: zero-velocity baseline behaviors") {
    SUBCASE("constant pose: zero error at every horizon") {
        MotionClip constant =
            clip_of(6, 2, [](std::size_t, std::size_t j, std::size_t k) { return j + 0.1 * k; });
        auto pairs = segment_clips(constant, 4, 2, 6);
        auto table = evaluate_zero_velocity(pairs, {1, 2});
        for (auto [h, err] : table) CHECK(err == 0.0);
    }

    SUBCASE("constant velocity: error grows linearly in the horizon") {
        const double vx = 0.02, vy = -0.01;
        MotionClip moving = clip_of(10, 2, [&](std::size_t t, std::size_t j, std::size_t k) {
            const double v = (k == 0) ? vx : (k == 1 ? vy : 0.0);
            return 0.5 * j + v * static_cast<double>(t);
        });
        auto pairs = segment_clips(moving, 6, 4, 10);
        auto table = evaluate_zero_velocity(pairs, {1, 2, 4});
        const double speed = std::sqrt(vx * vx + vy * vy);
        for (auto [h, err] : table) CHECK(err == doctest::Approx(h * speed).epsilon(1e-12));
    }

    SUBCASE("zero-weight model with the skip equals the zero-velocity baseline") {
        ModelConfig cfg = tiny_config();
        SpgsnModel model(cfg, 1);
        for (auto& [name, t] : model.params())
            for (auto& v : t.values_mut()) v = 0.0;
        auto pairs = toy_pairs(3, 2);
        auto model_table = evaluate(model, pairs, {1, 2});
        auto base_table = evaluate_zero_velocity(pairs, {1, 2});
        for (std::size_t i = 0; i < model_table.size(); ++i)
            CHECK(model_table[i].second ==
                  doctest::Approx(base_table[i].second).epsilon(1e-9));
    }
}

TEST_CASE("a short training run beats its own starting point") {
    ModelConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 12;
    tc.seed = 11;
    tc.batch_size = 8;
    auto pairs = toy_pairs(10, 21);
    std::vector<ClipPair> val(pairs.begin() + 8, pairs.end());
    pairs.resize(8);

    SpgsnModel model(cfg, tc.seed);
    const double before = evaluate(model, val, {2})[0].second;
    train(model, pairs, val, tc);
    const double after = evaluate(model, val, {2})[0].second;
    CHECK(after < before);
}
