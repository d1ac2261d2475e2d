#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "spgsn/error.hpp"
#include "spgsn/model.hpp"
#include "spgsn/rng.hpp"
#include "spgsn/training.hpp"

using namespace spgsn;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.blocks = 2;
    cfg.scatter_layers = 2;
    cfg.filter_order = 2;
    cfg.hidden = 4;
    cfg.joints = 2;
    cfg.partition_name = "upper_lower";
    cfg.upper_joints = {0};
    cfg.lower_joints = {1};
    cfg.history = 4;
    cfg.horizon = 3;
    return cfg;
}

Tensor random_history(const ModelConfig& cfg, Rng& rng, bool grad = false) {
    return Tensor::random({static_cast<std::size_t>(cfg.history),
                           static_cast<std::size_t>(cfg.nodes())},
                          [&] { return rng.uniform(-0.5, 0.5); }, grad);
}

void zero_all_params(SpgsnModel& model) {
    for (auto& [name, t] : model.params())
        for (auto& v : t.values_mut()) v = 0.0;
}

}  // namespace

TEST_CASE("zero network with global skip holds the last frame") {
    SpgsnModel model(toy_config(), 3);
    zero_all_params(model);
    Rng rng(4);
    Tensor hist = random_history(model.config(), rng);
    Tensor pred = model.predict_taped(hist);
    REQUIRE(pred.rows() == 3);
    const std::size_t last = hist.rows() - 1;
    for (std::size_t f = 0; f < pred.rows(); ++f)
        for (std::size_t c = 0; c < pred.cols(); ++c)
            CHECK(std::fabs(pred.at(f, c) - hist.at(last, c)) < 1e-9);
}

TEST_CASE("zero network without the skip predicts the zero pose") {
    ModelConfig cfg = toy_config();
    cfg.global_skip = false;
    SpgsnModel model(cfg, 3);
    zero_all_params(model);
    Rng rng(4);
    Tensor pred = model.predict_taped(random_history(cfg, rng));
    for (double v : pred.values()) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("1body block collapses to MLP(2H) plus the residual") {
    ModelConfig cfg = toy_config();
    cfg.blocks = 1;
    cfg.partition_name = "1body";
    cfg.upper_joints.clear();
    cfg.lower_joints.clear();
    SpgsnModel model(cfg, 9);

    Rng rng(10);
    Tensor h_in = Tensor::random({static_cast<std::size_t>(cfg.nodes()),
                                  static_cast<std::size_t>(cfg.hidden)},
                                 [&] { return rng.uniform(-1.0, 1.0); });
    Tensor out = model.block_forward(0, h_in);

    const BlockParams& bp = model.block(0);
    Tensor whole =
        aggregate_spectrum(scatter_tree(h_in, bp.whole, bp.tree), bp.agg).fused;
    Tensor manual = add(h_in, bp.fuse.apply(add(whole, whole)));
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.values()[i] == doctest::Approx(manual.values()[i]).epsilon(1e-13));
}

TEST_CASE("two-part block matches a hand-composed pipeline of module ops") {
    ModelConfig cfg = toy_config();
    cfg.blocks = 1;
    SpgsnModel model(cfg, 11);
    Rng rng(12);
    Tensor h_in = Tensor::random({static_cast<std::size_t>(cfg.nodes()),
                                  static_cast<std::size_t>(cfg.hidden)},
                                 [&] { return rng.uniform(-1.0, 1.0); });
    Tensor out = model.block_forward(0, h_in);

    const BlockParams& bp = model.block(0);
    const BodyPartition& parts = model.partition();
    Tensor whole = aggregate_spectrum(scatter_tree(h_in, bp.whole, bp.tree), bp.agg).fused;
    Tensor up_in = split_part(h_in, parts.upper_nodes);
    Tensor low_in = split_part(h_in, parts.lower_nodes);
    Tensor h_up = aggregate_spectrum(scatter_tree(up_in, bp.upper, bp.tree), bp.agg).fused;
    Tensor h_low = aggregate_spectrum(scatter_tree(low_in, bp.lower, bp.tree), bp.agg).fused;
    Tensor a_ul = affinity(h_up, h_low, bp.embed_upper, bp.embed_lower);
    Tensor a_lu = affinity(h_low, h_up, bp.embed_lower, bp.embed_upper);
    Tensor new_low = cross_update(h_low, h_up, a_ul);
    Tensor new_up = cross_update(h_up, h_low, a_lu);
    Tensor manual = add(h_in, place_and_fuse(whole, new_up, new_low, parts, bp.fuse));
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.values()[i] == doctest::Approx(manual.values()[i]).epsilon(1e-13));
}

TEST_CASE("zeroing a block's fusion output leaves the block as the identity") {
    SpgsnModel model(toy_config(), 5);
    BlockParams& bp = model.block(1);
    for (auto& v : bp.fuse.second.w.values_mut()) v = 0.0;
    for (auto& v : bp.fuse.second.b.values_mut()) v = 0.0;
    Rng rng(6);
    Tensor h = Tensor::random({6, 4}, [&] { return rng.uniform(-1.0, 1.0); });
    Tensor out = model.block_forward(1, h);
    CHECK(out.values() == h.values());
}

TEST_CASE("param_count: hand enumeration on the 1body toy") {
    ModelConfig cfg;
    cfg.blocks = 1;
    cfg.scatter_layers = 1;
    cfg.filter_order = 0;
    cfg.hidden = 2;
    cfg.joints = 2;
    cfg.partition_name = "1body";
    cfg.history = 1;
    cfg.horizon = 1;  // C = 2
    // in_proj 2x2+2, out_proj 2x2+2, whole A 6x6, tree {alpha0: 1, W0: 4},
    // aggregator {w_sp 4, f1 (4x2)+2, f2 2}, fuse MLP 2*(2x2+2).
    CHECK(param_count(cfg) == 6 + 6 + 36 + 5 + (4 + 10 + 2) + 12);

    SUBCASE("count scales linearly in the number of blocks") {
        ModelConfig c1 = cfg, c2 = cfg, c3 = cfg;
        c2.blocks = 2;
        c3.blocks = 3;
        const long long d1 = param_count(c2) - param_count(c1);
        const long long d2 = param_count(c3) - param_count(c2);
        CHECK(d1 == d2);
    }

    SUBCASE("doubling the hidden width more than doubles the count") {
        ModelConfig wide = cfg;
        wide.hidden = 4;
        CHECK(param_count(wide) > 2 * param_count(cfg));
    }

    SUBCASE("two-part fusion adds part graphs and embeddings") {
        ModelConfig parts = cfg;
        parts.partition_name = "upper_lower";
        parts.upper_joints = {0};
        parts.lower_joints = {1};
        // + upper A 9 + lower A 9 + two embeddings (2x2+2 each)
        CHECK(param_count(parts) == param_count(cfg) + 9 + 9 + 6 + 6);
    }
}

TEST_CASE("every parameter group receives a nonzero gradient") {
    for (bool one_body : {false, true}) {
        ModelConfig cfg = toy_config();
        if (one_body) {
            cfg.partition_name = "1body";
            cfg.upper_joints.clear();
            cfg.lower_joints.clear();
        }
        SpgsnModel model(cfg, 21);
        Rng rng(22);
        Tensor hist = random_history(cfg, rng);
        Tensor target = Tensor::random({static_cast<std::size_t>(cfg.horizon),
                                        static_cast<std::size_t>(cfg.nodes())},
                                       [&] { return rng.uniform(-0.5, 0.5); });
        model.zero_grads();
        backward(loss({model.predict_taped(hist)}, {target}));
        for (const auto& [name, t] : model.params()) {
            double mx = 0.0;
            for (double g : t.grad()) mx = std::max(mx, std::fabs(g));
            INFO("parameter group: ", name);
            CHECK(mx > 0.0);
        }
    }
}

TEST_CASE("full-model gradients match finite differences (tiny toy)") {
    ModelConfig cfg = toy_config();
    cfg.blocks = 1;
    cfg.hidden = 3;
    cfg.history = 3;
    cfg.horizon = 2;
    SpgsnModel model(cfg, 31);
    Rng rng(32);
    Tensor hist = random_history(cfg, rng);
    Tensor target = Tensor::random({2, 6}, [&] { return rng.uniform(-0.5, 0.5); });
    auto f = [&] { return loss({model.predict_taped(hist)}, {target}); };
    // eps 3e-4: a forward pass of ~2k float ops leaves ~1e-15 round-off on
    // the loss, so the default 1e-5 step drowns the smallest gradients in
    // (f+ - f-) cancellation noise.
    auto report = finite_diff_check(f, model.params(), 3e-4);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("forward is deterministic and finite") {
    ModelConfig cfg = toy_config();
    SpgsnModel a(cfg, 77);
    SpgsnModel b(cfg, 77);
    Rng rng(78);
    Tensor hist = random_history(cfg, rng);
    Tensor pa = a.predict_taped(hist);
    Tensor pb = b.predict_taped(hist);
    CHECK(pa.values() == pb.values());
    for (double v : pa.values()) CHECK(std::isfinite(v));

    SpgsnModel c(cfg, 78);
    Tensor pc = c.predict_taped(hist);
    CHECK(pa.values() != pc.values());
}

TEST_CASE("checkpoint round trip preserves config and parameters") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "spgsn_ckpt_test.bin").string();
    ModelConfig cfg = toy_config();
    cfg.aggregator = Aggregator::average;
    cfg.dct_coeffs = 5;
    SpgsnModel model(cfg, 41);
    model.save(path);

    SpgsnModel loaded = SpgsnModel::load(path);
    CHECK(loaded.config().blocks == cfg.blocks);
    CHECK(loaded.config().dct_coeffs == 5);
    CHECK(loaded.config().aggregator == Aggregator::average);
    CHECK(loaded.config().upper_joints == cfg.upper_joints);
    REQUIRE(loaded.params().size() == model.params().size());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        CHECK(loaded.params()[i].first == model.params()[i].first);
        CHECK(loaded.params()[i].second.values() == model.params()[i].second.values());
    }

    Rng rng(42);
    Tensor hist = random_history(cfg, rng);
    CHECK(loaded.predict_taped(hist).values() == model.predict_taped(hist).values());

    SUBCASE("bad magic is rejected") {
        std::ofstream bad(path, std::ios::binary | std::ios::trunc);
        bad << "NOTSPG00000";
        bad.close();
        CHECK_THROWS_AS(SpgsnModel::load(path), IoError);
    }
    SUBCASE("truncated files are rejected") {
        model.save(path);
        auto size = fs::file_size(path);
        fs::resize_file(path, size - 16);
        CHECK_THROWS_AS(SpgsnModel::load(path), IoError);
    }
    fs::remove(path);
}

TEST_CASE("model config json round trip") {
    ModelConfig cfg = toy_config();
    cfg.aggregator = Aggregator::average;
    cfg.affinity_axis = AffinityAxis::destination;
    cfg.share_layer_weights = false;
    cfg.bones = {{0, 1}};
    ModelConfig back = model_config_from_json(model_config_to_json(cfg));
    CHECK(back.blocks == cfg.blocks);
    CHECK(back.aggregator == Aggregator::average);
    CHECK(back.affinity_axis == AffinityAxis::destination);
    CHECK_FALSE(back.share_layer_weights);
    CHECK(back.upper_joints == cfg.upper_joints);
    CHECK(back.bones == cfg.bones);
    CHECK(back.history == cfg.history);

    CHECK_THROWS_AS(model_config_from_json("{nope"), ParseError);
    CHECK_THROWS_AS(model_config_from_json("{\"aggregator\": \"quux\"}"), ConfigError);
}

TEST_CASE("unresolved partitions and bad configs are rejected") {
    ModelConfig cfg = toy_config();
    cfg.upper_joints.clear();
    cfg.lower_joints.clear();
    CHECK_THROWS_AS(SpgsnModel(cfg, 1), ConfigError);

    ModelConfig bad = toy_config();
    bad.blocks = 0;
    CHECK_THROWS_AS(SpgsnModel(bad, 1), ConfigError);

    ModelConfig short_hist = toy_config();
    SpgsnModel model(short_hist, 1);
    CHECK_THROWS_AS(model.predict_taped(Tensor::zeros({2, 6})), ContractError);
    CHECK_THROWS_AS(model.predict_taped(Tensor::zeros({4, 9})), DimensionError);
}

TEST_CASE("average aggregator and unshared trees still run end to end") {
    ModelConfig cfg = toy_config();
    cfg.aggregator = Aggregator::average;
    cfg.share_layer_weights = false;
    SpgsnModel model(cfg, 51);
    Rng rng(52);
    Tensor pred = model.predict_taped(random_history(cfg, rng));
    for (double v : pred.values()) CHECK(std::isfinite(v));
    // Unshared layer 2 carries (K+1) = 3 groups.
    CHECK(model.block(0).tree.groups(1) == 3);
}

TEST_CASE("probe_spectrum exposes per-layer channels and importance weights") {
    ModelConfig cfg = toy_config();
    SpgsnModel model(cfg, 61);
    Rng rng(62);
    Tensor hist = random_history(cfg, rng);
    auto probe = model.probe_spectrum(hist, 1, "whole");
    REQUIRE(probe.layers.size() == 2);
    CHECK(probe.layers[0].size() == 3);
    CHECK(probe.layers[1].size() == 9);
    double total = 0.0;
    for (double w : probe.weights.values()) total += w;
    CHECK(std::fabs(total - 1.0) < 1e-12);

    auto upper = model.probe_spectrum(hist, 0, "upper");
    CHECK(upper.layers[1][0].rows() == 3);  // one joint, three coordinate rows
    CHECK_THROWS_AS(model.probe_spectrum(hist, 5, "whole"), ContractError);
    CHECK_THROWS_AS(model.probe_spectrum(hist, 0, "torso"), ConfigError);
}
