// Command-line front end: train, predict, eval, gradcheck, inspect-spectrum,
// gen-data and param-count subcommands over the spgsn core library.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spgsn/dct.hpp"
#include "spgsn/error.hpp"
#include "spgsn/model.hpp"
#include "spgsn/motion.hpp"
#include "spgsn/rng.hpp"
#include "spgsn/scattering.hpp"
#include "spgsn/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct TrainArgs {
    std::string manifest, config, out_dir;
    bool quiet = false;
};

struct PredictArgs {
    std::string checkpoint, clip, out, manifest;
    int root_joint = -1;
};

struct EvalArgs {
    std::string checkpoint, manifest, horizons, horizons_ms, json_out;
    int stride = 1;
};

struct GradcheckArgs {
    std::string config;
    double eps = 3e-4;  // full-model sweet spot; per-primitive checks use 1e-5
    double tol = 1e-3;
};

struct InspectArgs {
    std::string checkpoint, clip, out_dir, manifest;
    std::size_t block = 0;
    std::string part = "whole";
    int root_joint = -1;
};

struct GenArgs {
    std::string out_dir;
    std::string motif = "sinusoid-limbs";
    std::uint64_t seed = 0;
    std::size_t clips = 64;
    std::size_t frames = 20;
    int joints = 4;
};

struct ParamCountArgs {
    std::string config, manifest;
};

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    if (out.empty()) throw spgsn::ConfigError("empty list '" + csv + "'");
    return out;
}

spgsn::MotionClip load_clip_arg(const std::string& clip_path, const std::string& manifest_path,
                                int root_joint) {
    if (!manifest_path.empty()) {
        spgsn::DatasetManifest mf = spgsn::load_manifest(manifest_path);
        spgsn::MotionClip c =
            spgsn::load_clip(clip_path, mf.precentered ? -1 : mf.root_joint);
        c.frame_rate = mf.frame_rate;
        return c;
    }
    return spgsn::load_clip(clip_path, root_joint);
}

int run_train(const TrainArgs& args) {
    spgsn::RunConfig rc = spgsn::load_run_config(args.config);
    spgsn::DatasetManifest manifest = spgsn::load_manifest(args.manifest);
    rc.model.resolve_partition(manifest.skeleton);

    std::vector<spgsn::MotionClip> clips = spgsn::load_dataset(manifest);
    std::vector<spgsn::MotionClip> train_clips, val_clips;
    spgsn::split_dataset(clips, train_clips, val_clips);
    const auto history = static_cast<std::size_t>(rc.model.history);
    const auto horizon = static_cast<std::size_t>(rc.model.horizon);
    const auto stride = static_cast<std::size_t>(rc.train.stride);
    auto train_pairs = spgsn::segment_all(train_clips, history, horizon, stride);
    auto val_pairs = spgsn::segment_all(val_clips, history, horizon, stride);
    if (train_pairs.empty())
        throw spgsn::ConfigError("no training windows: clips shorter than T+dT?");

    fs::create_directories(args.out_dir);
    spgsn::SpgsnModel model(rc.model, rc.train.seed);
    if (!args.quiet)
        std::cerr << "training " << model.param_count() << " parameters on "
                  << train_pairs.size() << " windows (" << val_pairs.size() << " validation)\n";

    const std::string metrics_path = (fs::path(args.out_dir) / "metrics.jsonl").string();
    std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) throw spgsn::IoError("cannot open '" + metrics_path + "'");
    spgsn::train(model, train_pairs, val_pairs, rc.train, &metrics,
                 args.quiet ? nullptr : &std::cerr);
    metrics.close();

    const std::string ckpt_path = (fs::path(args.out_dir) / "model.ckpt").string();
    model.save(ckpt_path);
    std::cout << "checkpoint: " << ckpt_path << "\nmetrics: " << metrics_path << "\n";
    return 0;
}

int run_predict(const PredictArgs& args) {
    spgsn::SpgsnModel model = spgsn::SpgsnModel::load(args.checkpoint);
    spgsn::MotionClip clip = load_clip_arg(args.clip, args.manifest, args.root_joint);
    spgsn::MotionClip pred = model.predict(clip);
    spgsn::write_clip(pred, args.out);
    std::cout << "wrote " << pred.frames() << " frames to " << args.out << "\n";
    return 0;
}

int run_eval(const EvalArgs& args) {
    spgsn::SpgsnModel model = spgsn::SpgsnModel::load(args.checkpoint);
    spgsn::DatasetManifest manifest = spgsn::load_manifest(args.manifest);
    const spgsn::ModelConfig& cfg = model.config();

    std::vector<int> horizons;
    if (!args.horizons.empty()) horizons = parse_int_list(args.horizons);
    if (!args.horizons_ms.empty()) {
        for (int ms : parse_int_list(args.horizons_ms)) {
            const double frame = static_cast<double>(ms) * manifest.frame_rate / 1000.0;
            horizons.push_back(static_cast<int>(std::llround(frame)));
        }
    }
    if (horizons.empty()) horizons = {cfg.horizon};
    for (int h : horizons)
        if (h < 1 || h > cfg.horizon)
            throw spgsn::ConfigError("horizon " + std::to_string(h) + " outside 1.." +
                                     std::to_string(cfg.horizon));

    auto clips = spgsn::load_dataset(manifest);
    auto pairs = spgsn::segment_all(clips, static_cast<std::size_t>(cfg.history),
                                    static_cast<std::size_t>(cfg.horizon),
                                    static_cast<std::size_t>(args.stride));
    if (pairs.empty()) throw spgsn::ConfigError("no evaluation windows in the manifest clips");

    auto table = spgsn::evaluate(model, pairs, horizons);
    std::printf("# frame  ms  mpjpe(%s)\n", manifest.unit.c_str());
    json out;
    out["unit"] = manifest.unit;
    out["windows"] = pairs.size();
    out["horizons"] = json::array();
    for (auto [frame, err] : table) {
        const double ms = 1000.0 * static_cast<double>(frame) / manifest.frame_rate;
        std::printf("%d %.0f %.9g\n", frame, ms, err);
        out["horizons"].push_back({{"frame", frame}, {"ms", ms}, {"mpjpe", err}});
    }
    if (!args.json_out.empty()) {
        std::ofstream jf(args.json_out, std::ios::binary | std::ios::trunc);
        if (!jf) throw spgsn::IoError("cannot open '" + args.json_out + "'");
        jf << out.dump(2) << "\n";
    }
    return 0;
}

int run_gradcheck(const GradcheckArgs& args) {
    spgsn::RunConfig rc = spgsn::load_run_config(args.config);
    if (rc.model.joints == 0)
        throw spgsn::ConfigError("gradcheck: config must carry an explicit joint count");
    spgsn::SpgsnModel model(rc.model, rc.train.seed);

    spgsn::Rng rng(rc.train.seed + 1);
    const auto t = static_cast<std::size_t>(rc.model.history);
    const auto dt = static_cast<std::size_t>(rc.model.horizon);
    const auto nodes = static_cast<std::size_t>(rc.model.nodes());
    spgsn::Tensor history =
        spgsn::Tensor::random({t, nodes}, [&] { return rng.uniform(-0.5, 0.5); });
    spgsn::Tensor target =
        spgsn::Tensor::random({dt, nodes}, [&] { return rng.uniform(-0.5, 0.5); });

    auto f = [&]() { return spgsn::loss({model.predict_taped(history)}, {target}); };
    spgsn::GradCheckReport report = spgsn::finite_diff_check(f, model.params(), args.eps);
    for (const auto& g : report.groups)
        std::printf("%-28s entries %6zu  max rel err %.3e\n", g.name.c_str(), g.entries,
                    g.max_rel_err);
    std::printf("overall max rel err %.3e (tolerance %.1e)\n", report.max_rel_err, args.tol);
    return report.max_rel_err <= args.tol ? 0 : 1;
}

int run_inspect(const InspectArgs& args) {
    spgsn::SpgsnModel model = spgsn::SpgsnModel::load(args.checkpoint);
    spgsn::MotionClip clip = load_clip_arg(args.clip, args.manifest, args.root_joint);
    const auto t = static_cast<std::size_t>(model.config().history);
    if (clip.frames() < t)
        throw spgsn::ContractError("clip has " + std::to_string(clip.frames()) +
                                   " frames, model wants at least " + std::to_string(t));
    if (clip.frames() > t) {
        const std::size_t row = clip.joints * 3;
        clip.data.erase(clip.data.begin(),
                        clip.data.begin() + (clip.frames() - t) * row);
    }

    auto probe = model.probe_spectrum(spgsn::flatten_spatial(clip), args.block, args.part);
    fs::create_directories(args.out_dir);
    const std::string csv_path = (fs::path(args.out_dir) / "responses.csv").string();
    spgsn::dump_responses(probe.layers, csv_path);

    json spectrum;
    spectrum["block"] = args.block;
    spectrum["part"] = args.part;
    spectrum["weights"] = probe.weights.values();
    const std::string json_path = (fs::path(args.out_dir) / "spectrum.json").string();
    std::ofstream jf(json_path, std::ios::binary | std::ios::trunc);
    if (!jf) throw spgsn::IoError("cannot open '" + json_path + "'");
    jf << spectrum.dump(2) << "\n";

    std::cout << "responses: " << csv_path << "\nspectrum weights:";
    for (double w : probe.weights.values()) std::cout << ' ' << w;
    std::cout << "\n";
    return 0;
}

int run_gen(const GenArgs& args) {
    spgsn::gen_synthetic(args.seed, args.clips, args.frames, args.joints,
                         spgsn::motif_from_string(args.motif), args.out_dir);
    std::cout << "wrote " << args.clips << " clips to " << args.out_dir << "\n";
    return 0;
}

int run_param_count(const ParamCountArgs& args) {
    spgsn::RunConfig rc = spgsn::load_run_config(args.config);
    if (!args.manifest.empty()) {
        spgsn::DatasetManifest manifest = spgsn::load_manifest(args.manifest);
        rc.model.resolve_partition(manifest.skeleton);
    }
    std::cout << spgsn::param_count(rc.model) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skeleton-parted graph scattering network for motion prediction"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model from a dataset manifest");
    train_cmd->add_option("--manifest", train_args.manifest, "dataset manifest JSON")->required();
    train_cmd->add_option("--config", train_args.config, "model/training config JSON")->required();
    train_cmd->add_option("--out", train_args.out_dir, "output directory")->required();
    train_cmd->add_flag("--quiet", train_args.quiet, "suppress progress output");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "predict dT future frames for a clip");
    predict_cmd->add_option("--checkpoint", predict_args.checkpoint, "model checkpoint")->required();
    predict_cmd->add_option("--clip", predict_args.clip, "input clip file")->required();
    predict_cmd->add_option("--out", predict_args.out, "output clip file")->required();
    predict_cmd->add_option("--manifest", predict_args.manifest,
                            "manifest providing centering and frame rate");
    predict_cmd->add_option("--root", predict_args.root_joint,
                            "center to this root joint (when no manifest)");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "MPJPE table over a manifest's clips");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--manifest", eval_args.manifest, "dataset manifest JSON")->required();
    eval_cmd->add_option("--horizons", eval_args.horizons, "comma-separated frame horizons");
    eval_cmd->add_option("--horizons-ms", eval_args.horizons_ms,
                         "comma-separated horizons in milliseconds");
    eval_cmd->add_option("--json", eval_args.json_out, "also write the table as JSON");
    eval_cmd->add_option("--stride", eval_args.stride, "window stride (default 1)");

    GradcheckArgs grad_args;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
    grad_cmd->add_option("--config", grad_args.config, "model config JSON")->required();
    grad_cmd->add_option("--eps", grad_args.eps, "central difference step (default 3e-4)");
    grad_cmd->add_option("--tol", grad_args.tol, "failure threshold (default 1e-3)");

    InspectArgs inspect_args;
    auto* inspect_cmd =
        app.add_subcommand("inspect-spectrum", "dump scattering responses and importance scores");
    inspect_cmd->add_option("--checkpoint", inspect_args.checkpoint, "model checkpoint")->required();
    inspect_cmd->add_option("--clip", inspect_args.clip, "input clip file")->required();
    inspect_cmd->add_option("--block", inspect_args.block, "block index")->required();
    inspect_cmd->add_option("--part", inspect_args.part, "whole|upper|lower (default whole)");
    inspect_cmd->add_option("--out", inspect_args.out_dir, "output directory")->required();
    inspect_cmd->add_option("--manifest", inspect_args.manifest,
                            "manifest providing centering");
    inspect_cmd->add_option("--root", inspect_args.root_joint, "root joint for centering");

    GenArgs gen_args;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen_cmd->add_option("--out", gen_args.out_dir, "output directory")->required();
    gen_cmd->add_option("--seed", gen_args.seed, "RNG seed (default 0)");
    gen_cmd->add_option("--clips", gen_args.clips, "number of clips (default 64)");
    gen_cmd->add_option("--frames", gen_args.frames, "frames per clip (default 20)");
    gen_cmd->add_option("--joints", gen_args.joints, "chain joints (default 4)");
    gen_cmd->add_option("--motif", gen_args.motif,
                        "sinusoid-limbs|constant-velocity|figure-eight");

    ParamCountArgs count_args;
    auto* count_cmd = app.add_subcommand("param-count", "exact trainable parameter count");
    count_cmd->add_option("--config", count_args.config, "model config JSON")->required();
    count_cmd->add_option("--manifest", count_args.manifest,
                          "manifest for partition resolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad flags -> 2, help -> 0
    }

    try {
        if (train_cmd->parsed()) return run_train(train_args);
        if (predict_cmd->parsed()) return run_predict(predict_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (grad_cmd->parsed()) return run_gradcheck(grad_args);
        if (inspect_cmd->parsed()) return run_inspect(inspect_args);
        if (gen_cmd->parsed()) return run_gen(gen_args);
        if (count_cmd->parsed()) return run_param_count(count_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
