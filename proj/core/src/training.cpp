#include "spgsn/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "spgsn/dct.hpp"
#include "spgsn/error.hpp"
#include "spgsn/rng.hpp"

using json = nlohmann::ordered_json;

namespace spgsn {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (base_lr <= 0.0) throw ConfigError("train config: base_lr must be > 0");
    if (lr_decay <= 0.0 || lr_decay > 1.0)
        throw ConfigError("train config: lr_decay must be in (0, 1]");
    if (decay_every < 1) throw ConfigError("train config: decay_every must be >= 1");
    if (stride < 1) throw ConfigError("train config: stride must be >= 1");
}

RunConfig parse_run_config(const std::string& json_text) {
    RunConfig rc;
    rc.model = model_config_from_json(json_text);
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    try {
        rc.train.epochs = doc.value("epochs", rc.train.epochs);
        rc.train.seed = doc.value("seed", rc.train.seed);
        rc.train.batch_size = doc.value("batch_size", rc.train.batch_size);
        rc.train.base_lr = doc.value("base_lr", rc.train.base_lr);
        rc.train.lr_decay = doc.value("lr_decay", rc.train.lr_decay);
        rc.train.decay_every = doc.value("decay_every", rc.train.decay_every);
        rc.train.stride = doc.value("stride", rc.train.stride);
        if (doc.contains("eval_horizons"))
            rc.train.eval_horizons = doc.at("eval_horizons").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    rc.train.validate();
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string run_config_to_json(const RunConfig& rc) {
    json doc = json::parse(model_config_to_json(rc.model));
    doc["epochs"] = rc.train.epochs;
    doc["seed"] = rc.train.seed;
    doc["batch_size"] = rc.train.batch_size;
    doc["base_lr"] = rc.train.base_lr;
    doc["lr_decay"] = rc.train.lr_decay;
    doc["decay_every"] = rc.train.decay_every;
    doc["stride"] = rc.train.stride;
    if (!rc.train.eval_horizons.empty()) doc["eval_horizons"] = rc.train.eval_horizons;
    return doc.dump(2);
}

double Schedule::lr(int epoch) const {
    if (epoch < 0) throw ContractError("Schedule::lr: negative epoch");
    return base_lr * std::pow(decay, static_cast<double>(epoch / every));
}

// --- loss and metric -----------------------------------------------------------

Tensor loss(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets) {
    if (preds.empty() || preds.size() != targets.size())
        throw ContractError("loss: need equally many (>=1) predictions and targets, got " +
                            std::to_string(preds.size()) + " vs " +
                            std::to_string(targets.size()));
    Tensor total;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].shape() != targets[i].shape())
            throw ContractError("loss: sample " + std::to_string(i) + " shape mismatch " +
                                shape_str(preds[i].shape()) + " vs " +
                                shape_str(targets[i].shape()));
        Tensor diff = sub(preds[i], targets[i]);
        Tensor sq = sum(mul(diff, diff));
        total = total.defined() ? add(total, sq) : sq;
    }
    const double frames = static_cast<double>(preds[0].rows());
    const double joints = static_cast<double>(preds[0].cols()) / 3.0;
    return scale(total, 1.0 / (static_cast<double>(preds.size()) * frames * joints));
}

double loss_value(const std::vector<MotionClip>& preds, const std::vector<MotionClip>& targets) {
    std::vector<Tensor> p, t;
    for (const auto& c : preds) p.push_back(flatten_spatial(c));
    for (const auto& c : targets) t.push_back(flatten_spatial(c));
    return loss(p, t).item();
}

double mpjpe(const MotionClip& pred, const MotionClip& target, std::size_t at_frame) {
    if (pred.joints != target.joints || pred.frames() != target.frames())
        throw ContractError("mpjpe: prediction and target disagree in shape");
    if (at_frame < 1 || at_frame > pred.frames())
        throw ContractError("mpjpe: frame " + std::to_string(at_frame) +
                            " outside horizon 1.." + std::to_string(pred.frames()));
    const std::size_t f = at_frame - 1;
    double acc = 0.0;
    for (std::size_t j = 0; j < pred.joints; ++j) {
        const double dx = pred.at(f, j, 0) - target.at(f, j, 0);
        const double dy = pred.at(f, j, 1) - target.at(f, j, 1);
        const double dz = pred.at(f, j, 2) - target.at(f, j, 2);
        acc += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return acc / static_cast<double>(pred.joints);
}

double mpjpe(const std::vector<MotionClip>& preds, const std::vector<MotionClip>& targets,
             std::size_t at_frame) {
    if (preds.empty() || preds.size() != targets.size())
        throw ContractError("mpjpe: need equally many (>=1) predictions and targets");
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) acc += mpjpe(preds[i], targets[i], at_frame);
    return acc / static_cast<double>(preds.size());
}

// --- optimizer --------------------------------------------------------------------

AdamState AdamState::for_params(const std::vector<std::pair<std::string, Tensor>>& params) {
    AdamState s;
    for (const auto& [name, t] : params) {
        s.m.emplace_back(t.size(), 0.0);
        s.v.emplace_back(t.size(), 0.0);
    }
    return s;
}

void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state, double lr) {
    if (state.m.size() != params.size())
        throw ContractError("adam_step: state tracks " + std::to_string(state.m.size()) +
                            " parameters, got " + std::to_string(params.size()));
    // Abort before mutating anything if any gradient is non-finite.
    for (auto& [name, t] : params) {
        const auto& g = t.grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!std::isfinite(g[i]))
                throw ContractError("adam_step aborted: non-finite gradient " +
                                    std::to_string(g[i]) + " in '" + name + "' entry " +
                                    std::to_string(i) + " at step " +
                                    std::to_string(state.step + 1));
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& t = params[p].second;
        const auto& g = t.grad();
        auto& vals = t.values_mut();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < vals.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            vals[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
        }
    }
}

// --- training loop -----------------------------------------------------------------

void split_dataset(const std::vector<MotionClip>& clips, std::vector<MotionClip>& train_clips,
                   std::vector<MotionClip>& val_clips) {
    train_clips.clear();
    val_clips.clear();
    for (std::size_t i = 0; i < clips.size(); ++i)
        ((i % 5 == 4) ? val_clips : train_clips).push_back(clips[i]);
}

std::vector<ClipPair> segment_all(const std::vector<MotionClip>& clips, std::size_t history,
                                  std::size_t horizon, std::size_t stride) {
    std::vector<ClipPair> pairs;
    for (const auto& clip : clips) {
        auto segs = segment_clips(clip, history, horizon, stride);
        pairs.insert(pairs.end(), std::make_move_iterator(segs.begin()),
                     std::make_move_iterator(segs.end()));
    }
    return pairs;
}

namespace {

void check_pair(const ClipPair& pair, const ModelConfig& cfg, std::size_t index) {
    if (static_cast<int>(pair.history.joints) != cfg.joints ||
        static_cast<int>(pair.future.joints) != cfg.joints)
        throw ConfigError("dataset pair " + std::to_string(index) +
                          " joint count does not match the model skeleton");
    if (pair.history.frames() != static_cast<std::size_t>(cfg.history) ||
        pair.future.frames() != static_cast<std::size_t>(cfg.horizon))
        throw ConfigError("dataset pair " + std::to_string(index) + " spans " +
                          std::to_string(pair.history.frames()) + "+" +
                          std::to_string(pair.future.frames()) + " frames, model wants " +
                          std::to_string(cfg.history) + "+" + std::to_string(cfg.horizon));
}

json epoch_record(const EpochLog& e) {
    json rec;
    rec["epoch"] = e.epoch;
    rec["lr"] = e.lr;
    rec["train_loss"] = e.train_loss;
    json vm = json::object();
    for (auto [frame, err] : e.val_mpjpe) vm[std::to_string(frame)] = err;
    rec["val_mpjpe"] = vm;
    return rec;
}

}  // namespace

TrainResult train(SpgsnModel& model, const std::vector<ClipPair>& train_set,
                  const std::vector<ClipPair>& val_set, const TrainConfig& tc,
                  std::ostream* metrics_out, std::ostream* progress) {
    tc.validate();
    if (train_set.empty()) throw ContractError("train: empty training set");
    const ModelConfig& cfg = model.config();
    for (std::size_t i = 0; i < train_set.size(); ++i) check_pair(train_set[i], cfg, i);
    for (std::size_t i = 0; i < val_set.size(); ++i) check_pair(val_set[i], cfg, i);

    std::vector<int> horizons = tc.eval_horizons;
    if (horizons.empty()) horizons = {cfg.horizon};
    for (int h : horizons)
        if (h < 1 || h > cfg.horizon)
            throw ConfigError("train: eval horizon " + std::to_string(h) + " outside 1.." +
                              std::to_string(cfg.horizon));

    // Histories/targets as constant tensors, built once.
    std::vector<Tensor> histories, targets;
    for (const auto& pair : train_set) {
        histories.push_back(flatten_spatial(pair.history));
        targets.push_back(flatten_spatial(pair.future));
    }

    Schedule schedule{tc.base_lr, tc.lr_decay, tc.decay_every};
    AdamState adam = AdamState::for_params(model.params());
    Rng rng(tc.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double lr = schedule.lr(epoch);
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            SpgsnModel::Prepared prepared = model.prepare();
            std::vector<Tensor> preds, batch_targets;
            for (std::size_t i = start; i < stop; ++i) {
                preds.push_back(model.predict_taped(histories[order[i]], prepared));
                batch_targets.push_back(targets[order[i]]);
            }
            Tensor batch_loss = loss(preds, batch_targets);
            model.zero_grads();
            backward(batch_loss);
            adam_step(model.params(), adam, lr);
            loss_sum += batch_loss.item() * static_cast<double>(stop - start);
        }

        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.train_loss = loss_sum / static_cast<double>(order.size());
        if (!val_set.empty()) log.val_mpjpe = evaluate(model, val_set, horizons);
        if (metrics_out) *metrics_out << epoch_record(log).dump() << "\n";
        if (progress) {
            *progress << "epoch " << epoch << " lr " << lr << " loss " << log.train_loss;
            for (auto [frame, err] : log.val_mpjpe)
                *progress << " mpjpe@" << frame << " " << err;
            *progress << "\n";
        }
        result.log.push_back(std::move(log));
    }
    return result;
}

std::vector<std::pair<int, double>> evaluate(const SpgsnModel& model,
                                             const std::vector<ClipPair>& pairs,
                                             const std::vector<int>& horizons) {
    std::vector<MotionClip> preds, futures;
    preds.reserve(pairs.size());
    for (const auto& pair : pairs) {
        preds.push_back(model.predict(pair.history));
        futures.push_back(pair.future);
    }
    std::vector<std::pair<int, double>> table;
    for (int h : horizons)
        table.emplace_back(h, mpjpe(preds, futures, static_cast<std::size_t>(h)));
    return table;
}

MotionClip zero_velocity_prediction(const MotionClip& history, std::size_t horizon) {
    if (history.frames() < 1) throw ContractError("zero_velocity_prediction: empty history");
    MotionClip out;
    out.joints = history.joints;
    out.frame_rate = history.frame_rate;
    const std::size_t row = history.joints * 3;
    const std::size_t last = history.frames() - 1;
    for (std::size_t f = 0; f < horizon; ++f)
        out.data.insert(out.data.end(), history.data.begin() + last * row,
                        history.data.begin() + (last + 1) * row);
    return out;
}

std::vector<std::pair<int, double>> evaluate_zero_velocity(const std::vector<ClipPair>& pairs,
                                                           const std::vector<int>& horizons) {
    std::vector<MotionClip> preds, futures;
    for (const auto& pair : pairs) {
        preds.push_back(zero_velocity_prediction(pair.history, pair.future.frames()));
        futures.push_back(pair.future);
    }
    std::vector<std::pair<int, double>> table;
    for (int h : horizons)
        table.emplace_back(h, mpjpe(preds, futures, static_cast<std::size_t>(h)));
    return table;
}

}  // namespace spgsn
