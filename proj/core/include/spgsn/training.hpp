#pragma once

#include <iosfwd>
#include <vector>

#include "spgsn/model.hpp"
#include "spgsn/motion.hpp"
#include "spgsn/tensor.hpp"

namespace spgsn {

struct TrainConfig {
    int epochs = 200;
    std::uint64_t seed = 0;
    int batch_size = 32;
    double base_lr = 0.001;
    double lr_decay = 0.96;
    int decay_every = 2;  // epochs per decay step
    int stride = 1;       // clip segmentation stride
    std::vector<int> eval_horizons;  // 1-based frames; empty means {horizon}

    void validate() const;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& rc);

// lr(epoch) = base * decay^floor(epoch / every); nonincreasing, positive.
struct Schedule {
    double base_lr = 0.001;
    double decay = 0.96;
    int every = 2;

    double lr(int epoch) const;
};

// Training loss: (1/N) sum_n ||pred_n - target_n||_F^2, additionally divided
// by (dT * M) so the magnitude is independent of horizon and skeleton size.
// Inputs are [dT x 3M] prediction/target pairs on the tape.
Tensor loss(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets);
double loss_value(const std::vector<MotionClip>& preds, const std::vector<MotionClip>& targets);

// Mean per-joint position error at one prediction frame (1-based), in the
// data's length unit.
double mpjpe(const MotionClip& pred, const MotionClip& target, std::size_t at_frame);
double mpjpe(const std::vector<MotionClip>& preds, const std::vector<MotionClip>& targets,
             std::size_t at_frame);

struct AdamState {
    long long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<std::vector<double>> m;  // mirrors parameter shapes
    std::vector<std::vector<double>> v;

    static AdamState for_params(const std::vector<std::pair<std::string, Tensor>>& params);
};

// Standard Adam with bias correction, in place. A non-finite gradient aborts
// the step (no parameter is touched) with a diagnostic naming the offender.
void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state, double lr);

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    std::vector<std::pair<int, double>> val_mpjpe;  // (frame, error)
};

struct TrainResult {
    std::vector<EpochLog> log;
};

// Deterministic 80/20 split: every fifth clip (index % 5 == 4) goes to
// validation; segmentation happens per side afterwards.
void split_dataset(const std::vector<MotionClip>& clips, std::vector<MotionClip>& train_clips,
                   std::vector<MotionClip>& val_clips);

// segment_clips over a clip list, concatenated in order.
std::vector<ClipPair> segment_all(const std::vector<MotionClip>& clips, std::size_t history,
                                  std::size_t horizon, std::size_t stride);

// Seed-deterministic mini-batch training: shuffled batches of
// tc.batch_size (final partial batch kept), forward -> loss -> backward ->
// adam_step, lr from the schedule. Writes one JSON record per epoch to
// metrics_out when given: {"epoch","lr","train_loss","val_mpjpe":{frame: e}}.
TrainResult train(SpgsnModel& model, const std::vector<ClipPair>& train_set,
                  const std::vector<ClipPair>& val_set, const TrainConfig& tc,
                  std::ostream* metrics_out = nullptr, std::ostream* progress = nullptr);

// Instant per-timestamp MPJPE over a whole set; the model produces each
// full sequence once.
std::vector<std::pair<int, double>> evaluate(const SpgsnModel& model,
                                             const std::vector<ClipPair>& pairs,
                                             const std::vector<int>& horizons);

// Last-frame-hold baseline.
MotionClip zero_velocity_prediction(const MotionClip& history, std::size_t horizon);
std::vector<std::pair<int, double>> evaluate_zero_velocity(const std::vector<ClipPair>& pairs,
                                                           const std::vector<int>& horizons);

}  // namespace spgsn
