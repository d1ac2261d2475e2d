#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spgsn/dct.hpp"
#include "spgsn/fusion.hpp"
#include "spgsn/motion.hpp"
#include "spgsn/partition.hpp"
#include "spgsn/scattering.hpp"
#include "spgsn/tensor.hpp"

namespace spgsn {

enum class Aggregator { spectrum, average };

struct ModelConfig {
    int blocks = 10;          // stacked MPGSBs
    int scatter_layers = 2;   // L
    int filter_order = 2;     // K
    int hidden = 256;         // C'
    int dct_coeffs = 0;       // C; 0 means history + horizon (no truncation)
    int d_att = 0;            // aggregator f1 width; 0 means hidden
    int d_emb = 0;            // bipartite embedding width; 0 means hidden
    bool block_residuals = true;
    bool global_skip = true;
    bool share_layer_weights = true;  // share banks/weights across branches of a tree layer
    Aggregator aggregator = Aggregator::spectrum;
    AffinityAxis affinity_axis = AffinityAxis::source;

    // Skeleton and partition. Empty bones default to a chain.
    int joints = 0;
    std::vector<std::pair<int, int>> bones;
    std::string partition_name = "upper_lower";  // "1body" disables parts
    std::vector<int> upper_joints;               // resolved joint lists
    std::vector<int> lower_joints;

    int history = 0;  // T observed frames
    int horizon = 0;  // dT predicted frames

    bool one_body() const { return partition_name == "1body"; }
    bool partition_resolved() const { return one_body() || !upper_joints.empty(); }
    int nodes() const { return 3 * joints; }
    int coeffs() const { return dct_coeffs > 0 ? dct_coeffs : history + horizon; }
    int att_width() const { return d_att > 0 ? d_att : hidden; }
    int emb_width() const { return d_emb > 0 ? d_emb : hidden; }

    void validate() const;  // throws ConfigError

    // If partition_name refers to a preset, fill the joint lists from the
    // skeleton's presets (or the bundled 22-joint layout).
    void resolve_partition(const SkeletonDef& skeleton);
};

ModelConfig model_config_from_json(const std::string& json_text);
std::string model_config_to_json(const ModelConfig& cfg);

// One multi-part graph scattering block: whole-body and per-part scattering
// with a shared tree, learned spectrum aggregation, bipartite cross-part
// fusion, and an optional input residual.
struct BlockParams {
    PoseGraph whole;
    PoseGraph upper;  // undefined in 1body mode
    PoseGraph lower;
    ScatterTree tree;
    SpectrumAggregator agg;  // undefined when aggregator == average
    Affine embed_upper;      // undefined in 1body mode
    Affine embed_lower;
    Mlp fuse;
};

class SpgsnModel {
public:
    // Fresh model with the documented initialization (bone-connectivity
    // adjacency + U(-0.01,0.01) noise; weights U(+-sqrt(1/fan_in)); filter
    // coefficients on their wavelet bands).
    SpgsnModel(ModelConfig cfg, std::uint64_t init_seed);

    const ModelConfig& config() const { return cfg_; }
    const BodyPartition& partition() const { return partition_; }
    BlockParams& block(std::size_t i) { return blocks_.at(i); }
    const BlockParams& block(std::size_t i) const { return blocks_.at(i); }

    std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
    long long param_count() const;
    void zero_grads();

    // Per-forward-pass filter/adjacency evaluation, shared across the
    // samples of a batch.
    struct Prepared {
        std::vector<PreparedFilters> whole;
        std::vector<PreparedFilters> upper;
        std::vector<PreparedFilters> lower;
    };
    Prepared prepare() const;

    Tensor block_forward(std::size_t b, const Tensor& h_in, const Prepared& prepared) const;
    Tensor block_forward(std::size_t b, const Tensor& h_in) const;

    // DCT-domain network: M' x C -> M' x C including the cross-model skip.
    Tensor forward_coeffs(const Tensor& x_minus, const Prepared& prepared) const;

    // Full predictor on a flattened history [T x 3M]: pad, encode, run the
    // network, decode, return the last dT frames as [dT x 3M].
    Tensor predict_taped(const Tensor& history_flat, const Prepared& prepared) const;
    Tensor predict_taped(const Tensor& history_flat) const;
    std::vector<Tensor> predict_taped_batch(const std::vector<Tensor>& histories) const;
    MotionClip predict(const MotionClip& history) const;

    // Scattering decomposition of one block/part on a given history, for
    // response dumps and spectrum-importance inspection.
    struct SpectrumProbe {
        std::vector<std::vector<Tensor>> layers;  // per tree layer channels
        Tensor weights;                           // 1 x (K+1)^L importance scores
    };
    SpectrumProbe probe_spectrum(const Tensor& history_flat, std::size_t block_index,
                                 const std::string& part) const;  // part: whole|upper|lower

    // Checkpoint: magic "SPGSN1", length-prefixed config JSON, then the
    // parameter tensors in declared order (u32 rank, u64 dims, f64 data,
    // all little-endian). Loading validates config and shape agreement.
    void save(const std::string& path) const;
    static SpgsnModel load(const std::string& path);

private:
    ModelConfig cfg_;
    BodyPartition partition_;
    Affine in_proj_;
    Affine out_proj_;
    std::vector<BlockParams> blocks_;
    std::vector<std::pair<std::string, Tensor>> params_;

    void register_all_params();
};

// Exact number of trainable scalars a config produces.
long long param_count(const ModelConfig& cfg);

}  // namespace spgsn
