#pragma once

#include <string>
#include <vector>

#include "spgsn/layers.hpp"
#include "spgsn/tensor.hpp"

namespace spgsn {

// Single-part adaptive graph scattering: Frobenius-normalized trainable
// adjacency, a bank of band-pass filters built from powers of the
// normalized adjacency, an L-layer decomposition tree with (K+1)^L leaf
// channels, and learned aggregation of the channels.

// Trainable adjacency. The normalized form is
//   0.5 * (I + A / max(||A||_F^2, 1e-8)),
// recomputed on every forward pass so it always reflects the current A;
// the epsilon guard keeps A = 0 well-defined. Differentiable through the
// norm as well as the entries.
struct PoseGraph {
    Tensor adjacency;

    PoseGraph() = default;
    explicit PoseGraph(Tensor a) : adjacency(std::move(a)) {}
    Tensor normalized() const;
    std::size_t nodes() const { return adjacency.rows(); }
};

Tensor normalize_adjacency(const Tensor& a);

// Band-pass filter coefficients:
//   k = 0:       alpha(0,0) * At
//   k = 1:       alpha(1,0) * I + alpha(1,1) * At
//   k = 2..K:    sum_{j=1..k} alpha(k,j) * At^(2^(j-1))
// Initialization puts each filter on its own band: alpha(0,0) = 1 and, for
// k > 0, alpha(k,k-1) = 1, alpha(k,k) = -1, everything else 0 (so at init
// h0 = At, h1 = I - At, h2 = At - At^2, h3 = At^2 - At^4).
struct FilterBank {
    int order = 0;                // K
    std::vector<Tensor> coeffs;   // coeffs[k]: k=0 -> 1 value, k=1 -> 2, k>=2 -> k

    static FilterBank initialized(int order);
    std::size_t coeff_count(int k) const;
};

// Powers At^(2^0), At^(2^1), ..., At^(2^(K-1)) by repeated squaring; they are
// shared by every filter evaluated against the same normalized adjacency.
std::vector<Tensor> adjacency_powers(const Tensor& normalized, int order);

Tensor eval_filter(const FilterBank& bank, int k, const Tensor& normalized,
                   const std::vector<Tensor>& powers);
Tensor eval_filter(const FilterBank& bank, int k, const Tensor& normalized);

// One scattering layer: H_k = tanh(h_k(At) . X . W_k) for k = 0..K.
std::vector<Tensor> scatter_layer(const Tensor& x, const std::vector<Tensor>& filters,
                                  const std::vector<Tensor>& weights);
std::vector<Tensor> scatter_layer(const Tensor& x, const PoseGraph& graph, const FilterBank& bank,
                                  const std::vector<Tensor>& weights);

// L-layer tree. Within a layer, banks/weights may be shared across all
// branches (groups() == 1) or given per branch.
struct ScatterTree {
    int depth = 0;  // L
    int order = 0;  // K
    bool shared = true;
    // [layer][group]; group count is 1 when shared, else (K+1)^layer.
    std::vector<std::vector<FilterBank>> banks;
    std::vector<std::vector<std::vector<Tensor>>> weights;  // [layer][group][k]

    static ScatterTree initialized(int depth, int order, std::size_t width, bool shared, Rng& rng);
    std::size_t groups(int layer) const { return banks[layer].size(); }
    std::size_t leaf_channels() const;
};

// Filter matrices for one (graph, tree) pair, evaluated once per forward
// pass and reused by every input routed through the tree.
struct PreparedFilters {
    std::vector<std::vector<std::vector<Tensor>>> filters;  // [layer][group][k]
};

PreparedFilters prepare_filters(const PoseGraph& graph, const ScatterTree& tree);

// All layers of the decomposition; element [l] holds (K+1)^(l+1) channels.
// Leaves are ordered so that the channel index written in base K+1 spells
// the filter path, most-significant digit first.
std::vector<std::vector<Tensor>> scatter_tree_layers(const Tensor& x, const ScatterTree& tree,
                                                     const PreparedFilters& prepared);
std::vector<Tensor> scatter_tree(const Tensor& x, const PoseGraph& graph, const ScatterTree& tree);

// Learned spectrum aggregation. For channels {H_k}:
//   H_sp = ReLU(mean_k(H_k) . W_sp)
//   e_k  = mean over nodes of f2(tanh(f1([H_sp, H_k])))
//   w    = softmax(e),  fused = sum_k w_k H_k
// f2 carries no bias: a shared score offset cannot move the softmax, so it
// would be an untrainable parameter.
struct SpectrumAggregator {
    Tensor w_sp;   // C' x C'
    Affine f1;     // 2C' -> d_att
    Tensor f2_w;   // d_att x 1

    SpectrumAggregator() = default;
    SpectrumAggregator(std::size_t width, std::size_t d_att, Rng& rng);
};

struct AggregateResult {
    Tensor fused;    // M' x C'
    Tensor weights;  // 1 x n_channels, positive, sums to 1
};

AggregateResult aggregate_spectrum(const std::vector<Tensor>& channels,
                                   const SpectrumAggregator& agg);

// Plain arithmetic mean of the channels (ablation variant).
Tensor aggregate_average(const std::vector<Tensor>& channels);

// CSV dump of per-layer channel responses: header "layer,channel,node,f0,...",
// one row per (layer, channel, node), 17-significant-digit values, LF endings.
void dump_responses(const std::vector<std::vector<Tensor>>& per_layer, const std::string& path);

}  // namespace spgsn
