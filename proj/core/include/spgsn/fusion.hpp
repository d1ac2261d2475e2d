#pragma once

#include "spgsn/layers.hpp"
#include "spgsn/partition.hpp"
#include "spgsn/tensor.hpp"

namespace spgsn {

// Bipartite cross-part fusion: directed affinity graphs between two body
// parts, residual cross-part feature updates, placement of part rows back
// onto the whole body, and the final MLP fusion.

enum class AffinityAxis {
    source,      // each destination column sums to 1 (default)
    destination  // ablation: each source row sums to 1
};

// Rows of H restricted to one part's node indices, order preserved.
Tensor split_part(const Tensor& h, const std::vector<std::size_t>& nodes);

// S = f_src(Hsrc) . f_dst(Hdst)^T, softmax-normalized over the chosen axis.
// With AffinityAxis::source every column is a distribution over source
// nodes, which is what the transposed product in cross_update consumes.
Tensor affinity(const Tensor& h_src, const Tensor& h_dst, const Affine& f_src,
                const Affine& f_dst, AffinityAxis axis = AffinityAxis::source);

// Hdst + A^T . Hsrc. Both directional updates are taken from the
// pre-update features, so apply this symmetrically to the originals.
Tensor cross_update(const Tensor& h_dst, const Tensor& h_src, const Tensor& aff);

// Scatter part rows back to their whole-body indices.
Tensor place_parts(const Tensor& h_upper, const Tensor& h_lower, const BodyPartition& parts);

// MLP(H + (H_upper placed-with H_lower)).
Tensor place_and_fuse(const Tensor& h, const Tensor& h_upper, const Tensor& h_lower,
                      const BodyPartition& parts, const Mlp& mlp);

}  // namespace spgsn
