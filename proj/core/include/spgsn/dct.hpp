#pragma once

#include "spgsn/motion.hpp"
#include "spgsn/tensor.hpp"

namespace spgsn {

// Temporal transform layer: clips <-> per-node DCT coefficients.
//
// The transform is the orthonormal DCT-II / DCT-III pair,
//   c_k = s_k * sum_n x_n cos(pi (2n+1) k / 2N),  s_0 = sqrt(1/N), s_k = sqrt(2/N),
// applied independently to each of the 3M coordinate columns. It is computed
// by a dense N x N basis matrix; at the sequence lengths used here the dense
// form is faster to reason about and is exactly invertible (B B^T = I).
// All operations below are differentiable tensor graph nodes.

// Orthonormal DCT-II basis: row k, column n holds s_k cos(pi (2n+1) k / 2N).
Tensor dct_basis(std::size_t n);

// T x M x 3 clip -> T x 3M matrix; row t is (x1,y1,z1,...,xM,yM,zM).
Tensor flatten_spatial(const MotionClip& clip);
MotionClip unflatten_spatial(const Tensor& seq, std::size_t joints, double frame_rate);

// Appends `horizon` copies of the last row.
Tensor pad_last_frame(const Tensor& seq, std::size_t horizon);

// seq is [N x 3M]; keeps the first `coeffs` DCT coefficients per column and
// returns them transposed as a frequency pose of shape [3M x coeffs].
Tensor dct_encode(const Tensor& seq, std::size_t coeffs);

// Inverse: missing coefficients are treated as zero. Exact inverse of
// dct_encode when coeffs == total_frames.
Tensor idct_decode(const Tensor& freq_pose, std::size_t total_frames);

}  // namespace spgsn
