#include "spgsn/dct.hpp"

#include <cmath>
#include <numbers>

#include "spgsn/error.hpp"

namespace spgsn {

Tensor dct_basis(std::size_t n) {
    if (n < 1) throw ContractError("dct_basis: need N >= 1");
    std::vector<double> b(n * n);
    const double s0 = std::sqrt(1.0 / static_cast<double>(n));
    const double sk = std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
        const double s = (k == 0) ? s0 : sk;
        for (std::size_t t = 0; t < n; ++t)
            b[k * n + t] =
                s * std::cos(std::numbers::pi * (2.0 * t + 1.0) * k / (2.0 * static_cast<double>(n)));
    }
    return Tensor::from({n, n}, std::move(b));
}

Tensor flatten_spatial(const MotionClip& clip) {
    if (clip.frames() < 1 || clip.joints < 1)
        throw ContractError("flatten_spatial: empty clip");
    // The clip's (frame, joint, coord) layout is already row-major T x 3M.
    return Tensor::from({clip.frames(), clip.joints * 3}, clip.data);
}

MotionClip unflatten_spatial(const Tensor& seq, std::size_t joints, double frame_rate) {
    if (seq.cols() != joints * 3)
        throw DimensionError("unflatten_spatial: " + std::to_string(joints) +
                             " joints want 3M = " + std::to_string(3 * joints) +
                             " columns, got shape " + shape_str(seq.shape()));
    MotionClip clip;
    clip.joints = joints;
    clip.frame_rate = frame_rate;
    clip.data = seq.values();
    return clip;
}

Tensor pad_last_frame(const Tensor& seq, std::size_t horizon) {
    if (seq.rank() != 2 || seq.rows() < 1)
        throw ContractError("pad_last_frame: empty sequence");
    std::vector<std::size_t> idx(seq.rows() + horizon);
    for (std::size_t i = 0; i < seq.rows(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < horizon; ++i) idx[seq.rows() + i] = seq.rows() - 1;
    return row_gather(seq, idx);
}

Tensor dct_encode(const Tensor& seq, std::size_t coeffs) {
    const std::size_t n = seq.rows();
    if (coeffs < 1 || coeffs > n)
        throw ContractError("dct_encode: coefficient count " + std::to_string(coeffs) +
                            " out of range [1, " + std::to_string(n) + "]");
    Tensor full = matmul(dct_basis(n), seq);  // [N x 3M], row k = k-th coefficient
    if (coeffs < n) {
        std::vector<std::size_t> keep(coeffs);
        for (std::size_t i = 0; i < coeffs; ++i) keep[i] = i;
        full = row_gather(full, keep);
    }
    return transpose(full);  // [3M x C]
}

Tensor idct_decode(const Tensor& freq_pose, std::size_t total_frames) {
    const std::size_t coeffs = freq_pose.cols();
    if (coeffs > total_frames)
        throw ContractError("idct_decode: " + std::to_string(coeffs) +
                            " coefficients exceed sequence length " +
                            std::to_string(total_frames));
    Tensor rows = transpose(freq_pose);  // [C x 3M]
    if (coeffs < total_frames) {
        std::vector<std::size_t> idx(coeffs);
        for (std::size_t i = 0; i < coeffs; ++i) idx[i] = i;
        rows = row_scatter(rows, idx, total_frames);  // zero-fill the tail
    }
    return matmul(transpose(dct_basis(total_frames)), rows);  // [N x 3M]
}

}  // namespace spgsn
