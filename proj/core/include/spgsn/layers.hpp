#pragma once

#include "spgsn/rng.hpp"
#include "spgsn/tensor.hpp"

namespace spgsn {

// Single affine map x -> x.W + b applied row-wise. W is [in x out],
// b is [1 x out]; the bias broadcast is expressed as ones(m,1).b so it
// stays inside the primitive-op set.
struct Affine {
    Tensor w;
    Tensor b;

    Affine() = default;
    Affine(std::size_t in, std::size_t out, Rng& rng);

    Tensor apply(const Tensor& x) const;
    std::size_t in_dim() const { return w.rows(); }
    std::size_t out_dim() const { return w.cols(); }
};

// Two-layer map affine -> tanh -> affine. `linear` skips the tanh; it exists
// so tests can instantiate an exactly-identity MLP.
struct Mlp {
    Affine first;
    Affine second;
    bool linear = false;

    Mlp() = default;
    Mlp(std::size_t in, std::size_t hiddenw, std::size_t out, Rng& rng);

    Tensor apply(const Tensor& x) const;
};

// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases zero.
Tensor init_weight(std::size_t in, std::size_t out, Rng& rng);

}  // namespace spgsn
