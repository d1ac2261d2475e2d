#include "spgsn/layers.hpp"

#include <cmath>

namespace spgsn {

Tensor init_weight(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    return Tensor::random({in, out}, [&] { return rng.uniform(-bound, bound); }, true);
}

Affine::Affine(std::size_t in, std::size_t out, Rng& rng)
    : w(init_weight(in, out, rng)), b(Tensor::zeros({1, out}, true)) {}

Tensor Affine::apply(const Tensor& x) const {
    Tensor y = matmul(x, w);
    Tensor ones = Tensor::full({x.rows(), 1}, 1.0);
    return add(y, matmul(ones, b));
}

Mlp::Mlp(std::size_t in, std::size_t hiddenw, std::size_t out, Rng& rng)
    : first(in, hiddenw, rng), second(hiddenw, out, rng) {}

Tensor Mlp::apply(const Tensor& x) const {
    Tensor h = first.apply(x);
    if (!linear) h = tanh(h);
    return second.apply(h);
}

}  // namespace spgsn
