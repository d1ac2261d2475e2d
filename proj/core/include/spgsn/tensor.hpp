#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace spgsn {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

namespace detail {

// One node of the computation graph. Interior nodes carry a backprop
// closure that reads this node's gradient and accumulates into the parents'.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    std::size_t size() const { return value.size(); }
    bool is_leaf() const { return parents.empty(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Dense 64-bit float tensor participating in reverse-mode differentiation.
// A Tensor is a cheap handle onto a graph node; copying shares the node.
// The graph is rebuilt on every forward pass (define-by-run), so a tensor
// created from fresh parameter values always sees the current parameters.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);  // shape {1,1}
    static Tensor eye(std::size_t n);
    // i.i.d. uniform entries in [lo, hi), drawn from `draw()`.
    static Tensor random(Shape shape, const std::function<double()>& draw, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rank() const;
    std::size_t rows() const;  // rank-2 only
    std::size_t cols() const;  // rank-2 only
    bool is_scalar() const { return size() == 1; }

    const std::vector<double>& values() const;
    // Mutable access to a leaf's storage (parameter updates, perturbations).
    std::vector<double>& values_mut();
    double item() const;  // scalar tensors
    double at(std::size_t i, std::size_t j) const;

    bool requires_grad() const;
    // Gradient buffer; zeros if backward has not touched this tensor yet.
    const std::vector<double>& grad() const;
    void zero_grad();

    std::shared_ptr<detail::Node> node() const { return n_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::Node> n_;
    friend Tensor make_op(Shape, std::vector<double>, std::vector<Tensor>,
                          std::function<void(detail::Node&)>);
};

// --- primitive operations ----------------------------------------------
// Shapes must match exactly except where a 1x1 scalar operand is noted.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);  // same shape, or either side scalar
Tensor sub(const Tensor& a, const Tensor& b);  // same shape, or either side scalar
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard; either side may be scalar
Tensor scale(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);  // subgradient at 0 is defined as 0
Tensor exp(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);  // max-subtracted, per slice
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor mean(const Tensor& a);  // over all entries -> 1x1
Tensor sum(const Tensor& a);   // over all entries -> 1x1
Tensor transpose(const Tensor& a);
Tensor row_gather(const Tensor& a, const std::vector<std::size_t>& idx);
Tensor row_scatter(const Tensor& a, const std::vector<std::size_t>& idx, std::size_t total_rows);
Tensor pick(const Tensor& a, std::size_t flat_index);      // -> 1x1
Tensor concat_scalars(const std::vector<Tensor>& scalars);  // -> 1xK
Tensor clamp_min(const Tensor& a, double floor);  // gradient passes only where a > floor
Tensor recip(const Tensor& a);

// --- backward pass -------------------------------------------------------

// Topologically ordered view of the graph below a root: every node's inputs
// precede it, and the backward sweep visits each node exactly once in
// reverse. Only grad-requiring nodes are recorded.
class Tape {
public:
    static Tape from(const Tensor& root);
    std::size_t node_count() const { return order_.size(); }
    // Seeds d(root)/d(root) = 1 and propagates. Leaf gradients accumulate
    // across repeated calls; interior gradients are recomputed fresh.
    void run_backward();

private:
    std::shared_ptr<detail::Node> root_;
    std::vector<detail::Node*> order_;
};

// Reverse-mode sweep from a scalar loss. Every requires_grad tensor
// reachable from it receives d(loss)/d(tensor); repeated calls without
// zero_grad accumulate into leaf (parameter) gradients.
void backward(const Tensor& loss);

// --- finite-difference oracle ---------------------------------------------

struct GradCheckGroup {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t entries = 0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::vector<GradCheckGroup> groups;
};

// Central-difference check of d f / d theta for every entry of every named
// parameter. `f` must rebuild the forward graph from the current parameter
// values and return the scalar loss tensor. Relative error uses
// max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double eps = 1e-5);

}  // namespace spgsn
