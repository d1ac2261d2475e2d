#include "spgsn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "spgsn/error.hpp"

namespace spgsn {

using detail::Node;

std::string shape_str(const Shape& s) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out << ',';
        out << s[i];
    }
    out << ']';
    return out.str();
}

namespace {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

void require_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2)
        throw DimensionError(std::string(who) + ": expected a rank-2 tensor, got shape " +
                             shape_str(t.shape()));
}

void require_defined(const Tensor& t, const char* who) {
    if (!t.defined()) throw ContractError(std::string(who) + ": undefined tensor");
}

}  // namespace

Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    for (const auto& p : parents) {
        n->parents.push_back(p.node());
        if (p.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) n->backprop = std::move(backprop);
    return Tensor(std::move(n));
}

// --- construction ----------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value.assign(shape_numel(shape), v);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw DimensionError("Tensor::from: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1, 1}, {v}, requires_grad);
}

Tensor Tensor::eye(std::size_t n) {
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
    return from({n, n}, std::move(d));
}

Tensor Tensor::random(Shape shape, const std::function<double()>& draw, bool requires_grad) {
    std::vector<double> d(shape_numel(shape));
    for (auto& x : d) x = draw();
    return from(std::move(shape), std::move(d), requires_grad);
}

// --- accessors ---------------------------------------------------------------

const Shape& Tensor::shape() const {
    require_defined(*this, "shape");
    return n_->shape;
}
std::size_t Tensor::size() const {
    require_defined(*this, "size");
    return n_->value.size();
}
std::size_t Tensor::rank() const { return shape().size(); }
std::size_t Tensor::rows() const {
    require_rank2(*this, "rows");
    return n_->shape[0];
}
std::size_t Tensor::cols() const {
    require_rank2(*this, "cols");
    return n_->shape[1];
}
const std::vector<double>& Tensor::values() const {
    require_defined(*this, "values");
    return n_->value;
}
std::vector<double>& Tensor::values_mut() {
    require_defined(*this, "values_mut");
    if (!n_->is_leaf())
        throw ContractError("values_mut: only leaf tensors may be mutated in place");
    return n_->value;
}
double Tensor::item() const {
    if (size() != 1) throw ContractError("item: tensor of shape " + shape_str(shape()) + " is not scalar");
    return n_->value[0];
}
double Tensor::at(std::size_t i, std::size_t j) const {
    require_rank2(*this, "at");
    return n_->value[i * n_->shape[1] + j];
}
bool Tensor::requires_grad() const {
    require_defined(*this, "requires_grad");
    return n_->requires_grad;
}
const std::vector<double>& Tensor::grad() const {
    require_defined(*this, "grad");
    n_->ensure_grad();
    return n_->grad;
}
void Tensor::zero_grad() {
    require_defined(*this, "zero_grad");
    n_->grad.assign(n_->value.size(), 0.0);
}

// --- helpers for adjoints ----------------------------------------------------

namespace {

inline void accumulate(Node& parent, const std::vector<double>& contribution) {
    parent.ensure_grad();
    for (std::size_t i = 0; i < contribution.size(); ++i) parent.grad[i] += contribution[i];
}

// a op b where either side may be a 1x1 scalar broadcast over the other.
enum class Broadcast { none, left_scalar, right_scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* who) {
    if (a.shape() == b.shape()) return Broadcast::none;
    if (a.size() == 1) return Broadcast::left_scalar;
    if (b.size() == 1) return Broadcast::right_scalar;
    throw DimensionError(std::string(who) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " are neither equal nor scalar-broadcastable");
}

}  // namespace

// --- primitives ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
    if (b.rows() != n)
        throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    std::vector<double> out(m * p, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = av[i * n + k];
            if (aik == 0.0) continue;
            const double* brow = &bv[k * p];
            double* crow = &out[i * p];
            for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
        }
    }
    auto an = a.node();
    auto bn = b.node();
    return make_op({m, p}, std::move(out), {a, b}, [an, bn, m, n, p](Node& self) {
        const auto& g = self.grad;
        if (an->requires_grad) {
            an->ensure_grad();
            // dA = g . B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t k = 0; k < n; ++k) {
                    double acc = 0.0;
                    const double* grow = &g[i * p];
                    const double* brow = &bn->value[k * p];
                    for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
                    an->grad[i * n + k] += acc;
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            // dB = A^T . g
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t k = 0; k < n; ++k) {
                    const double aik = an->value[i * n + k];
                    if (aik == 0.0) continue;
                    const double* grow = &g[i * p];
                    double* brow = &bn->grad[k * p];
                    for (std::size_t j = 0; j < p; ++j) brow[j] += aik * grow[j];
                }
        }
    });
}

namespace {

Tensor pointwise_binary(const Tensor& a, const Tensor& b, const char* who,
                        double (*fwd)(double, double),
                        void (*adj)(Node&, Node&, Node&, Broadcast)) {
    require_defined(a, who);
    require_defined(b, who);
    const Broadcast bc = broadcast_kind(a, b, who);
    const Shape& out_shape = (bc == Broadcast::left_scalar) ? b.shape() : a.shape();
    const std::size_t n = shape_numel(out_shape);
    std::vector<double> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (bc == Broadcast::left_scalar) ? av[0] : av[i];
        const double y = (bc == Broadcast::right_scalar) ? bv[0] : bv[i];
        out[i] = fwd(x, y);
    }
    auto an = a.node();
    auto bn = b.node();
    return make_op(out_shape, std::move(out), {a, b},
                   [an, bn, bc, adj](Node& self) { adj(self, *an, *bn, bc); });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return pointwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](Node& self, Node& an, Node& bn, Broadcast bc) {
            const auto& g = self.grad;
            if (an.requires_grad) {
                an.ensure_grad();
                if (bc == Broadcast::left_scalar)
                    for (double gi : g) an.grad[0] += gi;
                else
                    for (std::size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i];
            }
            if (bn.requires_grad) {
                bn.ensure_grad();
                if (bc == Broadcast::right_scalar)
                    for (double gi : g) bn.grad[0] += gi;
                else
                    for (std::size_t i = 0; i < g.size(); ++i) bn.grad[i] += g[i];
            }
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return pointwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](Node& self, Node& an, Node& bn, Broadcast bc) {
            const auto& g = self.grad;
            if (an.requires_grad) {
                an.ensure_grad();
                if (bc == Broadcast::left_scalar)
                    for (double gi : g) an.grad[0] += gi;
                else
                    for (std::size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i];
            }
            if (bn.requires_grad) {
                bn.ensure_grad();
                if (bc == Broadcast::right_scalar)
                    for (double gi : g) bn.grad[0] -= gi;
                else
                    for (std::size_t i = 0; i < g.size(); ++i) bn.grad[i] -= g[i];
            }
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return pointwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](Node& self, Node& an, Node& bn, Broadcast bc) {
            const auto& g = self.grad;
            if (an.requires_grad) {
                an.ensure_grad();
                if (bc == Broadcast::left_scalar) {
                    for (std::size_t i = 0; i < g.size(); ++i) an.grad[0] += g[i] * bn.value[i];
                } else if (bc == Broadcast::right_scalar) {
                    for (std::size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i] * bn.value[0];
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i] * bn.value[i];
                }
            }
            if (bn.requires_grad) {
                bn.ensure_grad();
                if (bc == Broadcast::right_scalar) {
                    for (std::size_t i = 0; i < g.size(); ++i) bn.grad[0] += g[i] * an.value[i];
                } else if (bc == Broadcast::left_scalar) {
                    for (std::size_t i = 0; i < g.size(); ++i) bn.grad[i] += g[i] * an.value[0];
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) bn.grad[i] += g[i] * an.value[i];
                }
            }
        });
}

Tensor scale(const Tensor& a, double c) {
    require_defined(a, "scale");
    std::vector<double> out(a.values());
    for (auto& x : out) x *= c;
    auto an = a.node();
    return make_op(a.shape(), std::move(out), {a}, [an, c](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += c * self.grad[i];
    });
}

namespace {

Tensor pointwise_unary(const Tensor& a, const char* who, double (*fwd)(double),
                       double (*dydx_from)(double x, double y)) {
    require_defined(a, who);
    const std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.values()[i]);
    auto an = a.node();
    return make_op(a.shape(), std::move(out), {a}, [an, dydx_from](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * dydx_from(an->value[i], self.value[i]);
    });
}

}  // namespace

Tensor tanh(const Tensor& a) {
    return pointwise_unary(
        a, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    return pointwise_unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
    return pointwise_unary(
        a, "exp", [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Tensor clamp_min(const Tensor& a, double floor) {
    require_defined(a, "clamp_min");
    const std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(a.values()[i], floor);
    auto an = a.node();
    return make_op(a.shape(), std::move(out), {a}, [an, floor](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (an->value[i] > floor) an->grad[i] += self.grad[i];
    });
}

Tensor recip(const Tensor& a) {
    return pointwise_unary(
        a, "recip", [](double x) { return 1.0 / x; },
        [](double, double y) { return -y * y; });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    require_rank2(a, "softmax");
    if (axis > 1)
        throw AxisError("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                        shape_str(a.shape()));
    const std::size_t r = a.rows(), c = a.cols();
    const std::size_t n_slices = (axis == 0) ? c : r;
    const std::size_t slice_len = (axis == 0) ? r : c;
    const std::size_t stride = (axis == 0) ? c : 1;
    auto slice_base = [axis, c](std::size_t s) { return (axis == 0) ? s : s * c; };

    std::vector<double> out(r * c);
    const auto& av = a.values();
    for (std::size_t s = 0; s < n_slices; ++s) {
        const std::size_t base = slice_base(s);
        double mx = av[base];
        for (std::size_t i = 1; i < slice_len; ++i) mx = std::max(mx, av[base + i * stride]);
        double denom = 0.0;
        for (std::size_t i = 0; i < slice_len; ++i) {
            const double e = std::exp(av[base + i * stride] - mx);
            out[base + i * stride] = e;
            denom += e;
        }
        for (std::size_t i = 0; i < slice_len; ++i) out[base + i * stride] /= denom;
    }
    auto an = a.node();
    return make_op(a.shape(), std::move(out), {a},
                   [an, n_slices, slice_len, stride, slice_base](Node& self) {
                       if (!an->requires_grad) return;
                       an->ensure_grad();
                       for (std::size_t s = 0; s < n_slices; ++s) {
                           const std::size_t base = slice_base(s);
                           double dot = 0.0;
                           for (std::size_t i = 0; i < slice_len; ++i) {
                               const std::size_t k = base + i * stride;
                               dot += self.grad[k] * self.value[k];
                           }
                           for (std::size_t i = 0; i < slice_len; ++i) {
                               const std::size_t k = base + i * stride;
                               an->grad[k] += self.value[k] * (self.grad[k] - dot);
                           }
                       }
                   });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_rank2(a, "concat_cols");
    require_rank2(b, "concat_cols");
    if (a.rows() != b.rows())
        throw DimensionError("concat_cols: row counts disagree: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols();
    std::vector<double> out(r * (ca + cb));
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(&a.values()[i * ca], ca, &out[i * (ca + cb)]);
        std::copy_n(&b.values()[i * cb], cb, &out[i * (ca + cb) + ca]);
    }
    auto an = a.node();
    auto bn = b.node();
    return make_op({r, ca + cb}, std::move(out), {a, b}, [an, bn, r, ca, cb](Node& self) {
        const std::size_t w = ca + cb;
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < ca; ++j) an->grad[i * ca + j] += self.grad[i * w + j];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < cb; ++j)
                    bn->grad[i * cb + j] += self.grad[i * w + ca + j];
        }
    });
}

Tensor mean(const Tensor& a) {
    require_defined(a, "mean");
    const std::size_t n = a.size();
    double acc = 0.0;
    for (double x : a.values()) acc += x;
    auto an = a.node();
    return make_op({1, 1}, {acc / static_cast<double>(n)}, {a}, [an, n](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const double g = self.grad[0] / static_cast<double>(n);
        for (auto& x : an->grad) x += g;
    });
}

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    double acc = 0.0;
    for (double x : a.values()) acc += x;
    auto an = a.node();
    return make_op({1, 1}, {acc}, {a}, [an](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const double g = self.grad[0];
        for (auto& x : an->grad) x += g;
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.values()[i * c + j];
    auto an = a.node();
    return make_op({c, r}, std::move(out), {a}, [an, r, c](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) an->grad[i * c + j] += self.grad[j * r + i];
    });
}

Tensor row_gather(const Tensor& a, const std::vector<std::size_t>& idx) {
    require_rank2(a, "row_gather");
    const std::size_t r = a.rows(), c = a.cols();
    for (auto i : idx)
        if (i >= r)
            throw DimensionError("row_gather: row index " + std::to_string(i) +
                                 " out of range for shape " + shape_str(a.shape()));
    std::vector<double> out(idx.size() * c);
    for (std::size_t k = 0; k < idx.size(); ++k)
        std::copy_n(&a.values()[idx[k] * c], c, &out[k * c]);
    auto an = a.node();
    auto indices = idx;
    return make_op({idx.size(), c}, std::move(out), {a}, [an, indices, c](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t k = 0; k < indices.size(); ++k)
            for (std::size_t j = 0; j < c; ++j)
                an->grad[indices[k] * c + j] += self.grad[k * c + j];
    });
}

Tensor row_scatter(const Tensor& a, const std::vector<std::size_t>& idx, std::size_t total_rows) {
    require_rank2(a, "row_scatter");
    const std::size_t r = a.rows(), c = a.cols();
    if (idx.size() != r)
        throw DimensionError("row_scatter: got " + std::to_string(idx.size()) +
                             " indices for " + std::to_string(r) + " rows");
    for (auto i : idx)
        if (i >= total_rows)
            throw DimensionError("row_scatter: target row " + std::to_string(i) +
                                 " out of range for " + std::to_string(total_rows) + " rows");
    std::vector<double> out(total_rows * c, 0.0);
    for (std::size_t k = 0; k < r; ++k)
        for (std::size_t j = 0; j < c; ++j) out[idx[k] * c + j] += a.values()[k * c + j];
    auto an = a.node();
    auto indices = idx;
    return make_op({total_rows, c}, std::move(out), {a}, [an, indices, c](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t k = 0; k < indices.size(); ++k)
            for (std::size_t j = 0; j < c; ++j)
                an->grad[k * c + j] += self.grad[indices[k] * c + j];
    });
}

Tensor pick(const Tensor& a, std::size_t flat_index) {
    require_defined(a, "pick");
    if (flat_index >= a.size())
        throw DimensionError("pick: index " + std::to_string(flat_index) +
                             " out of range for shape " + shape_str(a.shape()));
    auto an = a.node();
    return make_op({1, 1}, {a.values()[flat_index]}, {a}, [an, flat_index](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        an->grad[flat_index] += self.grad[0];
    });
}

Tensor concat_scalars(const std::vector<Tensor>& scalars) {
    if (scalars.empty()) throw ContractError("concat_scalars: empty list");
    std::vector<double> out(scalars.size());
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (scalars[i].size() != 1)
            throw DimensionError("concat_scalars: entry " + std::to_string(i) +
                                 " has shape " + shape_str(scalars[i].shape()));
        out[i] = scalars[i].values()[0];
    }
    std::vector<std::shared_ptr<Node>> ps;
    for (const auto& s : scalars) ps.push_back(s.node());
    return make_op({1, scalars.size()}, std::move(out), scalars, [ps](Node& self) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (!ps[i]->requires_grad) continue;
            ps[i]->ensure_grad();
            ps[i]->grad[0] += self.grad[i];
        }
    });
}

// --- backward ---------------------------------------------------------------

Tape Tape::from(const Tensor& root) {
    require_defined(root, "Tape::from");
    Tape tape;
    tape.root_ = root.node();
    if (!tape.root_->requires_grad) return tape;

    // Iterative post-order DFS; emits parents before children, so order_ is
    // topological (inputs first).
    std::unordered_set<Node*> done;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(tape.root_.get(), 0);
    while (!stack.empty()) {
        Node* node = stack.back().first;
        if (done.count(node)) {
            stack.pop_back();
            continue;
        }
        bool descended = false;
        while (stack.back().second < node->parents.size()) {
            Node* p = node->parents[stack.back().second].get();
            ++stack.back().second;
            if (p->requires_grad && !done.count(p)) {
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (descended) continue;
        done.insert(node);
        tape.order_.push_back(node);
        stack.pop_back();
    }
    return tape;
}

void Tape::run_backward() {
    if (order_.empty()) return;
    // Interior gradients are scratch for this sweep; leaf gradients persist
    // so parameter gradients accumulate across sweeps.
    for (Node* n : order_) {
        if (n->is_leaf())
            n->ensure_grad();
        else
            n->grad.assign(n->value.size(), 0.0);
    }
    Node* root = order_.back();
    for (auto& g : root->grad) g += 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.size() != 1)
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_str(loss.shape()));
    Tape::from(loss).run_backward();
}

// --- finite differences ------------------------------------------------------

GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double eps) {
    if (eps <= 0.0) throw OracleError("finite_diff_check: eps must be positive");

    for (auto& [name, p] : params) const_cast<Tensor&>(p).zero_grad();
    Tensor loss = f();
    if (!std::isfinite(loss.item()))
        throw OracleError("finite_diff_check: non-finite loss " + std::to_string(loss.item()));
    backward(loss);

    // Snapshot analytic gradients before perturbing anything.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& [name, p] : params) analytic.push_back(p.grad());

    GradCheckReport report;
    auto eval = [&]() {
        const double v = f().item();
        if (!std::isfinite(v))
            throw OracleError("finite_diff_check: non-finite value " + std::to_string(v) +
                              " during perturbation");
        return v;
    };
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        auto& p = const_cast<Tensor&>(params[gi].second);
        auto& vals = p.values_mut();
        GradCheckGroup group;
        group.name = params[gi].first;
        group.entries = vals.size();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + eps;
            const double up = eval();
            vals[i] = saved - eps;
            const double down = eval();
            vals[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[gi][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            group.max_rel_err = std::max(group.max_rel_err, std::fabs(a - numeric) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
        report.groups.push_back(std::move(group));
    }
    return report;
}

}  // namespace spgsn
