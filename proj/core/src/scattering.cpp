#include "spgsn/scattering.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spgsn/error.hpp"

namespace spgsn {

Tensor normalize_adjacency(const Tensor& a) {
    if (a.rank() != 2 || a.rows() != a.cols())
        throw DimensionError("normalize_adjacency: adjacency must be square, got " +
                             shape_str(a.shape()));
    Tensor norm_sq = clamp_min(sum(mul(a, a)), 1e-8);
    Tensor scaled = mul(recip(norm_sq), a);
    return scale(add(Tensor::eye(a.rows()), scaled), 0.5);
}

Tensor PoseGraph::normalized() const { return normalize_adjacency(adjacency); }

FilterBank FilterBank::initialized(int order) {
    if (order < 0) throw ContractError("FilterBank: order must be >= 0");
    FilterBank bank;
    bank.order = order;
    for (int k = 0; k <= order; ++k) {
        const std::size_t n = bank.coeff_count(k);
        std::vector<double> c(n, 0.0);
        if (k == 0) {
            c[0] = 1.0;  // alpha(0,0)
        } else if (k == 1) {
            c[0] = 1.0;   // alpha(1,0) on I
            c[1] = -1.0;  // alpha(1,1) on At
        } else {
            // coeffs index j-1 holds alpha(k,j), j = 1..k
            c[k - 2] = 1.0;   // alpha(k,k-1)
            c[k - 1] = -1.0;  // alpha(k,k)
        }
        bank.coeffs.push_back(Tensor::from({1, n}, std::move(c), true));
    }
    return bank;
}

std::size_t FilterBank::coeff_count(int k) const {
    if (k == 0) return 1;
    if (k == 1) return 2;
    return static_cast<std::size_t>(k);
}

std::vector<Tensor> adjacency_powers(const Tensor& normalized, int order) {
    // powers[j] = At^(2^j); h_K needs up to exponent 2^(K-1).
    std::vector<Tensor> powers;
    if (order < 1) return powers;
    powers.push_back(normalized);
    for (int j = 1; j < order; ++j)
        powers.push_back(matmul(powers.back(), powers.back()));
    return powers;
}

Tensor eval_filter(const FilterBank& bank, int k, const Tensor& normalized,
                   const std::vector<Tensor>& powers) {
    if (k < 0 || k > bank.order)
        throw ContractError("eval_filter: k = " + std::to_string(k) +
                            " outside bank order K = " + std::to_string(bank.order));
    const Tensor& alpha = bank.coeffs[static_cast<std::size_t>(k)];
    if (k == 0) return mul(pick(alpha, 0), normalized);
    if (k == 1) {
        Tensor ident = Tensor::eye(normalized.rows());
        return add(mul(pick(alpha, 0), ident), mul(pick(alpha, 1), normalized));
    }
    Tensor acc;
    for (int j = 1; j <= k; ++j) {
        Tensor term = mul(pick(alpha, static_cast<std::size_t>(j - 1)),
                          powers[static_cast<std::size_t>(j - 1)]);
        acc = acc.defined() ? add(acc, term) : term;
    }
    return acc;
}

Tensor eval_filter(const FilterBank& bank, int k, const Tensor& normalized) {
    return eval_filter(bank, k, normalized, adjacency_powers(normalized, bank.order));
}

std::vector<Tensor> scatter_layer(const Tensor& x, const std::vector<Tensor>& filters,
                                  const std::vector<Tensor>& weights) {
    if (filters.size() != weights.size())
        throw ContractError("scatter_layer: " + std::to_string(filters.size()) +
                            " filters vs " + std::to_string(weights.size()) + " weight matrices");
    std::vector<Tensor> channels;
    channels.reserve(filters.size());
    std::size_t out_cols = 0;
    for (std::size_t k = 0; k < filters.size(); ++k) {
        if (k == 0)
            out_cols = weights[k].cols();
        else if (weights[k].cols() != out_cols)
            throw DimensionError("scatter_layer: W_" + std::to_string(k) + " has " +
                                 std::to_string(weights[k].cols()) + " columns, expected " +
                                 std::to_string(out_cols));
        channels.push_back(tanh(matmul(matmul(filters[k], x), weights[k])));
    }
    return channels;
}

std::vector<Tensor> scatter_layer(const Tensor& x, const PoseGraph& graph, const FilterBank& bank,
                                  const std::vector<Tensor>& weights) {
    Tensor normalized = graph.normalized();
    std::vector<Tensor> powers = adjacency_powers(normalized, bank.order);
    std::vector<Tensor> filters;
    for (int k = 0; k <= bank.order; ++k)
        filters.push_back(eval_filter(bank, k, normalized, powers));
    return scatter_layer(x, filters, weights);
}

ScatterTree ScatterTree::initialized(int depth, int order, std::size_t width, bool shared,
                                     Rng& rng) {
    if (depth < 1) throw ContractError("ScatterTree: depth L must be >= 1");
    if (order < 0) throw ContractError("ScatterTree: order K must be >= 0");
    ScatterTree tree;
    tree.depth = depth;
    tree.order = order;
    tree.shared = shared;
    std::size_t branches = 1;
    for (int l = 0; l < depth; ++l) {
        const std::size_t groups = shared ? 1 : branches;
        std::vector<FilterBank> layer_banks;
        std::vector<std::vector<Tensor>> layer_weights;
        for (std::size_t g = 0; g < groups; ++g) {
            layer_banks.push_back(FilterBank::initialized(order));
            std::vector<Tensor> w;
            for (int k = 0; k <= order; ++k) w.push_back(init_weight(width, width, rng));
            layer_weights.push_back(std::move(w));
        }
        tree.banks.push_back(std::move(layer_banks));
        tree.weights.push_back(std::move(layer_weights));
        branches *= static_cast<std::size_t>(order) + 1;
    }
    return tree;
}

std::size_t ScatterTree::leaf_channels() const {
    std::size_t n = 1;
    for (int l = 0; l < depth; ++l) n *= static_cast<std::size_t>(order) + 1;
    return n;
}

PreparedFilters prepare_filters(const PoseGraph& graph, const ScatterTree& tree) {
    Tensor normalized = graph.normalized();
    std::vector<Tensor> powers = adjacency_powers(normalized, tree.order);
    PreparedFilters out;
    out.filters.resize(tree.banks.size());
    for (std::size_t l = 0; l < tree.banks.size(); ++l) {
        for (const FilterBank& bank : tree.banks[l]) {
            std::vector<Tensor> fs;
            for (int k = 0; k <= tree.order; ++k)
                fs.push_back(eval_filter(bank, k, normalized, powers));
            out.filters[l].push_back(std::move(fs));
        }
    }
    return out;
}

std::vector<std::vector<Tensor>> scatter_tree_layers(const Tensor& x, const ScatterTree& tree,
                                                     const PreparedFilters& prepared) {
    std::vector<std::vector<Tensor>> layers;
    std::vector<Tensor> frontier = {x};
    for (int l = 0; l < tree.depth; ++l) {
        std::vector<Tensor> next;
        next.reserve(frontier.size() * (static_cast<std::size_t>(tree.order) + 1));
        for (std::size_t b = 0; b < frontier.size(); ++b) {
            const std::size_t g = tree.shared ? 0 : b;
            auto channels = scatter_layer(frontier[b], prepared.filters[l][g],
                                          tree.weights[l][g]);
            for (auto& c : channels) next.push_back(std::move(c));
        }
        layers.push_back(next);
        frontier = std::move(next);
    }
    return layers;
}

std::vector<Tensor> scatter_tree(const Tensor& x, const PoseGraph& graph,
                                 const ScatterTree& tree) {
    return scatter_tree_layers(x, tree, prepare_filters(graph, tree)).back();
}

SpectrumAggregator::SpectrumAggregator(std::size_t width, std::size_t d_att, Rng& rng)
    : w_sp(init_weight(width, width, rng)),
      f1(2 * width, d_att, rng),
      f2_w(init_weight(d_att, 1, rng)) {}

AggregateResult aggregate_spectrum(const std::vector<Tensor>& channels,
                                   const SpectrumAggregator& agg) {
    if (channels.empty()) throw ContractError("aggregate_spectrum: no channels");
    Tensor mean_channels = aggregate_average(channels);
    Tensor spectrum = relu(matmul(mean_channels, agg.w_sp));

    std::vector<Tensor> scores;
    scores.reserve(channels.size());
    for (const Tensor& h : channels) {
        Tensor hidden = tanh(agg.f1.apply(concat_cols(spectrum, h)));
        scores.push_back(mean(matmul(hidden, agg.f2_w)));  // scalar score per channel
    }
    Tensor weights = softmax(concat_scalars(scores), 1);

    Tensor fused;
    for (std::size_t k = 0; k < channels.size(); ++k) {
        Tensor term = mul(pick(weights, k), channels[k]);
        fused = fused.defined() ? add(fused, term) : term;
    }
    return {fused, weights};
}

Tensor aggregate_average(const std::vector<Tensor>& channels) {
    if (channels.empty()) throw ContractError("aggregate_average: no channels");
    Tensor acc = channels[0];
    for (std::size_t k = 1; k < channels.size(); ++k) acc = add(acc, channels[k]);
    return scale(acc, 1.0 / static_cast<double>(channels.size()));
}

void dump_responses(const std::vector<std::vector<Tensor>>& per_layer, const std::string& path) {
    std::size_t feature_width = 0;
    for (const auto& layer : per_layer)
        for (const auto& channel : layer) feature_width = std::max(feature_width, channel.cols());

    std::ostringstream out;
    out << "layer,channel,node";
    for (std::size_t f = 0; f < feature_width; ++f) out << ",f" << f;
    out << '\n';
    char buf[40];
    for (std::size_t l = 0; l < per_layer.size(); ++l) {
        for (std::size_t c = 0; c < per_layer[l].size(); ++c) {
            const Tensor& h = per_layer[l][c];
            for (std::size_t node = 0; node < h.rows(); ++node) {
                out << (l + 1) << ',' << c << ',' << node;
                for (std::size_t f = 0; f < h.cols(); ++f) {
                    std::snprintf(buf, sizeof(buf), "%.17g", h.at(node, f));
                    out << ',' << buf;
                }
                out << '\n';
            }
        }
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("dump_responses: cannot open '" + path + "'");
    file << out.str();
    if (!file) throw IoError("dump_responses: write failed for '" + path + "'");
}

}  // namespace spgsn
