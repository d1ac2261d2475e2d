#include "spgsn/model.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spgsn/error.hpp"
#include "spgsn/rng.hpp"

using json = nlohmann::ordered_json;

namespace spgsn {

void ModelConfig::validate() const {
    if (blocks < 1) throw ConfigError("config: blocks must be >= 1");
    if (scatter_layers < 1) throw ConfigError("config: scatter_layers must be >= 1");
    if (filter_order < 0) throw ConfigError("config: filter_order must be >= 0");
    if (hidden < 1) throw ConfigError("config: hidden must be >= 1");
    if (joints < 2) throw ConfigError("config: joints must be >= 2");
    if (history < 1) throw ConfigError("config: T must be >= 1");
    if (horizon < 1) throw ConfigError("config: dT must be >= 1");
    if (dct_coeffs < 0 || dct_coeffs > history + horizon)
        throw ConfigError("config: dct_coeffs must lie in [1, T+dT] (or 0 for the default)");
    if (d_att < 0 || d_emb < 0) throw ConfigError("config: widths must be nonnegative");
    for (auto [a, b] : bones)
        if (a < 0 || b < 0 || a >= joints || b >= joints)
            throw ConfigError("config: bone (" + std::to_string(a) + "," + std::to_string(b) +
                              ") out of range");
    if (!one_body() && !upper_joints.empty())
        BodyPartition::from_joints(partition_name, upper_joints, lower_joints, joints);
}

void ModelConfig::resolve_partition(const SkeletonDef& skeleton) {
    if (joints != 0 && joints != skeleton.joints)
        throw ConfigError("config: model has " + std::to_string(joints) +
                          " joints but the manifest skeleton has " +
                          std::to_string(skeleton.joints));
    if (joints == 0) joints = skeleton.joints;
    if (bones.empty()) bones = skeleton.bones;
    if (partition_resolved()) return;
    JointSplit split = builtin_split(skeleton, partition_name);
    upper_joints = split.upper;
    lower_joints = split.lower;
}

namespace {

std::string aggregator_name(Aggregator a) {
    return a == Aggregator::spectrum ? "spectrum" : "average";
}

std::string axis_name(AffinityAxis a) {
    return a == AffinityAxis::source ? "source" : "dest";
}

}  // namespace

ModelConfig model_config_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    ModelConfig cfg;
    try {
        cfg.blocks = doc.value("blocks", cfg.blocks);
        cfg.scatter_layers = doc.value("scatter_layers", cfg.scatter_layers);
        cfg.filter_order = doc.value("filter_order", cfg.filter_order);
        cfg.hidden = doc.value("hidden", cfg.hidden);
        cfg.dct_coeffs = doc.value("dct_coeffs", 0);
        cfg.d_att = doc.value("d_att", 0);
        cfg.d_emb = doc.value("d_emb", 0);
        cfg.block_residuals = doc.value("block_residuals", true);
        cfg.global_skip = doc.value("global_skip", true);
        cfg.share_layer_weights = doc.value("share_layer_weights", true);
        const std::string agg = doc.value("aggregator", "spectrum");
        if (agg == "spectrum")
            cfg.aggregator = Aggregator::spectrum;
        else if (agg == "average")
            cfg.aggregator = Aggregator::average;
        else
            throw ConfigError("config: unknown aggregator '" + agg + "'");
        const std::string axis = doc.value("affinity_axis", "source");
        if (axis == "source")
            cfg.affinity_axis = AffinityAxis::source;
        else if (axis == "dest")
            cfg.affinity_axis = AffinityAxis::destination;
        else
            throw ConfigError("config: unknown affinity_axis '" + axis + "'");
        cfg.joints = doc.value("joints", 0);
        if (doc.contains("bones"))
            for (const auto& bone : doc.at("bones"))
                cfg.bones.emplace_back(bone.at(0).get<int>(), bone.at(1).get<int>());
        if (doc.contains("partition")) {
            const auto& part = doc.at("partition");
            if (part.is_string()) {
                cfg.partition_name = part.get<std::string>();
            } else {
                cfg.partition_name = part.value("name", "custom");
                cfg.upper_joints = part.at("upper_joints").get<std::vector<int>>();
                cfg.lower_joints = part.at("lower_joints").get<std::vector<int>>();
            }
        }
        cfg.history = doc.value("T", 0);
        cfg.horizon = doc.value("dT", 0);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

std::string model_config_to_json(const ModelConfig& cfg) {
    json doc;
    doc["blocks"] = cfg.blocks;
    doc["scatter_layers"] = cfg.scatter_layers;
    doc["filter_order"] = cfg.filter_order;
    doc["hidden"] = cfg.hidden;
    doc["dct_coeffs"] = cfg.dct_coeffs;
    doc["d_att"] = cfg.d_att;
    doc["d_emb"] = cfg.d_emb;
    doc["block_residuals"] = cfg.block_residuals;
    doc["global_skip"] = cfg.global_skip;
    doc["share_layer_weights"] = cfg.share_layer_weights;
    doc["aggregator"] = aggregator_name(cfg.aggregator);
    doc["affinity_axis"] = axis_name(cfg.affinity_axis);
    doc["joints"] = cfg.joints;
    doc["bones"] = json::array();
    for (auto [a, b] : cfg.bones) doc["bones"].push_back(json::array({a, b}));
    if (cfg.one_body()) {
        doc["partition"] = "1body";
    } else if (!cfg.upper_joints.empty()) {
        doc["partition"] = {{"name", cfg.partition_name},
                            {"upper_joints", cfg.upper_joints},
                            {"lower_joints", cfg.lower_joints}};
    } else {
        doc["partition"] = cfg.partition_name;
    }
    doc["T"] = cfg.history;
    doc["dT"] = cfg.horizon;
    return doc.dump(2);
}

// --- model ---------------------------------------------------------------

SpgsnModel::SpgsnModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    if (cfg_.bones.empty())
        for (int j = 0; j + 1 < cfg_.joints; ++j) cfg_.bones.emplace_back(j, j + 1);
    cfg_.validate();
    if (!cfg_.partition_resolved())
        throw ConfigError("config: partition '" + cfg_.partition_name +
                          "' has no joint lists; resolve it against a skeleton first");
    if (!cfg_.one_body())
        partition_ = BodyPartition::from_joints(cfg_.partition_name, cfg_.upper_joints,
                                                cfg_.lower_joints, cfg_.joints);

    Rng rng(init_seed);
    const auto width = static_cast<std::size_t>(cfg_.hidden);
    const auto coeffs = static_cast<std::size_t>(cfg_.coeffs());
    in_proj_ = Affine(coeffs, width, rng);
    out_proj_ = Affine(width, coeffs, rng);

    SkeletonDef skeleton{cfg_.joints, cfg_.bones, {}};
    auto make_graph = [&](const std::vector<int>& node_joints) {
        std::vector<double> adj = bone_adjacency(skeleton, node_joints);
        for (auto& v : adj) v += rng.uniform(-0.01, 0.01);
        const std::size_t n = node_joints.size();
        return PoseGraph(Tensor::from({n, n}, std::move(adj), true));
    };
    std::vector<int> whole_joints;
    for (int j = 0; j < cfg_.joints; ++j)
        for (int c = 0; c < 3; ++c) whole_joints.push_back(j);
    auto part_joints = [&](const std::vector<std::size_t>& nodes) {
        std::vector<int> js;
        for (auto n : nodes) js.push_back(static_cast<int>(n / 3));
        return js;
    };

    for (int b = 0; b < cfg_.blocks; ++b) {
        BlockParams bp;
        bp.whole = make_graph(whole_joints);
        if (!cfg_.one_body()) {
            bp.upper = make_graph(part_joints(partition_.upper_nodes));
            bp.lower = make_graph(part_joints(partition_.lower_nodes));
        }
        bp.tree = ScatterTree::initialized(cfg_.scatter_layers, cfg_.filter_order, width,
                                           cfg_.share_layer_weights, rng);
        if (cfg_.aggregator == Aggregator::spectrum)
            bp.agg = SpectrumAggregator(width, static_cast<std::size_t>(cfg_.att_width()), rng);
        if (!cfg_.one_body()) {
            bp.embed_upper = Affine(width, static_cast<std::size_t>(cfg_.emb_width()), rng);
            bp.embed_lower = Affine(width, static_cast<std::size_t>(cfg_.emb_width()), rng);
        }
        bp.fuse = Mlp(width, width, width, rng);
        blocks_.push_back(std::move(bp));
    }
    register_all_params();
}

void SpgsnModel::register_all_params() {
    params_.clear();
    auto reg = [&](const std::string& name, const Tensor& t) { params_.emplace_back(name, t); };
    auto reg_affine = [&](const std::string& name, const Affine& a) {
        reg(name + ".w", a.w);
        reg(name + ".b", a.b);
    };
    reg_affine("in_proj", in_proj_);
    reg_affine("out_proj", out_proj_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const std::string prefix = "block" + std::to_string(b);
        BlockParams& bp = blocks_[b];
        reg(prefix + ".whole.A", bp.whole.adjacency);
        if (!cfg_.one_body()) {
            reg(prefix + ".upper.A", bp.upper.adjacency);
            reg(prefix + ".lower.A", bp.lower.adjacency);
        }
        for (std::size_t l = 0; l < bp.tree.banks.size(); ++l)
            for (std::size_t g = 0; g < bp.tree.banks[l].size(); ++g) {
                const std::string tp =
                    prefix + ".tree.l" + std::to_string(l) + ".g" + std::to_string(g);
                for (int k = 0; k <= bp.tree.order; ++k)
                    reg(tp + ".alpha" + std::to_string(k),
                        bp.tree.banks[l][g].coeffs[static_cast<std::size_t>(k)]);
                for (int k = 0; k <= bp.tree.order; ++k)
                    reg(tp + ".W" + std::to_string(k),
                        bp.tree.weights[l][g][static_cast<std::size_t>(k)]);
            }
        if (cfg_.aggregator == Aggregator::spectrum) {
            reg(prefix + ".agg.w_sp", bp.agg.w_sp);
            reg_affine(prefix + ".agg.f1", bp.agg.f1);
            reg(prefix + ".agg.f2.w", bp.agg.f2_w);
        }
        if (!cfg_.one_body()) {
            reg_affine(prefix + ".embed_up", bp.embed_upper);
            reg_affine(prefix + ".embed_low", bp.embed_lower);
        }
        reg_affine(prefix + ".fuse.first", bp.fuse.first);
        reg_affine(prefix + ".fuse.second", bp.fuse.second);
    }
}

long long SpgsnModel::param_count() const {
    long long n = 0;
    for (const auto& [name, t] : params_) n += static_cast<long long>(t.size());
    return n;
}

void SpgsnModel::zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
}

SpgsnModel::Prepared SpgsnModel::prepare() const {
    Prepared prep;
    for (const BlockParams& bp : blocks_) {
        prep.whole.push_back(prepare_filters(bp.whole, bp.tree));
        if (!cfg_.one_body()) {
            prep.upper.push_back(prepare_filters(bp.upper, bp.tree));
            prep.lower.push_back(prepare_filters(bp.lower, bp.tree));
        }
    }
    return prep;
}

Tensor SpgsnModel::block_forward(std::size_t b, const Tensor& h_in,
                                 const Prepared& prepared) const {
    const BlockParams& bp = blocks_.at(b);
    auto aggregate = [&](const std::vector<Tensor>& channels) {
        if (cfg_.aggregator == Aggregator::spectrum)
            return aggregate_spectrum(channels, bp.agg).fused;
        return aggregate_average(channels);
    };

    Tensor whole = aggregate(scatter_tree_layers(h_in, bp.tree, prepared.whole[b]).back());
    Tensor fused;
    if (cfg_.one_body()) {
        fused = bp.fuse.apply(add(whole, whole));
    } else {
        Tensor upper_in = split_part(h_in, partition_.upper_nodes);
        Tensor lower_in = split_part(h_in, partition_.lower_nodes);
        Tensor h_up = aggregate(scatter_tree_layers(upper_in, bp.tree, prepared.upper[b]).back());
        Tensor h_low = aggregate(scatter_tree_layers(lower_in, bp.tree, prepared.lower[b]).back());
        // Both directed affinities, then both updates from the pre-update
        // features.
        Tensor up_to_low =
            affinity(h_up, h_low, bp.embed_upper, bp.embed_lower, cfg_.affinity_axis);
        Tensor low_to_up =
            affinity(h_low, h_up, bp.embed_lower, bp.embed_upper, cfg_.affinity_axis);
        Tensor new_low = cross_update(h_low, h_up, up_to_low);
        Tensor new_up = cross_update(h_up, h_low, low_to_up);
        fused = place_and_fuse(whole, new_up, new_low, partition_, bp.fuse);
    }
    return cfg_.block_residuals ? add(h_in, fused) : fused;
}

Tensor SpgsnModel::block_forward(std::size_t b, const Tensor& h_in) const {
    return block_forward(b, h_in, prepare());
}

Tensor SpgsnModel::forward_coeffs(const Tensor& x_minus, const Prepared& prepared) const {
    Tensor h = in_proj_.apply(x_minus);
    for (std::size_t b = 0; b < blocks_.size(); ++b) h = block_forward(b, h, prepared);
    Tensor out = out_proj_.apply(h);
    if (cfg_.global_skip) out = add(out, x_minus);  // residual DCT coefficients
    return out;
}

Tensor SpgsnModel::predict_taped(const Tensor& history_flat, const Prepared& prepared) const {
    if (history_flat.cols() != static_cast<std::size_t>(cfg_.nodes()))
        throw DimensionError("predict: history has " + std::to_string(history_flat.cols()) +
                             " columns, model wants " + std::to_string(cfg_.nodes()));
    if (history_flat.rows() != static_cast<std::size_t>(cfg_.history))
        throw ContractError("predict: history has " + std::to_string(history_flat.rows()) +
                            " frames, model wants T = " + std::to_string(cfg_.history));
    const std::size_t total = static_cast<std::size_t>(cfg_.history + cfg_.horizon);
    Tensor padded = pad_last_frame(history_flat, static_cast<std::size_t>(cfg_.horizon));
    Tensor coeffs = dct_encode(padded, static_cast<std::size_t>(cfg_.coeffs()));
    Tensor out = forward_coeffs(coeffs, prepared);
    Tensor seq = idct_decode(out, total);
    std::vector<std::size_t> tail(static_cast<std::size_t>(cfg_.horizon));
    for (std::size_t i = 0; i < tail.size(); ++i)
        tail[i] = static_cast<std::size_t>(cfg_.history) + i;
    return row_gather(seq, tail);
}

Tensor SpgsnModel::predict_taped(const Tensor& history_flat) const {
    return predict_taped(history_flat, prepare());
}

std::vector<Tensor> SpgsnModel::predict_taped_batch(const std::vector<Tensor>& histories) const {
    Prepared prepared = prepare();
    std::vector<Tensor> preds;
    preds.reserve(histories.size());
    for (const Tensor& h : histories) preds.push_back(predict_taped(h, prepared));
    return preds;
}

MotionClip SpgsnModel::predict(const MotionClip& history) const {
    if (history.frames() < static_cast<std::size_t>(cfg_.history))
        throw ContractError("predict: clip has " + std::to_string(history.frames()) +
                            " frames, model wants at least T = " + std::to_string(cfg_.history));
    // Use the most recent T frames.
    MotionClip recent = history;
    if (history.frames() > static_cast<std::size_t>(cfg_.history)) {
        const std::size_t row = history.joints * 3;
        const std::size_t skip = history.frames() - static_cast<std::size_t>(cfg_.history);
        recent.data.assign(history.data.begin() + skip * row, history.data.end());
    }
    Tensor pred = predict_taped(flatten_spatial(recent));
    return unflatten_spatial(pred, history.joints, history.frame_rate);
}

SpgsnModel::SpectrumProbe SpgsnModel::probe_spectrum(const Tensor& history_flat,
                                                     std::size_t block_index,
                                                     const std::string& part) const {
    if (block_index >= blocks_.size())
        throw ContractError("probe_spectrum: block " + std::to_string(block_index) +
                            " out of range for " + std::to_string(blocks_.size()) + " blocks");
    if (history_flat.cols() != static_cast<std::size_t>(cfg_.nodes()) ||
        history_flat.rows() != static_cast<std::size_t>(cfg_.history))
        throw ContractError("probe_spectrum: history must be T x 3M = " +
                            std::to_string(cfg_.history) + " x " + std::to_string(cfg_.nodes()) +
                            ", got " + shape_str(history_flat.shape()));
    Prepared prepared = prepare();
    Tensor padded = pad_last_frame(history_flat, static_cast<std::size_t>(cfg_.horizon));
    Tensor coeffs = dct_encode(padded, static_cast<std::size_t>(cfg_.coeffs()));
    Tensor h = in_proj_.apply(coeffs);
    for (std::size_t b = 0; b < block_index; ++b) h = block_forward(b, h, prepared);

    const BlockParams& bp = blocks_[block_index];
    Tensor input;
    const PreparedFilters* filters = nullptr;
    if (part == "whole") {
        input = h;
        filters = &prepared.whole[block_index];
    } else if (part == "upper" && !cfg_.one_body()) {
        input = split_part(h, partition_.upper_nodes);
        filters = &prepared.upper[block_index];
    } else if (part == "lower" && !cfg_.one_body()) {
        input = split_part(h, partition_.lower_nodes);
        filters = &prepared.lower[block_index];
    } else {
        throw ConfigError("probe_spectrum: unknown part '" + part +
                          "' (expected whole, upper or lower)");
    }

    SpectrumProbe probe;
    probe.layers = scatter_tree_layers(input, bp.tree, *filters);
    if (cfg_.aggregator == Aggregator::spectrum) {
        probe.weights = aggregate_spectrum(probe.layers.back(), bp.agg).weights;
    } else {
        const std::size_t n = probe.layers.back().size();
        probe.weights = Tensor::full({1, n}, 1.0 / static_cast<double>(n));
    }
    return probe;
}

// --- checkpoint io -------------------------------------------------------------

namespace {

constexpr char kMagic[6] = {'S', 'P', 'G', 'S', 'N', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

struct Reader {
    std::istream& in;
    const std::string& path;

    void bytes(char* dst, std::size_t n) {
        in.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw IoError("checkpoint '" + path + "': unexpected end of file");
    }
    std::uint32_t u32() {
        unsigned char b[4];
        bytes(reinterpret_cast<char*>(b), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint64_t u64() {
        unsigned char b[8];
        bytes(reinterpret_cast<char*>(b), 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
};

}  // namespace

void SpgsnModel::save(const std::string& path) const {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    const std::string cfg_json = model_config_to_json(cfg_);
    put_u64(out, cfg_json.size());
    out += cfg_json;
    for (const auto& [name, t] : params_) {
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put_u64(out, d);
        for (double v : t.values()) put_f64(out, v);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
        if (!file) throw IoError("cannot open '" + tmp + "' for writing");
        file.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!file) throw IoError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename '" + tmp + "' -> '" + path + "': " + ec.message());
}

SpgsnModel SpgsnModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    Reader r{in, path};
    char magic[6];
    r.bytes(magic, 6);
    if (std::memcmp(magic, kMagic, 6) != 0)
        throw IoError("checkpoint '" + path + "': bad magic (not a SPGSN1 file)");
    const std::uint64_t json_len = r.u64();
    std::string cfg_json(json_len, '\0');
    r.bytes(cfg_json.data(), json_len);
    ModelConfig cfg = model_config_from_json(cfg_json);

    SpgsnModel model(cfg, 0);
    for (auto& [name, t] : model.params_) {
        const std::uint32_t rank = r.u32();
        if (rank != t.rank())
            throw IoError("checkpoint '" + path + "': parameter '" + name + "' has rank " +
                          std::to_string(rank) + ", expected " + std::to_string(t.rank()));
        for (std::size_t d = 0; d < t.rank(); ++d) {
            const std::uint64_t dim = r.u64();
            if (dim != t.shape()[d])
                throw IoError("checkpoint '" + path + "': parameter '" + name +
                              "' dimension mismatch");
        }
        auto& vals = t.values_mut();
        for (auto& v : vals) v = r.f64();
    }
    char extra;
    in.read(&extra, 1);
    if (in.gcount() != 0) throw IoError("checkpoint '" + path + "': trailing data");
    return model;
}

long long param_count(const ModelConfig& cfg) { return SpgsnModel(cfg, 0).param_count(); }

}  // namespace spgsn
