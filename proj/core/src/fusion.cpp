#include "spgsn/fusion.hpp"

#include "spgsn/error.hpp"

namespace spgsn {

Tensor split_part(const Tensor& h, const std::vector<std::size_t>& nodes) {
    if (nodes.empty()) throw PartitionError("split_part: empty node list");
    for (auto n : nodes)
        if (n >= h.rows())
            throw PartitionError("split_part: node " + std::to_string(n) +
                                 " out of range for " + std::to_string(h.rows()) + " rows");
    return row_gather(h, nodes);
}

Tensor affinity(const Tensor& h_src, const Tensor& h_dst, const Affine& f_src,
                const Affine& f_dst, AffinityAxis axis) {
    Tensor scores = matmul(f_src.apply(h_src), transpose(f_dst.apply(h_dst)));
    return softmax(scores, axis == AffinityAxis::source ? 0 : 1);
}

Tensor cross_update(const Tensor& h_dst, const Tensor& h_src, const Tensor& aff) {
    if (aff.rows() != h_src.rows() || aff.cols() != h_dst.rows())
        throw DimensionError("cross_update: affinity " + shape_str(aff.shape()) +
                             " does not connect " + std::to_string(h_src.rows()) +
                             " source rows to " + std::to_string(h_dst.rows()) +
                             " destination rows");
    return add(h_dst, matmul(transpose(aff), h_src));
}

Tensor place_parts(const Tensor& h_upper, const Tensor& h_lower, const BodyPartition& parts) {
    if (h_upper.rows() != parts.upper_nodes.size() || h_lower.rows() != parts.lower_nodes.size())
        throw PartitionError("place_parts: part shapes " + shape_str(h_upper.shape()) + "/" +
                             shape_str(h_lower.shape()) + " do not match partition '" +
                             parts.name + "' (" + std::to_string(parts.upper_nodes.size()) + "/" +
                             std::to_string(parts.lower_nodes.size()) + " nodes)");
    const std::size_t total = parts.total_nodes();
    return add(row_scatter(h_upper, parts.upper_nodes, total),
               row_scatter(h_lower, parts.lower_nodes, total));
}

Tensor place_and_fuse(const Tensor& h, const Tensor& h_upper, const Tensor& h_lower,
                      const BodyPartition& parts, const Mlp& mlp) {
    Tensor placed = place_parts(h_upper, h_lower, parts);
    if (placed.rows() != h.rows())
        throw PartitionError("place_and_fuse: partition covers " +
                             std::to_string(placed.rows()) + " nodes but H has " +
                             std::to_string(h.rows()) + " rows");
    return mlp.apply(add(h, placed));
}

}  // namespace spgsn
