#include "spgsn/partition.hpp"

#include <algorithm>

#include "spgsn/error.hpp"

namespace spgsn {

BodyPartition BodyPartition::from_joints(const std::string& name,
                                         const std::vector<int>& upper_joints,
                                         const std::vector<int>& lower_joints, int joints) {
    if (upper_joints.empty() || lower_joints.empty())
        throw PartitionError("partition '" + name + "': both parts must be non-empty");
    std::vector<int> seen(joints, 0);
    auto mark = [&](const std::vector<int>& js, const char* side) {
        for (int j : js) {
            if (j < 0 || j >= joints)
                throw PartitionError("partition '" + name + "': " + side + " joint " +
                                     std::to_string(j) + " out of range for " +
                                     std::to_string(joints) + " joints");
            if (seen[j]++)
                throw PartitionError("partition '" + name + "': joint " + std::to_string(j) +
                                     " assigned twice");
        }
    };
    mark(upper_joints, "upper");
    mark(lower_joints, "lower");
    for (int j = 0; j < joints; ++j)
        if (!seen[j])
            throw PartitionError("partition '" + name + "': joint " + std::to_string(j) +
                                 " not assigned to any part");

    BodyPartition p;
    p.name = name;
    auto expand = [](const std::vector<int>& js, std::vector<std::size_t>& nodes) {
        for (int j : js)
            for (int c = 0; c < 3; ++c) nodes.push_back(static_cast<std::size_t>(3 * j + c));
        std::sort(nodes.begin(), nodes.end());
    };
    expand(upper_joints, p.upper_nodes);
    expand(lower_joints, p.lower_nodes);
    return p;
}

JointSplit builtin_split(const SkeletonDef& skeleton, const std::string& name) {
    auto it = skeleton.partitions.find(name);
    if (it != skeleton.partitions.end()) return it->second;
    // Fall back to the bundled layout when the skeleton matches it.
    if (skeleton.joints == 22) {
        SkeletonDef h36m = h36m_skeleton();
        auto hit = h36m.partitions.find(name);
        if (hit != h36m.partitions.end()) return hit->second;
    }
    throw ConfigError("unknown partition '" + name +
                      "': not a preset of this skeleton and no explicit joint lists given");
}

BodyPartition builtin_partition(const SkeletonDef& skeleton, const std::string& name) {
    JointSplit split = builtin_split(skeleton, name);
    return BodyPartition::from_joints(name, split.upper, split.lower, skeleton.joints);
}

SkeletonDef h36m_skeleton() {
    // 0-3 right leg, 4-7 left leg, 8-11 spine/neck/head,
    // 12-16 left arm, 17-21 right arm.
    SkeletonDef s;
    s.joints = 22;
    s.bones = {{0, 1},  {1, 2},   {2, 3},           // right leg
               {4, 5},  {5, 6},   {6, 7},           // left leg
               {0, 8},  {4, 8},   {8, 9},  {9, 10}, {10, 11},  // torso chain
               {9, 12}, {12, 13}, {13, 14}, {14, 15}, {14, 16},  // left arm
               {9, 17}, {17, 18}, {18, 19}, {19, 20}, {19, 21}};  // right arm
    JointSplit upper_lower;
    for (int j = 8; j < 22; ++j) upper_lower.upper.push_back(j);
    for (int j = 0; j < 8; ++j) upper_lower.lower.push_back(j);
    s.partitions["upper_lower"] = upper_lower;

    // Midline joints (spine through head) ride with the left side.
    JointSplit left_right;
    for (int j : {4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16}) left_right.upper.push_back(j);
    for (int j : {0, 1, 2, 3, 17, 18, 19, 20, 21}) left_right.lower.push_back(j);
    s.partitions["left_right"] = left_right;
    return s;
}

SkeletonDef chain_skeleton(int joints) {
    if (joints < 2) throw ConfigError("chain_skeleton: need at least 2 joints");
    SkeletonDef s;
    s.joints = joints;
    for (int j = 0; j + 1 < joints; ++j) s.bones.emplace_back(j, j + 1);
    JointSplit split;
    const int cut = (joints + 1) / 2;
    for (int j = 0; j < cut; ++j) split.upper.push_back(j);
    for (int j = cut; j < joints; ++j) split.lower.push_back(j);
    s.partitions["upper_lower"] = split;
    return s;
}

std::vector<double> bone_adjacency(const SkeletonDef& skeleton,
                                   const std::vector<int>& node_joints) {
    const std::size_t n = node_joints.size();
    std::vector<char> joint_adj(
        static_cast<std::size_t>(skeleton.joints) * static_cast<std::size_t>(skeleton.joints), 0);
    for (auto [a, b] : skeleton.bones) {
        if (a < 0 || b < 0 || a >= skeleton.joints || b >= skeleton.joints)
            throw ConfigError("bone_adjacency: bone (" + std::to_string(a) + "," +
                              std::to_string(b) + ") out of range");
        joint_adj[static_cast<std::size_t>(a) * skeleton.joints + b] = 1;
        joint_adj[static_cast<std::size_t>(b) * skeleton.joints + a] = 1;
    }
    std::vector<double> adj(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const int ji = node_joints[i];
            const int jj = node_joints[j];
            if (ji == jj || joint_adj[static_cast<std::size_t>(ji) * skeleton.joints + jj])
                adj[i * n + j] = 1.0;
        }
    }
    return adj;
}

}  // namespace spgsn
