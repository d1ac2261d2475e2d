#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace spgsn {

// Joint-level split of a skeleton into two disjoint covering parts.
struct JointSplit {
    std::vector<int> upper;
    std::vector<int> lower;
};

struct SkeletonDef {
    int joints = 0;
    std::vector<std::pair<int, int>> bones;       // joint index pairs
    std::map<std::string, JointSplit> partitions;  // named splits
};

// Node-level partition of the M' = 3M coordinate rows. All three coordinate
// rows of a joint land in the same part; node r belongs to joint r / 3.
struct BodyPartition {
    std::string name;
    std::vector<std::size_t> upper_nodes;  // sorted
    std::vector<std::size_t> lower_nodes;  // sorted

    std::size_t total_nodes() const { return upper_nodes.size() + lower_nodes.size(); }

    // Expands joint lists to node lists and validates disjoint coverage of
    // all M joints. Throws PartitionError on overlap, gaps, or empty parts.
    static BodyPartition from_joints(const std::string& name, const std::vector<int>& upper_joints,
                                     const std::vector<int>& lower_joints, int joints);
};

// Joint-level lookup of a named partition against a skeleton. Known names
// are the skeleton's own presets plus "upper_lower" / "left_right" for the
// bundled 22-joint layout. Unknown names raise ConfigError.
JointSplit builtin_split(const SkeletonDef& skeleton, const std::string& name);

// Node-level form of the same lookup.
BodyPartition builtin_partition(const SkeletonDef& skeleton, const std::string& name);

// Bundled 22-joint mocap skeleton: two 4-joint legs, a 4-joint spine/head
// chain, and two 5-joint arms, with upper_lower and left_right presets.
SkeletonDef h36m_skeleton();

// Simple chain skeleton 0-1-2-...-(M-1) with an upper_lower preset that
// assigns the first ceil(M/2) joints to the upper part. Used by the
// synthetic data generator and desk-scale tests.
SkeletonDef chain_skeleton(int joints);

// Bone-connectivity adjacency over coordinate rows: 1 where two rows belong
// to the same joint or to bone-adjacent joints, 0 elsewhere. `node_joints`
// maps each row of the output to its joint id, so part-restricted graphs
// reuse the same rule.
std::vector<double> bone_adjacency(const SkeletonDef& skeleton, const std::vector<int>& node_joints);

}  // namespace spgsn
