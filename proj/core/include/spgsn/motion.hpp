#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spgsn/partition.hpp"

namespace spgsn {

// T frames x M joints x 3 coordinates, row-major.
struct MotionClip {
    std::size_t joints = 0;
    double frame_rate = 0.0;
    std::vector<double> data;

    std::size_t frames() const { return joints ? data.size() / (3 * joints) : 0; }
    double& at(std::size_t f, std::size_t j, std::size_t c) {
        return data[(f * joints + j) * 3 + c];
    }
    double at(std::size_t f, std::size_t j, std::size_t c) const {
        return data[(f * joints + j) * 3 + c];
    }
    bool operator==(const MotionClip& o) const = default;
};

struct ClipPair {
    MotionClip history;
    MotionClip future;
};

// --- clip files -------------------------------------------------------------
// Text format: header line "T M", then T lines of 3M floats in the column
// order x1 y1 z1 ... xM yM zM. Floats are written with 17 significant digits
// so load(write(c)) is bit-exact.

// root_joint >= 0 recenters every frame to that joint's position.
MotionClip load_clip(const std::string& path, int root_joint = -1);
void write_clip(const MotionClip& clip, const std::string& path);

// Subtract the root joint's coordinates from every joint, per frame.
MotionClip center_to_root(const MotionClip& clip, int root_joint);

// --- dataset manifest --------------------------------------------------------

struct ClipEntry {
    std::string path;  // relative to the manifest's directory
    std::string action;
};

struct DatasetManifest {
    SkeletonDef skeleton;
    std::string unit = "m";  // "m" or "mm"
    double frame_rate = 0.0;
    int root_joint = 0;
    bool precentered = false;
    std::vector<ClipEntry> clips;
    std::string base_dir;  // set by load_manifest
};

DatasetManifest load_manifest(const std::string& path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

// Loads every clip listed in the manifest, applying root-relative centering
// unless the manifest marks the data precentered.
std::vector<MotionClip> load_dataset(const DatasetManifest& manifest);

// --- preprocessing ------------------------------------------------------------

// Sliding (history, future) windows; window i covers frames
// [i*stride, i*stride + T + dT). Too-short clips yield an empty list.
std::vector<ClipPair> segment_clips(const MotionClip& clip, std::size_t history,
                                    std::size_t horizon, std::size_t stride);

// Keep frames 0, factor, 2*factor, ...; frame_rate divides by factor.
MotionClip downsample(const MotionClip& clip, std::size_t factor);

// --- synthetic data -------------------------------------------------------------

enum class Motif { sinusoid_limbs, constant_velocity, figure_eight };

Motif motif_from_string(const std::string& s);
std::string motif_name(Motif m);

// Writes n_clips clip files plus manifest.json and gen_params.json into
// out_dir. Deterministic in the seed: identical seeds give byte-identical
// files. Upper and lower chain joints follow distinct dynamics so the
// cross-part structure is learnable.
void gen_synthetic(std::uint64_t seed, std::size_t n_clips, std::size_t total_frames, int joints,
                   Motif motif, const std::string& out_dir);

}  // namespace spgsn
