#include "spgsn/motion.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spgsn/error.hpp"
#include "spgsn/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace spgsn {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Write-to-temp-then-rename so readers never observe a partial file.
void atomic_write(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out << contents;
        if (!out) throw IoError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename '" + tmp + "' -> '" + path + "': " + ec.message());
}

}  // namespace

MotionClip center_to_root(const MotionClip& clip, int root_joint) {
    if (root_joint < 0 || static_cast<std::size_t>(root_joint) >= clip.joints)
        throw ConfigError("root joint " + std::to_string(root_joint) + " out of range for " +
                          std::to_string(clip.joints) + " joints");
    MotionClip out = clip;
    for (std::size_t f = 0; f < clip.frames(); ++f) {
        const double rx = clip.at(f, root_joint, 0);
        const double ry = clip.at(f, root_joint, 1);
        const double rz = clip.at(f, root_joint, 2);
        for (std::size_t j = 0; j < clip.joints; ++j) {
            out.at(f, j, 0) -= rx;
            out.at(f, j, 1) -= ry;
            out.at(f, j, 2) -= rz;
        }
    }
    return out;
}

MotionClip load_clip(const std::string& path, int root_joint) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open clip file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": line 1: missing header");
    long t = 0, m = 0;
    {
        std::istringstream hs(line);
        std::string extra;
        if (!(hs >> t >> m) || (hs >> extra))
            throw ParseError(path + ": line 1: header must be 'T M'");
    }
    if (t < 1 || m < 2)
        throw ParseError(path + ": line 1: need T >= 1 and M >= 2, got T=" + std::to_string(t) +
                         " M=" + std::to_string(m));

    MotionClip clip;
    clip.joints = static_cast<std::size_t>(m);
    clip.data.reserve(static_cast<std::size_t>(t) * m * 3);
    for (long f = 0; f < t; ++f) {
        const long line_no = f + 2;
        if (!std::getline(in, line))
            throw ParseError(path + ": line " + std::to_string(line_no) + ": missing frame row");
        std::istringstream ls(line);
        for (long k = 0; k < 3 * m; ++k) {
            double v;
            if (!(ls >> v))
                throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(3 * m) + " values, found " + std::to_string(k));
            if (!std::isfinite(v))
                throw ParseError(path + ": line " + std::to_string(line_no) +
                                 ": non-finite value");
            clip.data.push_back(v);
        }
        std::string extra;
        if (ls >> extra)
            throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(3 * m) + " values, found more");
    }
    if (root_joint >= 0) return center_to_root(clip, root_joint);
    return clip;
}

void write_clip(const MotionClip& clip, const std::string& path) {
    std::ostringstream out;
    out << clip.frames() << ' ' << clip.joints << '\n';
    for (std::size_t f = 0; f < clip.frames(); ++f) {
        for (std::size_t j = 0; j < clip.joints; ++j)
            for (std::size_t c = 0; c < 3; ++c) {
                if (j || c) out << ' ';
                out << fmt17(clip.at(f, j, c));
            }
        out << '\n';
    }
    atomic_write(path, out.str());
}

// --- manifest ----------------------------------------------------------------

namespace {

json skeleton_to_json(const SkeletonDef& s) {
    json sk;
    sk["joint_count"] = s.joints;
    sk["bones"] = json::array();
    for (auto [a, b] : s.bones) sk["bones"].push_back(json::array({a, b}));
    sk["partitions"] = json::object();
    for (const auto& [name, split] : s.partitions) {
        sk["partitions"][name] = {{"upper_joints", split.upper}, {"lower_joints", split.lower}};
    }
    return sk;
}

SkeletonDef skeleton_from_json(const json& sk) {
    SkeletonDef s;
    s.joints = sk.at("joint_count").get<int>();
    for (const auto& bone : sk.at("bones")) {
        const int a = bone.at(0).get<int>();
        const int b = bone.at(1).get<int>();
        if (a < 0 || b < 0 || a >= s.joints || b >= s.joints)
            throw ConfigError("manifest: bone (" + std::to_string(a) + "," + std::to_string(b) +
                              ") out of range for " + std::to_string(s.joints) + " joints");
        s.bones.emplace_back(a, b);
    }
    if (sk.contains("partitions")) {
        for (auto it = sk.at("partitions").begin(); it != sk.at("partitions").end(); ++it) {
            JointSplit split;
            split.upper = it.value().at("upper_joints").get<std::vector<int>>();
            split.lower = it.value().at("lower_joints").get<std::vector<int>>();
            // Validates disjoint coverage.
            BodyPartition::from_joints(it.key(), split.upper, split.lower, s.joints);
            s.partitions[it.key()] = std::move(split);
        }
    }
    return s;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("manifest '" + path + "': " + e.what());
    }
    DatasetManifest mf;
    try {
        mf.skeleton = skeleton_from_json(doc.at("skeleton"));
        mf.unit = doc.at("unit").get<std::string>();
        mf.frame_rate = doc.at("frame_rate").get<double>();
        mf.root_joint = doc.value("root_joint", 0);
        mf.precentered = doc.value("precentered", false);
        for (const auto& c : doc.at("clips")) {
            ClipEntry e;
            e.path = c.at("path").get<std::string>();
            e.action = c.value("action", "");
            mf.clips.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw ParseError("manifest '" + path + "': " + e.what());
    }
    if (mf.unit != "m" && mf.unit != "mm")
        throw ConfigError("manifest '" + path + "': unit must be 'm' or 'mm'");
    if (mf.frame_rate <= 0.0) throw ConfigError("manifest '" + path + "': frame_rate must be > 0");
    mf.base_dir = fs::path(path).parent_path().string();
    return mf;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    json doc;
    doc["skeleton"] = skeleton_to_json(manifest.skeleton);
    doc["unit"] = manifest.unit;
    doc["frame_rate"] = manifest.frame_rate;
    doc["root_joint"] = manifest.root_joint;
    doc["precentered"] = manifest.precentered;
    doc["clips"] = json::array();
    for (const auto& c : manifest.clips) {
        json e;
        e["path"] = c.path;
        if (!c.action.empty()) e["action"] = c.action;
        doc["clips"].push_back(e);
    }
    atomic_write(path, doc.dump(2) + "\n");
}

std::vector<MotionClip> load_dataset(const DatasetManifest& manifest) {
    std::vector<MotionClip> clips;
    clips.reserve(manifest.clips.size());
    for (const auto& entry : manifest.clips) {
        fs::path p = fs::path(manifest.base_dir) / entry.path;
        MotionClip c = load_clip(p.string(), manifest.precentered ? -1 : manifest.root_joint);
        if (static_cast<int>(c.joints) != manifest.skeleton.joints)
            throw ConfigError("clip '" + entry.path + "' has " + std::to_string(c.joints) +
                              " joints, manifest skeleton has " +
                              std::to_string(manifest.skeleton.joints));
        c.frame_rate = manifest.frame_rate;
        clips.push_back(std::move(c));
    }
    return clips;
}

// --- preprocessing -------------------------------------------------------------

std::vector<ClipPair> segment_clips(const MotionClip& clip, std::size_t history,
                                    std::size_t horizon, std::size_t stride) {
    if (history < 1 || horizon < 1) throw ContractError("segment_clips: need T >= 1 and dT >= 1");
    if (stride < 1) throw ContractError("segment_clips: stride must be >= 1");
    std::vector<ClipPair> pairs;
    const std::size_t window = history + horizon;
    const std::size_t total = clip.frames();
    for (std::size_t start = 0; start + window <= total; start += stride) {
        ClipPair pair;
        pair.history.joints = pair.future.joints = clip.joints;
        pair.history.frame_rate = pair.future.frame_rate = clip.frame_rate;
        const std::size_t row = clip.joints * 3;
        pair.history.data.assign(clip.data.begin() + start * row,
                                 clip.data.begin() + (start + history) * row);
        pair.future.data.assign(clip.data.begin() + (start + history) * row,
                                clip.data.begin() + (start + window) * row);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

MotionClip downsample(const MotionClip& clip, std::size_t factor) {
    if (factor < 1) throw ContractError("downsample: factor must be >= 1");
    if (factor == 1) return clip;
    MotionClip out;
    out.joints = clip.joints;
    out.frame_rate = clip.frame_rate / static_cast<double>(factor);
    const std::size_t row = clip.joints * 3;
    for (std::size_t f = 0; f < clip.frames(); f += factor)
        out.data.insert(out.data.end(), clip.data.begin() + f * row,
                        clip.data.begin() + (f + 1) * row);
    return out;
}

// --- synthetic data ---------------------------------------------------------------

Motif motif_from_string(const std::string& s) {
    if (s == "sinusoid-limbs") return Motif::sinusoid_limbs;
    if (s == "constant-velocity") return Motif::constant_velocity;
    if (s == "figure-eight") return Motif::figure_eight;
    throw ConfigError("unknown motif '" + s +
                      "' (expected sinusoid-limbs, constant-velocity or figure-eight)");
}

std::string motif_name(Motif m) {
    switch (m) {
        case Motif::sinusoid_limbs: return "sinusoid-limbs";
        case Motif::constant_velocity: return "constant-velocity";
        case Motif::figure_eight: return "figure-eight";
    }
    return "?";
}

void gen_synthetic(std::uint64_t seed, std::size_t n_clips, std::size_t total_frames, int joints,
                   Motif motif, const std::string& out_dir) {
    if (joints < 2) throw ConfigError("gen_synthetic: need at least 2 joints");
    if (total_frames < 2) throw ConfigError("gen_synthetic: need at least 2 frames");
    fs::create_directories(out_dir);

    SkeletonDef skeleton = chain_skeleton(joints);
    const int cut = (joints + 1) / 2;  // joints < cut are "upper"
    constexpr double kUpperOmega = 0.30;  // rad / frame
    constexpr double kLowerOmega = 0.55;
    constexpr double kZPhase = 1.0471975511965976;  // pi / 3
    // Lower-body joints in the sinusoid motif carry an extra component at
    // the upper-body frequency, phase-locked to one upper joint drawn per
    // clip. The coupling source is only cleanly observable on the upper
    // body, which is what makes the cross-part structure learnable.
    constexpr double kCoupleLo = 0.4, kCoupleHi = 0.8;

    Rng rng(seed);
    DatasetManifest manifest;
    manifest.skeleton = skeleton;
    manifest.unit = "m";
    manifest.frame_rate = 25.0;
    manifest.root_joint = 0;
    manifest.precentered = false;

    json params;
    params["motif"] = motif_name(motif);
    params["seed"] = seed;
    params["clips"] = json::array();

    for (std::size_t ci = 0; ci < n_clips; ++ci) {
        json clip_params;
        const double root_p0[3] = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                   rng.uniform(-0.5, 0.5)};
        const double root_v[3] = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
                                  rng.uniform(-0.02, 0.02)};
        clip_params["root_p0"] = {root_p0[0], root_p0[1], root_p0[2]};
        clip_params["root_v"] = {root_v[0], root_v[1], root_v[2]};
        const double clip_phase = rng.uniform(0.0, 6.283185307179586);
        const double lower_phase = rng.uniform(0.0, 6.283185307179586);
        const double kappa = rng.uniform(kCoupleLo, kCoupleHi);
        clip_params["phase"] = clip_phase;
        clip_params["lower_phase"] = lower_phase;
        clip_params["kappa"] = kappa;

        struct JointParams {
            double base[3] = {0, 0, 0};
            double vel[3] = {0, 0, 0};
            double amp = 0, phase = 0, omega = 0;
            double couple_amp = 0, couple_phase = 0, couple_omega = 0;
        };
        std::vector<JointParams> jp(joints);
        json joints_json = json::array();
        for (int j = 0; j < joints; ++j) {
            JointParams& p = jp[j];
            if (j > 0) {
                p.base[0] = 0.10 * j;
                p.base[1] = -0.20 * j;
                p.base[2] = 0.05 * j;
                p.amp = 0.15 + 0.15 * rng.uniform();
                for (auto& v : p.vel) v = rng.uniform(-0.03, 0.03);
                if (j < cut || motif != Motif::sinusoid_limbs) {
                    p.omega = (j < cut) ? kUpperOmega : kLowerOmega;
                    p.phase = clip_phase + 0.7 * j;
                } else {
                    p.omega = kLowerOmega;
                    p.phase = lower_phase + 0.7 * j;
                    // coupled to one upper joint, drawn per clip and joint
                    const int src = 1 + static_cast<int>(rng.index(
                                            static_cast<std::size_t>(std::max(1, cut - 1))));
                    p.couple_amp = kappa * p.amp;
                    p.couple_omega = kUpperOmega;
                    p.couple_phase = clip_phase + 0.7 * src;
                }
            }
            json pj;
            pj["base"] = {p.base[0], p.base[1], p.base[2]};
            pj["vel"] = {p.vel[0], p.vel[1], p.vel[2]};
            pj["amp"] = p.amp;
            pj["phase"] = p.phase;
            pj["omega"] = p.omega;
            pj["couple_amp"] = p.couple_amp;
            pj["couple_phase"] = p.couple_phase;
            pj["couple_omega"] = p.couple_omega;
            joints_json.push_back(pj);
        }
        clip_params["joints"] = joints_json;

        MotionClip clip;
        clip.joints = static_cast<std::size_t>(joints);
        clip.frame_rate = manifest.frame_rate;
        clip.data.resize(total_frames * joints * 3);
        for (std::size_t f = 0; f < total_frames; ++f) {
            const double t = static_cast<double>(f);
            for (int j = 0; j < joints; ++j) {
                const JointParams& p = jp[j];
                double rel[3] = {0, 0, 0};
                if (j > 0) {
                    const double theta = p.omega * t + p.phase;
                    const double theta_c = p.couple_omega * t + p.couple_phase;
                    switch (motif) {
                        case Motif::sinusoid_limbs:
                            rel[0] = p.base[0] + p.amp * std::sin(theta) +
                                     p.couple_amp * std::sin(theta_c);
                            rel[1] = p.base[1] + p.amp * std::cos(theta) +
                                     p.couple_amp * std::cos(theta_c);
                            rel[2] = p.base[2] + p.amp * 0.5 * std::sin(theta + kZPhase) +
                                     p.couple_amp * 0.5 * std::sin(theta_c + kZPhase);
                            break;
                        case Motif::constant_velocity:
                            rel[0] = p.base[0] + p.vel[0] * t;
                            rel[1] = p.base[1] + p.vel[1] * t;
                            rel[2] = p.base[2] + p.vel[2] * t;
                            break;
                        case Motif::figure_eight:
                            rel[0] = p.base[0] + p.amp * std::sin(theta);
                            rel[1] = p.base[1] + p.amp * 0.5 * std::sin(2.0 * theta);
                            rel[2] = p.base[2] + p.amp * 0.1 * std::sin(theta);
                            break;
                    }
                }
                for (int c = 0; c < 3; ++c)
                    clip.at(f, j, c) = root_p0[c] + root_v[c] * t + rel[c];
            }
        }

        char name[32];
        std::snprintf(name, sizeof(name), "clip_%03zu.txt", ci);
        write_clip(clip, (fs::path(out_dir) / name).string());
        manifest.clips.push_back({name, motif_name(motif)});
        params["clips"].push_back(clip_params);
    }

    write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    atomic_write((fs::path(out_dir) / "gen_params.json").string(), params.dump(2) + "\n");
}

}  // namespace spgsn
