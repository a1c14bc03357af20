#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtg/core.hpp"
#include "vtg/feature_io.hpp"

namespace vtg {

/// One query against one video with a single annotated ground-truth moment.
struct GroundingInstance {
    std::string query_id;
    std::string video_id;
    std::string query_feature_file;  // relative to the manifest
    std::string video_feature_file;
    Span gt;  // seconds
    double fps = 1.0;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j,
                                           const char* key,
                                           std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw MissingField("manifest line " + std::to_string(line_no) +
                           ": missing field '" + key + "'");
    }
    return *it;
}

}  // namespace detail

/// Reads a manifest (JSONL, one instance per line), resolving feature paths
/// against the manifest's directory and validating ground truth against the
/// referenced video length.
inline std::vector<GroundingInstance> read_manifest(
    const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw UnresolvedFeatureFile("cannot open manifest " + manifest_path.string());
    }
    const std::filesystem::path base = manifest_path.parent_path();
    std::vector<GroundingInstance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw MalformedLine("manifest line " + std::to_string(line_no) + ": " +
                                e.what());
        }
        GroundingInstance inst;
        inst.query_id = detail::require_field(j, "query_id", line_no).get<std::string>();
        inst.video_id = detail::require_field(j, "video_id", line_no).get<std::string>();
        inst.query_feature_file =
            detail::require_field(j, "query_feature_file", line_no).get<std::string>();
        inst.video_feature_file =
            detail::require_field(j, "video_feature_file", line_no).get<std::string>();
        inst.gt.start = detail::require_field(j, "gt_start_sec", line_no).get<double>();
        inst.gt.end = detail::require_field(j, "gt_end_sec", line_no).get<double>();
        inst.fps = detail::require_field(j, "fps", line_no).get<double>();
        if (inst.fps <= 0.0) {
            throw MissingField("manifest line " + std::to_string(line_no) +
                               ": fps must be > 0");
        }

        const auto qpath = base / inst.query_feature_file;
        const auto vpath = base / inst.video_feature_file;
        if (!std::filesystem::exists(qpath)) {
            throw UnresolvedFeatureFile("manifest line " + std::to_string(line_no) +
                                        ": " + qpath.string());
        }
        auto [vdim, vcount] = read_feature_header(vpath);
        (void)vdim;
        const double duration = static_cast<double>(vcount) / inst.fps;
        if (!(inst.gt.start >= 0.0 && inst.gt.start < inst.gt.end &&
              inst.gt.end <= duration + 1e-9)) {
            std::ostringstream msg;
            msg << "manifest line " << line_no << ": gt [" << inst.gt.start << ", "
                << inst.gt.end << ") outside [0, " << duration << ")";
            throw GtOutOfRange(msg.str());
        }
        out.push_back(std::move(inst));
    }
    return out;
}

inline std::string encode_manifest_line(const GroundingInstance& inst) {
    nlohmann::ordered_json j;
    j["query_id"] = inst.query_id;
    j["video_id"] = inst.video_id;
    j["query_feature_file"] = inst.query_feature_file;
    j["video_feature_file"] = inst.video_feature_file;
    j["gt_start_sec"] = inst.gt.start;
    j["gt_end_sec"] = inst.gt.end;
    j["fps"] = inst.fps;
    return j.dump();
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<GroundingInstance>& instances) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw TruncatedFile("cannot open " + path.string() + " for writing");
    }
    for (const auto& inst : instances) {
        out << encode_manifest_line(inst) << '\n';
    }
}

/// All features of a manifest loaded in memory. Videos are shared across
/// the instances that reference them; everything is read-only after load.
struct Dataset {
    std::vector<GroundingInstance> instances;
    std::map<std::string, FeatureSequence> videos;   // by video_id
    std::map<std::string, FeatureSequence> queries;  // by query_id
    bool normalized = false;

    const FeatureSequence& video_of(const GroundingInstance& inst) const {
        return videos.at(inst.video_id);
    }
    const FeatureSequence& query_of(const GroundingInstance& inst) const {
        return queries.at(inst.query_id);
    }
};

inline Dataset load_dataset(const std::filesystem::path& manifest_path,
                            bool normalize_features = true) {
    Dataset ds;
    ds.instances = read_manifest(manifest_path);
    ds.normalized = normalize_features;
    const std::filesystem::path base = manifest_path.parent_path();
    for (const auto& inst : ds.instances) {
        if (!ds.videos.contains(inst.video_id)) {
            FeatureSequence v = read_feature_file(base / inst.video_feature_file);
            if (v.size() == 0) {
                throw MissingField("video " + inst.video_id + " has zero frames");
            }
            v.fps = inst.fps;
            v.kind = SequenceKind::Video;
            if (normalize_features) v.l2_normalize_rows();
            ds.videos.emplace(inst.video_id, std::move(v));
        }
        if (!ds.queries.contains(inst.query_id)) {
            FeatureSequence q = read_feature_file(base / inst.query_feature_file);
            if (q.size() == 0) {
                throw MissingField("query " + inst.query_id +
                                   " has zero rows (no [CLS])");
            }
            q.kind = SequenceKind::Query;
            if (normalize_features) q.l2_normalize_rows();
            ds.queries.emplace(inst.query_id, std::move(q));
        }
    }
    return ds;
}

}  // namespace vtg
