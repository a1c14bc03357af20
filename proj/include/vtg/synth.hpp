#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vtg/feature_io.hpp"
#include "vtg/manifest.hpp"
#include "vtg/rng.hpp"

namespace vtg {

/// Recipe for a synthetic corpus with planted ground-truth moments.
///
/// Per query, a unit-norm direction u is drawn; frames inside the planted
/// moment store normalize(alpha*u + (1-alpha)*g) with g i.i.d. Gaussian,
/// frames outside store pure Gaussian noise, and the query [CLS] row is u.
/// alpha = 1 makes positives exactly separable, alpha = 0 makes them
/// indistinguishable from noise.
struct SynthSpec {
    std::size_t num_videos = 4;
    std::size_t video_length_features = 600;
    std::size_t dim = 64;
    std::size_t queries_per_video = 2;
    std::size_t moment_min_features = 20;
    std::size_t moment_max_features = 60;
    double signal_strength = 1.0;  // alpha in [0, 1]
    double fps = 1.875;
    std::uint64_t noise_seed = 42;
    std::size_t query_tokens = 4;  // token rows after [CLS]; generated, unused

    void validate() const {
        if (num_videos == 0) throw InvalidSpec("num_videos must be >= 1");
        if (video_length_features == 0) throw InvalidSpec("video length must be >= 1");
        if (dim == 0) throw InvalidSpec("dim must be >= 1");
        if (queries_per_video == 0) throw InvalidSpec("queries_per_video must be >= 1");
        if (moment_min_features == 0 || moment_min_features > moment_max_features) {
            throw InvalidSpec("invalid moment length bounds");
        }
        if (moment_max_features > video_length_features) {
            throw InvalidSpec("moment does not fit inside the video");
        }
        if (video_length_features / queries_per_video < moment_min_features) {
            throw InvalidSpec("too many queries per video for the moment length");
        }
        if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
            throw InvalidSpec("signal_strength must lie in [0, 1]");
        }
        if (!(fps > 0.0)) throw InvalidSpec("fps must be > 0");
    }
};

struct SynthResult {
    std::filesystem::path manifest_path;
    std::vector<GroundingInstance> instances;
};

namespace detail {

inline void fill_gaussian(std::span<float> row, Rng& rng) {
    for (float& x : row) x = static_cast<float>(rng.gaussian());
}

inline std::vector<double> random_unit_direction(std::size_t dim, Rng& rng) {
    std::vector<double> u(dim);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (double& x : u) {
            x = rng.gaussian();
            sq += x * x;
        }
    } while (sq == 0.0);
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : u) x *= inv;
    return u;
}

inline std::string zero_pad(std::size_t value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, value);
    return buf;
}

}  // namespace detail

/// Generates feature files plus a manifest under out_dir. Deterministic:
/// the same spec (including noise_seed) produces byte-identical files.
inline SynthResult synthesize_corpus(const SynthSpec& spec,
                                     const std::filesystem::path& out_dir) {
    spec.validate();
    std::filesystem::create_directories(out_dir);

    SynthResult result;
    result.manifest_path = out_dir / "manifest.jsonl";

    const std::size_t L = spec.video_length_features;
    const std::size_t qpv = spec.queries_per_video;
    const std::size_t segment = L / qpv;
    const double alpha = spec.signal_strength;

    std::size_t query_counter = 0;
    for (std::size_t v = 0; v < spec.num_videos; ++v) {
        Rng rng(derive_seed(spec.noise_seed, "synth-video", v));

        FeatureSequence video(spec.dim, L);
        for (std::size_t t = 0; t < L; ++t) {
            detail::fill_gaussian(video.row(t), rng);
        }

        const std::string video_id = "video_" + detail::zero_pad(v, 4);
        const std::string video_file = video_id + ".cfv";

        // Each query owns one segment of the video, so planted moments
        // never overwrite each other.
        for (std::size_t q = 0; q < qpv; ++q) {
            const std::size_t seg_begin = q * segment;
            const std::size_t seg_len = (q + 1 == qpv) ? L - seg_begin : segment;
            const std::size_t max_len =
                std::min(spec.moment_max_features, seg_len);
            const std::size_t len =
                spec.moment_min_features +
                rng.uniform_index(max_len - spec.moment_min_features + 1);
            const std::size_t start =
                seg_begin + rng.uniform_index(seg_len - len + 1);

            const std::vector<double> u = detail::random_unit_direction(spec.dim, rng);

            for (std::size_t t = start; t < start + len; ++t) {
                auto row = video.row(t);
                double sq = 0.0;
                std::vector<double> mixed(spec.dim);
                for (std::size_t i = 0; i < spec.dim; ++i) {
                    mixed[i] = alpha * u[i] + (1.0 - alpha) * rng.gaussian();
                    sq += mixed[i] * mixed[i];
                }
                const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
                for (std::size_t i = 0; i < spec.dim; ++i) {
                    row[i] = static_cast<float>(mixed[i] * inv);
                }
            }

            FeatureSequence query(spec.dim, 1 + spec.query_tokens);
            auto cls = query.row(0);
            for (std::size_t i = 0; i < spec.dim; ++i) {
                cls[i] = static_cast<float>(u[i]);
            }
            for (std::size_t tok = 1; tok <= spec.query_tokens; ++tok) {
                detail::fill_gaussian(query.row(tok), rng);
            }
            query.kind = SequenceKind::Query;

            const std::string query_id = "query_" + detail::zero_pad(query_counter, 5);
            const std::string query_file = query_id + ".cfv";
            write_feature_file(out_dir / query_file, query);

            GroundingInstance inst;
            inst.query_id = query_id;
            inst.video_id = video_id;
            inst.query_feature_file = query_file;
            inst.video_feature_file = video_file;
            inst.gt.start = static_cast<double>(start) / spec.fps;
            inst.gt.end = static_cast<double>(start + len) / spec.fps;
            inst.fps = spec.fps;
            result.instances.push_back(std::move(inst));
            ++query_counter;
        }

        video.fps = spec.fps;
        write_feature_file(out_dir / video_file, video);
    }

    write_manifest(result.manifest_path, result.instances);
    return result;
}

}  // namespace vtg
