#pragma once

#include <algorithm>
#include <queue>
#include <span>
#include <vector>

#include "vtg/adapter.hpp"
#include "vtg/core.hpp"
#include "vtg/feature_io.hpp"
#include "vtg/windowing.hpp"

namespace vtg {

/// Per-frame matching scores a_j = v_j . q_cls (v_j adapted when an adapter
/// is supplied: the residual output is scored instead of the raw feature).
inline std::vector<double> frame_scores(const FeatureSequence& video,
                                        std::span<const float> q_cls,
                                        const AdapterParams* adapter = nullptr) {
    std::vector<double> scores(video.size());
    if (adapter != nullptr) {
        std::vector<double> adapted(video.dim());
        for (std::size_t j = 0; j < video.size(); ++j) {
            detail::adapt_into(video.row(j), *adapter, std::span<double>(adapted));
            scores[j] = dot(std::span<const double>(adapted), q_cls);
        }
    } else {
        for (std::size_t j = 0; j < video.size(); ++j) {
            scores[j] = dot(video.row(j), q_cls);
        }
    }
    return scores;
}

/// Same scores computed from an already-adapted sequence.
inline std::vector<double> frame_scores(const AdaptedSequence& video,
                                        std::span<const double> q_cls) {
    std::vector<double> scores(video.size());
    for (std::size_t j = 0; j < video.size(); ++j) {
        scores[j] = dot(video.row(j), q_cls);
    }
    return scores;
}

/// Window-level score A_i = max of the per-frame scores inside window i.
inline std::vector<double> window_scores(const WindowSet& ws,
                                         std::span<const double> frame) {
    std::vector<double> out;
    out.reserve(ws.size());
    for (const Window& w : ws.windows) {
        double best = frame[w.start];
        for (std::size_t j = w.start + 1; j < w.end(); ++j) {
            best = std::max(best, frame[j]);
        }
        out.push_back(best);
    }
    return out;
}

/// Indices of the k largest scores, descending, ties broken by the smaller
/// index. Uses a capacity-k heap rather than a full sort; the brute-force
/// sort serves as the test oracle.
inline std::vector<std::size_t> select_top_k(std::span<const double> scores,
                                             std::size_t k) {
    struct Entry {
        double score;
        std::size_t index;
    };
    // "Better" acts as less-than, which leaves the worst kept candidate on top.
    auto better = [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.index < b.index;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(better)> heap(better);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (heap.size() < k) {
            heap.push({scores[i], i});
        } else if (!heap.empty()) {
            const Entry& worst = heap.top();
            if (scores[i] > worst.score) {  // equal scores keep the earlier index
                heap.pop();
                heap.push({scores[i], i});
            }
        }
    }
    std::vector<std::size_t> selected(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
        selected[i] = heap.top().index;
        heap.pop();
    }
    return selected;
}

inline std::vector<std::size_t> select_top_k(const std::vector<double>& scores,
                                             std::size_t k) {
    return select_top_k(std::span<const double>(scores), k);
}

}  // namespace vtg
