#pragma once

#include <cstdint>
#include <vector>

#include "vtg/core.hpp"
#include "vtg/rng.hpp"

namespace vtg {

/// Fixed-length slice of a video's feature sequence, addressed by feature
/// index (0-based, half-open).
struct Window {
    std::size_t index = 0;
    std::size_t start = 0;   // first feature index
    std::size_t length = 0;  // number of features

    std::size_t end() const { return start + length; }

    Span seconds(double fps) const {
        return {static_cast<double>(start) / fps, static_cast<double>(end()) / fps};
    }
};

struct WindowSet {
    std::vector<Window> windows;
    std::size_t stride = 0;        // floor(L_w / 2)
    std::size_t video_length = 0;  // L_v in features

    std::size_t size() const { return windows.size(); }
};

/// Slides a length-L_w window with stride floor(L_w/2). Starts run
/// 0, s, 2s, ... while start + L_w <= L_v; if that leaves a tail uncovered,
/// one extra full-length window anchored at L_v - L_w is appended. A video
/// shorter than the window yields a single window covering all of it.
inline WindowSet slice_windows(std::size_t video_length, std::size_t window_length) {
    if (window_length < 2) {
        throw InvalidWindowLength("window length must be >= 2, got " +
                                  std::to_string(window_length));
    }
    WindowSet ws;
    ws.stride = window_length / 2;
    ws.video_length = video_length;

    if (video_length <= window_length) {
        ws.windows.push_back({0, 0, video_length});
        return ws;
    }
    std::size_t start = 0;
    while (start + window_length <= video_length) {
        ws.windows.push_back({ws.windows.size(), start, window_length});
        start += ws.stride;
    }
    const std::size_t covered = ws.windows.back().end();
    if (covered < video_length) {
        const std::size_t tail = video_length - window_length;
        if (tail != ws.windows.back().start) {
            ws.windows.push_back({ws.windows.size(), tail, window_length});
        }
    }
    return ws;
}

/// A window is positive iff its time span has nonzero intersection with the
/// ground-truth moment.
inline bool is_positive_window(const Window& w, const Span& gt, double fps) {
    const Span s = w.seconds(fps);
    const double inter = std::min(s.end, gt.end) - std::max(s.start, gt.start);
    return inter > 0.0;
}

/// Uniformly samples one negative window. Throws NoNegativeWindow when the
/// ground truth touches every window; callers then skip the contrastive
/// term for that instance.
inline const Window& sample_negative_window(const WindowSet& ws, const Span& gt,
                                            double fps, Rng& rng) {
    std::vector<std::size_t> negatives;
    negatives.reserve(ws.size());
    for (const Window& w : ws.windows) {
        if (!is_positive_window(w, gt, fps)) negatives.push_back(w.index);
    }
    if (negatives.empty()) {
        throw NoNegativeWindow("ground truth overlaps every window");
    }
    return ws.windows[negatives[rng.uniform_index(negatives.size())]];
}

}  // namespace vtg
