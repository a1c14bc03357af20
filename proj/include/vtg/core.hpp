#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "vtg/errors.hpp"

namespace vtg {

/// Half-open time interval [start, end) in seconds.
struct Span {
    double start = 0.0;
    double end = 0.0;

    double duration() const { return end - start; }
    bool valid() const { return start <= end; }

    friend bool operator==(const Span&, const Span&) = default;
};

/// Temporal intersection-over-union of two spans. A zero-length union
/// (both spans degenerate and coincident) yields 0.
inline double iou(const Span& a, const Span& b) {
    const double inter =
        std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = a.duration() + b.duration() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

namespace detail {

template <typename A, typename B>
double dot_impl(std::span<const A> a, std::span<const B> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("dot: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
    }
    // Left-to-right accumulation in double, for determinism.
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

}  // namespace detail

inline double dot(std::span<const float> a, std::span<const float> b) {
    return detail::dot_impl(a, b);
}
inline double dot(std::span<const double> a, std::span<const double> b) {
    return detail::dot_impl(a, b);
}
inline double dot(std::span<const double> a, std::span<const float> b) {
    return detail::dot_impl(a, b);
}
inline double dot(std::span<const float> a, std::span<const double> b) {
    return detail::dot_impl(a, b);
}

/// Maps scores to [0, 1] via (x - min) / (max - min). When every score is
/// equal the output is all 0.5, so a fused ranking degenerates to the other
/// score component.
inline std::vector<double> min_max_normalize(std::span<const double> scores) {
    if (scores.empty()) {
        throw EmptyInput("min_max_normalize: empty score list");
    }
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(scores.size());
    if (hi == lo) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = (scores[i] - lo) * inv;
    }
    return out;
}

inline std::vector<double> min_max_normalize(const std::vector<double>& scores) {
    return min_max_normalize(std::span<const double>(scores));
}

}  // namespace vtg
