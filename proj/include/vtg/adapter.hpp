#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "vtg/core.hpp"
#include "vtg/feature_io.hpp"
#include "vtg/manifest.hpp"
#include "vtg/rng.hpp"
#include "vtg/windowing.hpp"

namespace vtg {

/// Residual bottleneck adapter: adapt(v) = W2 * relu(W1 * v + b1) + b2 + v.
/// With all-zero parameters it is the identity map.
struct AdapterParams {
    std::size_t dim = 0;     // d
    std::size_t hidden = 0;  // d_h
    std::vector<double> w1;  // hidden x dim, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // dim x hidden, row-major
    std::vector<double> b2;  // dim

    static AdapterParams zeros(std::size_t d, std::size_t d_h) {
        AdapterParams p;
        p.dim = d;
        p.hidden = d_h;
        p.w1.assign(d_h * d, 0.0);
        p.b1.assign(d_h, 0.0);
        p.w2.assign(d * d_h, 0.0);
        p.b2.assign(d, 0.0);
        return p;
    }

    /// W1 gets small random entries, W2 starts at zero so the adapter is the
    /// identity at init while gradients still reach W1 through W2's update.
    static AdapterParams init(std::size_t d, std::size_t d_h, Rng& rng) {
        AdapterParams p = zeros(d, d_h);
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (double& x : p.w1) x = rng.gaussian() * scale;
        return p;
    }

    std::size_t parameter_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size();
    }

    bool operator==(const AdapterParams&) const = default;
};

/// Gradient buffers with the same shapes as AdapterParams.
struct AdapterGrad {
    std::vector<double> w1, b1, w2, b2;

    explicit AdapterGrad(const AdapterParams& p)
        : w1(p.w1.size(), 0.0),
          b1(p.b1.size(), 0.0),
          w2(p.w2.size(), 0.0),
          b2(p.b2.size(), 0.0) {}

    void add_scaled(const AdapterGrad& o, double c) {
        for (std::size_t i = 0; i < w1.size(); ++i) w1[i] += c * o.w1[i];
        for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += c * o.b1[i];
        for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += c * o.w2[i];
        for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += c * o.b2[i];
    }
};

namespace detail {

template <typename T>
void adapt_into(std::span<const T> v, const AdapterParams& p, std::span<double> out) {
    if (v.size() != p.dim) {
        throw DimensionMismatch("adapt: expected dim " + std::to_string(p.dim) +
                                ", got " + std::to_string(v.size()));
    }
    std::vector<double> hidden(p.hidden);
    for (std::size_t k = 0; k < p.hidden; ++k) {
        double a = p.b1[k];
        const double* w = p.w1.data() + k * p.dim;
        for (std::size_t i = 0; i < p.dim; ++i) a += w[i] * static_cast<double>(v[i]);
        hidden[k] = a > 0.0 ? a : 0.0;  // relu, subgradient at 0 taken as 0
    }
    for (std::size_t i = 0; i < p.dim; ++i) {
        double o = p.b2[i] + static_cast<double>(v[i]);
        const double* w = p.w2.data() + i * p.hidden;
        for (std::size_t k = 0; k < p.hidden; ++k) o += w[k] * hidden[k];
        out[i] = o;
    }
}

/// Backpropagates dL/d(adapt(v)) = g into the parameter gradients.
template <typename T>
void adapt_backward(std::span<const T> v, const AdapterParams& p,
                    std::span<const double> g, AdapterGrad& grad) {
    // Recompute pre-activations.
    std::vector<double> pre(p.hidden), post(p.hidden);
    for (std::size_t k = 0; k < p.hidden; ++k) {
        double a = p.b1[k];
        const double* w = p.w1.data() + k * p.dim;
        for (std::size_t i = 0; i < p.dim; ++i) a += w[i] * static_cast<double>(v[i]);
        pre[k] = a;
        post[k] = a > 0.0 ? a : 0.0;
    }
    std::vector<double> dhidden(p.hidden, 0.0);
    for (std::size_t i = 0; i < p.dim; ++i) {
        grad.b2[i] += g[i];
        double* dw2 = grad.w2.data() + i * p.hidden;
        const double* w2 = p.w2.data() + i * p.hidden;
        for (std::size_t k = 0; k < p.hidden; ++k) {
            dw2[k] += g[i] * post[k];
            dhidden[k] += w2[k] * g[i];
        }
    }
    for (std::size_t k = 0; k < p.hidden; ++k) {
        if (pre[k] <= 0.0) continue;
        grad.b1[k] += dhidden[k];
        double* dw1 = grad.w1.data() + k * p.dim;
        for (std::size_t i = 0; i < p.dim; ++i) {
            dw1[i] += dhidden[k] * static_cast<double>(v[i]);
        }
    }
}

}  // namespace detail

inline std::vector<double> adapt(std::span<const float> v, const AdapterParams& p) {
    std::vector<double> out(p.dim);
    detail::adapt_into(v, p, out);
    return out;
}
inline std::vector<double> adapt(std::span<const double> v, const AdapterParams& p) {
    std::vector<double> out(p.dim);
    detail::adapt_into(v, p, out);
    return out;
}

/// A video's frame features after the adapter pass (or a plain copy when no
/// adapter is in play), widened to double for downstream score math.
struct AdaptedSequence {
    std::size_t dim = 0;
    std::vector<double> data;  // rows x dim

    std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }
};

inline AdaptedSequence adapt_sequence(const FeatureSequence& video,
                                      const AdapterParams* p) {
    AdaptedSequence out;
    out.dim = video.dim();
    out.data.resize(video.data().size());
    for (std::size_t t = 0; t < video.size(); ++t) {
        auto src = video.row(t);
        std::span<double> dst(out.data.data() + t * out.dim, out.dim);
        if (p != nullptr) {
            detail::adapt_into(src, *p, dst);
        } else {
            std::copy(src.begin(), src.end(), dst.begin());
        }
    }
    return out;
}

/// Mean pooling over a half-open feature range.
inline std::vector<double> proposal_feature(const AdaptedSequence& video,
                                            std::size_t begin, std::size_t end) {
    if (begin >= end || end > video.size()) {
        throw EmptyRange("proposal_feature: bad range [" + std::to_string(begin) +
                         ", " + std::to_string(end) + ") of " +
                         std::to_string(video.size()));
    }
    std::vector<double> mean(video.dim, 0.0);
    for (std::size_t t = begin; t < end; ++t) {
        auto r = video.row(t);
        for (std::size_t i = 0; i < video.dim; ++i) mean[i] += r[i];
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (double& x : mean) x *= inv;
    return mean;
}

/// One positive (proposal feature, query) pair of an NCE batch.
struct NcePair {
    std::vector<double> h;  // pooled proposal feature
    std::vector<double> q;  // query [CLS]
};

/// In-batch NCE: each positive is scored against every batch proposal
/// feature under its own query,
///   L = -sum_i log( exp(h_i . q_i) / sum_j exp(h_j . q_i) ),
/// stabilized with max subtraction inside the log-sum-exp.
inline double nce_loss(std::span<const NcePair> batch) {
    const std::size_t n = batch.size();
    double loss = 0.0;
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            logits[j] = dot(std::span<const double>(batch[j].h),
                            std::span<const double>(batch[i].q));
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double z : logits) sum += std::exp(z - m);
        loss += m + std::log(sum) - logits[i];
    }
    return loss;
}

/// Training view of one instance: the annotated ground-truth range of its
/// video plus the query [CLS] feature.
struct AdapterTrainItem {
    const FeatureSequence* video = nullptr;
    std::size_t begin = 0;  // gt feature range
    std::size_t end = 0;
    std::vector<double> q;
};

/// NCE loss over a batch of ground-truth proposals, with analytic gradients
/// of all adapter parameters. Proposal features are mean pools of adapted
/// frames, so every frame of every range receives its share of the gradient.
inline double nce_loss_and_grad(std::span<const AdapterTrainItem> batch,
                                const AdapterParams& p, AdapterGrad* grad) {
    const std::size_t n = batch.size();
    if (n == 0) return 0.0;

    std::vector<std::vector<double>> h(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& it = batch[j];
        if (it.begin >= it.end || it.end > it.video->size()) {
            throw EmptyRange("nce_loss_and_grad: bad gt range");
        }
        std::vector<double> mean(p.dim, 0.0);
        std::vector<double> tmp(p.dim);
        for (std::size_t t = it.begin; t < it.end; ++t) {
            detail::adapt_into(it.video->row(t), p, std::span<double>(tmp));
            for (std::size_t i = 0; i < p.dim; ++i) mean[i] += tmp[i];
        }
        const double inv = 1.0 / static_cast<double>(it.end - it.begin);
        for (double& x : mean) x *= inv;
        h[j] = std::move(mean);
    }

    double loss = 0.0;
    std::vector<std::vector<double>> dh(n, std::vector<double>(p.dim, 0.0));
    std::vector<double> logits(n), prob(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            logits[j] = dot(std::span<const double>(h[j]),
                            std::span<const double>(batch[i].q));
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            prob[j] = std::exp(logits[j] - m);
            sum += prob[j];
        }
        loss += m + std::log(sum) - logits[i];
        if (grad == nullptr) continue;
        for (std::size_t j = 0; j < n; ++j) {
            const double dz = prob[j] / sum - (i == j ? 1.0 : 0.0);
            for (std::size_t c = 0; c < p.dim; ++c) {
                dh[j][c] += dz * batch[i].q[c];
            }
        }
    }

    if (grad != nullptr) {
        std::vector<double> g(p.dim);
        for (std::size_t j = 0; j < n; ++j) {
            const auto& it = batch[j];
            const double inv = 1.0 / static_cast<double>(it.end - it.begin);
            for (std::size_t c = 0; c < p.dim; ++c) g[c] = dh[j][c] * inv;
            for (std::size_t t = it.begin; t < it.end; ++t) {
                detail::adapt_backward(it.video->row(t), p,
                                       std::span<const double>(g), *grad);
            }
        }
    }
    return loss;
}

inline AdapterGrad adapter_grad(std::span<const AdapterTrainItem> batch,
                                const AdapterParams& p) {
    AdapterGrad g(p);
    nce_loss_and_grad(batch, p, &g);
    return g;
}

struct AdapterTrainConfig {
    double learning_rate = 1e-5;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 40;
    std::size_t early_stop_patience = 5;
    std::uint64_t seed = 42;
    std::size_t hidden = 0;  // 0 -> dim / 4
    double holdout_fraction = 0.2;
};

struct AdapterTrainLog {
    std::vector<double> epoch_train_loss;    // accepted value after each epoch
    std::vector<double> epoch_holdout_loss;
    std::vector<double> learning_rates;
};

namespace detail {

inline std::vector<AdapterTrainItem> make_adapter_items(const Dataset& ds) {
    std::vector<AdapterTrainItem> items;
    items.reserve(ds.instances.size());
    for (const auto& inst : ds.instances) {
        const FeatureSequence& video = ds.video_of(inst);
        const FeatureSequence& query = ds.query_of(inst);
        std::size_t begin = static_cast<std::size_t>(
            std::floor(inst.gt.start * inst.fps));
        std::size_t end = static_cast<std::size_t>(std::ceil(inst.gt.end * inst.fps));
        end = std::min(end, video.size());
        if (begin >= end) begin = end - 1;
        AdapterTrainItem it;
        it.video = &video;
        it.begin = begin;
        it.end = end;
        auto cls = query.cls();
        it.q.assign(cls.begin(), cls.end());
        items.push_back(std::move(it));
    }
    return items;
}

/// Mean per-item NCE loss over a fixed sequential batch partition.
inline double mean_nce(const std::vector<AdapterTrainItem>& items,
                       std::span<const std::size_t> idx,
                       const AdapterParams& p, std::size_t batch_size) {
    if (idx.empty()) return 0.0;
    double total = 0.0;
    std::vector<AdapterTrainItem> batch;
    for (std::size_t off = 0; off < idx.size(); off += batch_size) {
        batch.clear();
        for (std::size_t b = off; b < std::min(off + batch_size, idx.size()); ++b) {
            batch.push_back(items[idx[b]]);
        }
        total += nce_loss_and_grad(batch, p, nullptr);
    }
    return total / static_cast<double>(idx.size());
}

}  // namespace detail

/// Trains the adapter with SGD on the in-batch NCE loss. An epoch whose
/// training loss increases is reverted and retried at half the learning
/// rate, so the accepted loss sequence is non-increasing. Early stopping
/// watches a held-out split; the best held-out parameters are returned.
inline AdapterParams train_adapter(const Dataset& ds, const AdapterTrainConfig& cfg,
                                   AdapterTrainLog* log = nullptr) {
    const auto items = detail::make_adapter_items(ds);
    if (items.size() < 2) {
        throw InsufficientData("train_adapter: need at least 2 instances, got " +
                               std::to_string(items.size()));
    }
    const std::size_t d = items.front().video->dim();
    const std::size_t d_h = cfg.hidden > 0 ? cfg.hidden : std::max<std::size_t>(1, d / 4);

    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(cfg.seed, "adapter-split"));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[split_rng.uniform_index(i)]);
    }
    const std::size_t n_holdout = std::max<std::size_t>(
        1, static_cast<std::size_t>(static_cast<double>(items.size()) *
                                    cfg.holdout_fraction));
    std::vector<std::size_t> holdout(order.begin(), order.begin() + n_holdout);
    std::vector<std::size_t> train(order.begin() + n_holdout, order.end());
    if (train.empty()) {  // degenerate two-instance dataset
        train.push_back(holdout.back());
    }

    Rng init_rng(derive_seed(cfg.seed, "adapter-init"));
    AdapterParams params = AdapterParams::init(d, d_h, init_rng);

    double lr = cfg.learning_rate;
    double prev_train = detail::mean_nce(items, train, params, cfg.batch_size);
    double best_holdout = detail::mean_nce(items, holdout, params, cfg.batch_size);
    AdapterParams best = params;
    std::size_t patience = 0;

    Rng shuffle_rng(derive_seed(cfg.seed, "adapter-epochs"));
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const AdapterParams snapshot = params;
        std::vector<std::size_t> perm = train;
        for (std::size_t i = perm.size(); i > 1; --i) {
            std::swap(perm[i - 1], perm[shuffle_rng.uniform_index(i)]);
        }
        std::vector<AdapterTrainItem> batch;
        for (std::size_t off = 0; off < perm.size(); off += cfg.batch_size) {
            batch.clear();
            for (std::size_t b = off; b < std::min(off + cfg.batch_size, perm.size());
                 ++b) {
                batch.push_back(items[perm[b]]);
            }
            AdapterGrad grad(params);
            nce_loss_and_grad(batch, params, &grad);
            const double step = lr / static_cast<double>(batch.size());
            for (std::size_t i = 0; i < params.w1.size(); ++i)
                params.w1[i] -= step * grad.w1[i];
            for (std::size_t i = 0; i < params.b1.size(); ++i)
                params.b1[i] -= step * grad.b1[i];
            for (std::size_t i = 0; i < params.w2.size(); ++i)
                params.w2[i] -= step * grad.w2[i];
            for (std::size_t i = 0; i < params.b2.size(); ++i)
                params.b2[i] -= step * grad.b2[i];
        }

        double train_loss = detail::mean_nce(items, train, params, cfg.batch_size);
        if (train_loss > prev_train) {
            params = snapshot;
            lr *= 0.5;
            train_loss = prev_train;
            if (lr < 1e-15) break;
        }
        prev_train = train_loss;

        const double holdout_loss =
            detail::mean_nce(items, holdout, params, cfg.batch_size);
        if (log != nullptr) {
            log->epoch_train_loss.push_back(train_loss);
            log->epoch_holdout_loss.push_back(holdout_loss);
            log->learning_rates.push_back(lr);
        }
        if (holdout_loss < best_holdout) {
            best_holdout = holdout_loss;
            best = params;
            patience = 0;
        } else if (++patience > cfg.early_stop_patience) {
            break;
        }
    }
    return best;
}

// ---- checkpoint io ----------------------------------------------------

inline constexpr char kAdapterMagic[4] = {'C', 'F', 'A', '1'};

inline std::string encode_adapter(const AdapterParams& p) {
    std::string out;
    out.append(kAdapterMagic, 4);
    detail::put_u32le(out, static_cast<std::uint32_t>(p.dim));
    detail::put_u32le(out, static_cast<std::uint32_t>(p.hidden));
    auto put_block = [&out](const std::vector<double>& v) {
        for (double x : v) {
            detail::put_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
        }
    };
    put_block(p.w1);
    put_block(p.b1);
    put_block(p.w2);
    put_block(p.b2);
    return out;
}

inline void save_adapter(const std::filesystem::path& path, const AdapterParams& p) {
    detail::write_file_bytes(path, encode_adapter(p));
}

inline AdapterParams load_adapter(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file_bytes(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kAdapterMagic, 4) != 0) {
        throw BadMagic("not an adapter checkpoint: " + path.string());
    }
    if (bytes.size() < 12) {
        throw TruncatedFile("adapter header truncated: " + path.string());
    }
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t d = detail::get_u32le(raw + 4);
    const std::uint32_t d_h = detail::get_u32le(raw + 8);
    if (d == 0 || d_h == 0) {
        throw ZeroDim("adapter checkpoint with zero dimension: " + path.string());
    }
    AdapterParams p = AdapterParams::zeros(d, d_h);
    const std::size_t need = 12 + p.parameter_count() * 4;
    if (bytes.size() < need) {
        throw TruncatedFile("adapter payload truncated: " + path.string());
    }
    std::size_t off = 12;
    auto get_block = [&](std::vector<double>& v) {
        for (double& x : v) {
            const float f = std::bit_cast<float>(detail::get_u32le(raw + off));
            if (!std::isfinite(f)) {
                throw NonFiniteValue("non-finite adapter weight: " + path.string());
            }
            x = f;
            off += 4;
        }
    };
    get_block(p.w1);
    get_block(p.b1);
    get_block(p.w2);
    get_block(p.b2);
    return p;
}

}  // namespace vtg
