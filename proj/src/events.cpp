#include "evavoid/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace evavoid {
namespace {

void require_same_shape(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw ShapeError(std::string(what) + ": resolution mismatch");
}

// k-th of n crossings (k = 1..n) lands at t_prev + ceil(k * dt / n), which is
// strictly after t_prev and at most t_next.
std::uint64_t crossing_time(std::uint64_t t_prev, std::uint64_t dt, std::int64_t k, std::int64_t n) {
    const auto kk = static_cast<std::uint64_t>(k);
    const auto nn = static_cast<std::uint64_t>(n);
    const std::uint64_t off = (kk * dt + nn - 1) / nn;
    return t_prev + std::max<std::uint64_t>(off, 1);
}

void emit(std::vector<Event>& out, std::uint64_t t_prev, std::uint64_t dt, std::int64_t n, int x, int y,
          std::int8_t p) {
    for (std::int64_t k = 1; k <= n; ++k) {
        out.push_back({crossing_time(t_prev, dt, k, n), static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                       p});
    }
}

}  // namespace

void ContrastThresholds::validate() const {
    if (!(c_pos > 0.0) || !(c_neg > 0.0)) throw ValidationError("contrast thresholds must be positive");
    if (!(log_eps > 0.0)) throw ValidationError("log_eps must be positive");
}

std::vector<double> log_intensity(const Frame& frame, double log_eps) {
    std::vector<double> out(frame.intensity.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(static_cast<double>(frame.intensity[i]) + log_eps);
    return out;
}

EventCameraModel::EventCameraModel(int width, int height, ContrastThresholds thresholds)
    : width_(width), height_(height), thr_(thresholds) {
    if (width <= 0 || height <= 0 || width > 65536 || height > 65536)
        throw ValidationError("event camera: invalid resolution");
    thr_.validate();
    const auto n = static_cast<std::size_t>(width) * height;
    base_.assign(n, 0.0);
    n_pos_.assign(n, 0);
    n_neg_.assign(n, 0);
}

void EventCameraModel::reset(std::span<const double> log_image) {
    require_same_shape(log_image.size(), base_.size(), "EventCameraModel::reset");
    std::copy(log_image.begin(), log_image.end(), base_.begin());
    std::fill(n_pos_.begin(), n_pos_.end(), 0);
    std::fill(n_neg_.begin(), n_neg_.end(), 0);
    initialized_ = true;
}

std::vector<Event> EventCameraModel::accumulate_log(std::span<const double> log_next, std::uint64_t t_prev_us,
                                                    std::uint64_t t_next_us) {
    require_same_shape(log_next.size(), base_.size(), "events_accumulator");
    if (!(t_next_us > t_prev_us)) throw ContractViolation("events_accumulator: next frame must be later than prev");
    if (!initialized_) throw ContractViolation("events_accumulator: reference not initialized");
    const std::uint64_t dt = t_next_us - t_prev_us;

    std::vector<Event> out;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            const auto i = static_cast<std::size_t>(y) * width_ + x;
            const double ref = base_[i] + static_cast<double>(n_pos_[i]) * thr_.c_pos -
                               static_cast<double>(n_neg_[i]) * thr_.c_neg;
            const double d = log_next[i] - ref;
            if (d > 0.0) {
                const auto n = static_cast<std::int64_t>(std::floor(d / thr_.c_pos));
                n_pos_[i] += n;
                emit(out, t_prev_us, dt, n, x, y, +1);
            } else if (d < 0.0) {
                const auto n = static_cast<std::int64_t>(std::floor(-d / thr_.c_neg));
                n_neg_[i] += n;
                emit(out, t_prev_us, dt, n, x, y, -1);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Event> EventCameraModel::accumulate(const Frame& prev, const Frame& next) {
    if (prev.width != width_ || prev.height != height_ || next.width != width_ || next.height != height_)
        throw ShapeError("events_accumulator: resolution mismatch");
    if (!initialized_) reset(log_intensity(prev, thr_.log_eps));
    return accumulate_log(log_intensity(next, thr_.log_eps), prev.t_us, next.t_us);
}

double EventCameraModel::ref_log(int x, int y) const {
    const auto i = static_cast<std::size_t>(y) * width_ + x;
    return base_[i] + static_cast<double>(n_pos_[i]) * thr_.c_pos - static_cast<double>(n_neg_[i]) * thr_.c_neg;
}

std::int64_t EventCameraModel::signed_count(int x, int y) const {
    const auto i = static_cast<std::size_t>(y) * width_ + x;
    return n_pos_[i] - n_neg_[i];
}

std::vector<std::int32_t> events_difflog_log(std::span<const double> log_prev, std::span<const double> log_next,
                                             const ContrastThresholds& thr) {
    require_same_shape(log_prev.size(), log_next.size(), "events_difflog");
    std::vector<std::int32_t> out(log_prev.size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = log_next[i] - log_prev[i];
        if (d > 0.0) {
            out[i] = static_cast<std::int32_t>(std::floor(d / thr.c_pos));
        } else if (d < 0.0) {
            out[i] = -static_cast<std::int32_t>(std::floor(-d / thr.c_neg));
        }
    }
    return out;
}

std::vector<std::int32_t> events_difflog(const ContrastThresholds& thr, const Frame& prev, const Frame& next) {
    if (prev.width != next.width || prev.height != next.height) throw ShapeError("events_difflog: resolution mismatch");
    thr.validate();
    return events_difflog_log(log_intensity(prev, thr.log_eps), log_intensity(next, thr.log_eps), thr);
}

std::vector<Event> events_from_counts(std::span<const std::int32_t> counts, int width, int height,
                                      std::uint64_t t_prev_us, std::uint64_t t_next_us) {
    require_same_shape(counts.size(), static_cast<std::size_t>(width) * height, "events_from_counts");
    if (!(t_next_us > t_prev_us)) throw ContractViolation("events_from_counts: empty time interval");
    std::vector<Event> out;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::int32_t c = counts[static_cast<std::size_t>(y) * width + x];
            if (c > 0) emit(out, t_prev_us, t_next_us - t_prev_us, c, x, y, +1);
            if (c < 0) emit(out, t_prev_us, t_next_us - t_prev_us, -static_cast<std::int64_t>(c), x, y, -1);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

EventBatch batch_events(std::span<const Event> stream, std::uint64_t t0, std::uint64_t dt, int width, int height) {
    const bool sorted = std::is_sorted(stream.begin(), stream.end(),
                                       [](const Event& a, const Event& b) { return a.t < b.t; });
    if (!sorted) throw ContractViolation("batch_events: stream is not time-sorted");
    EventBatch batch;
    batch.t_start = t0;
    batch.t_end = t0 + dt;
    batch.width = width;
    batch.height = height;
    const auto lo = std::lower_bound(stream.begin(), stream.end(), t0,
                                     [](const Event& e, std::uint64_t t) { return e.t < t; });
    const auto hi = std::lower_bound(lo, stream.end(), batch.t_end,
                                     [](const Event& e, std::uint64_t t) { return e.t < t; });
    batch.events.assign(lo, hi);
    return batch;
}

std::size_t Bem::popcount() const {
    return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; }));
}

Bem bem_from_batch(const EventBatch& batch) {
    std::vector<std::int32_t> net(static_cast<std::size_t>(batch.width) * batch.height, 0);
    for (const Event& e : batch.events) {
        if (e.x >= batch.width || e.y >= batch.height) throw ValidationError("bem_from_batch: event outside sensor");
        net[static_cast<std::size_t>(e.y) * batch.width + e.x] += e.p;
    }
    return bem_from_difflog(net, batch.width, batch.height);
}

Bem bem_from_difflog(std::span<const std::int32_t> counts, int width, int height) {
    require_same_shape(counts.size(), static_cast<std::size_t>(width) * height, "bem_from_difflog");
    Bem bem(width, height);
    for (std::size_t i = 0; i < counts.size(); ++i) bem.mask[i] = counts[i] != 0 ? 1 : 0;
    return bem;
}

Bem flip_lr(const Bem& bem) {
    Bem out(bem.width, bem.height);
    for (int y = 0; y < bem.height; ++y)
        for (int x = 0; x < bem.width; ++x) out.at(bem.width - 1 - x, y) = bem.at(x, y);
    return out;
}

EventBatch flip_lr(const EventBatch& batch) {
    EventBatch out = batch;
    for (Event& e : out.events) e.x = static_cast<std::uint16_t>(batch.width - 1 - e.x);
    return out;
}

Bem rotate_nearest(const Bem& bem, double radians) {
    Bem out(bem.width, bem.height);
    const double cx = 0.5 * (bem.width - 1);
    const double cy = 0.5 * (bem.height - 1);
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    for (int y = 0; y < bem.height; ++y) {
        for (int x = 0; x < bem.width; ++x) {
            // Inverse map from destination to source.
            const double dx = x - cx;
            const double dy = y - cy;
            const long sx = std::lround(c * dx + s * dy + cx);
            const long sy = std::lround(-s * dx + c * dy + cy);
            if (sx >= 0 && sx < bem.width && sy >= 0 && sy < bem.height)
                out.at(x, y) = bem.at(static_cast<int>(sx), static_cast<int>(sy));
        }
    }
    return out;
}

std::size_t hamming(const Bem& a, const Bem& b) {
    if (a.mask.size() != b.mask.size()) throw ShapeError("hamming: shape mismatch");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.mask.size(); ++i) d += (a.mask[i] != 0) != (b.mask[i] != 0);
    return d;
}

void AugmentSpec::validate() const {
    if (!(std::abs(rotation) <= 0.35)) throw ValidationError("augment: |rotation| must be <= 0.35 rad");
    if (!(noise_flip_fraction >= 0.0 && noise_flip_fraction <= 0.1))
        throw ValidationError("augment: noise_flip_fraction must be in [0, 0.1]");
}

std::pair<Bem, double> augment(const Bem& bem, double label_v_y, const AugmentSpec& spec, std::uint64_t seed) {
    spec.validate();
    Bem out = spec.flip_lr ? flip_lr(bem) : bem;
    double label = spec.flip_lr ? -label_v_y : label_v_y;
    if (spec.rotation != 0.0) out = rotate_nearest(out, spec.rotation);

    const std::size_t n = out.mask.size();
    const auto flips = static_cast<std::size_t>(std::llround(spec.noise_flip_fraction * static_cast<double>(n)));
    if (flips > 0) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng(seed);
        for (std::size_t i = 0; i < flips; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
            std::swap(idx[i], idx[j]);
            out.mask[idx[i]] ^= 1;
        }
    }
    return {std::move(out), label};
}

Bem downsample_bem(const Bem& bem, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0 || out_w > bem.width || out_h > bem.height)
        throw ShapeError("downsample_bem: target must be within source resolution");
    std::vector<int> set(static_cast<std::size_t>(out_w) * out_h, 0);
    std::vector<int> cnt(set.size(), 0);
    for (int y = 0; y < bem.height; ++y) {
        const int oy = static_cast<int>(static_cast<long long>(y) * out_h / bem.height);
        for (int x = 0; x < bem.width; ++x) {
            const auto o = static_cast<std::size_t>(oy) * out_w +
                           static_cast<std::size_t>(static_cast<long long>(x) * out_w / bem.width);
            set[o] += bem.at(x, y) != 0;
            ++cnt[o];
        }
    }
    Bem out(out_w, out_h);
    for (std::size_t i = 0; i < set.size(); ++i) out.mask[i] = set[i] > 0 && 2 * set[i] >= cnt[i];
    return out;
}

std::vector<double> downsample_depth(const DepthMap& depth, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0 || out_w > depth.width || out_h > depth.height)
        throw ShapeError("downsample_depth: target must be within source resolution");
    std::vector<double> sum(static_cast<std::size_t>(out_w) * out_h, 0.0);
    std::vector<int> cnt(sum.size(), 0);
    for (int y = 0; y < depth.height; ++y) {
        const int oy = static_cast<int>(static_cast<long long>(y) * out_h / depth.height);
        for (int x = 0; x < depth.width; ++x) {
            const auto o = static_cast<std::size_t>(oy) * out_w +
                           static_cast<std::size_t>(static_cast<long long>(x) * out_w / depth.width);
            sum[o] += depth.at(x, y);
            ++cnt[o];
        }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] /= cnt[i];
    return sum;
}

}  // namespace evavoid
