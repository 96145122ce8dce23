#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "evavoid/common.hpp"
#include "evavoid/render.hpp"

namespace evavoid {

struct Event {
    std::uint64_t t = 0;  // microseconds
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1;  // -1 or +1

    friend bool operator==(const Event&, const Event&) = default;
    friend auto operator<=>(const Event&, const Event&) = default;
};

struct ContrastThresholds {
    double c_pos = 0.2;
    double c_neg = 0.2;
    double log_eps = 1e-3;

    void validate() const;
};

// Natural log of (intensity + log_eps), per pixel.
std::vector<double> log_intensity(const Frame& frame, double log_eps);

// Stateful per-pixel threshold-crossing generator. The reference level of
// each pixel is stored as base + n_pos * c_pos - n_neg * c_neg so that the
// change in reference is always an exact multiple of the thresholds.
class EventCameraModel {
public:
    EventCameraModel(int width, int height, ContrastThresholds thresholds = {});

    int width() const { return width_; }
    int height() const { return height_; }
    const ContrastThresholds& thresholds() const { return thr_; }
    bool initialized() const { return initialized_; }

    // Set the reference to the given log image and zero the crossing counts.
    void reset(std::span<const double> log_image);

    // Emits events for the log change up to log_next; timestamps in
    // (t_prev_us, t_next_us]. Sorted by (t, x, y, p).
    std::vector<Event> accumulate_log(std::span<const double> log_next, std::uint64_t t_prev_us,
                                      std::uint64_t t_next_us);

    // Frame-level entry point. Initializes the reference from prev on first use.
    std::vector<Event> accumulate(const Frame& prev, const Frame& next);

    double ref_log(int x, int y) const;
    // Signed number of crossings emitted at a pixel since the last reset.
    std::int64_t signed_count(int x, int y) const;

private:
    int width_;
    int height_;
    ContrastThresholds thr_;
    bool initialized_ = false;
    std::vector<double> base_;
    std::vector<std::int64_t> n_pos_;
    std::vector<std::int64_t> n_neg_;
};

// Stateless per-pixel estimate sign(d) * floor(|d| / C) of the log difference.
std::vector<std::int32_t> events_difflog_log(std::span<const double> log_prev, std::span<const double> log_next,
                                             const ContrastThresholds& thr);
std::vector<std::int32_t> events_difflog(const ContrastThresholds& thr, const Frame& prev, const Frame& next);

// Expand signed per-pixel counts into events spread over (t_prev_us, t_next_us],
// using the same in-window timing rule as the accumulator.
std::vector<Event> events_from_counts(std::span<const std::int32_t> counts, int width, int height,
                                      std::uint64_t t_prev_us, std::uint64_t t_next_us);

struct EventBatch {
    std::vector<Event> events;
    std::uint64_t t_start = 0;
    std::uint64_t t_end = 0;
    int width = 0;
    int height = 0;
};

// Events with t in [t0, t0 + dt), order preserved. Throws ContractViolation
// on an unsorted stream.
EventBatch batch_events(std::span<const Event> stream, std::uint64_t t0, std::uint64_t dt, int width, int height);

struct Bem {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;

    Bem() = default;
    Bem(int w, int h) : width(w), height(h), mask(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return mask[static_cast<std::size_t>(y) * width + x]; }
    std::size_t popcount() const;
    friend bool operator==(const Bem&, const Bem&) = default;
};

Bem bem_from_batch(const EventBatch& batch);
Bem bem_from_difflog(std::span<const std::int32_t> counts, int width, int height);

Bem flip_lr(const Bem& bem);
EventBatch flip_lr(const EventBatch& batch);
// Nearest-neighbor rotation about the image center; samples outside the
// source are zero.
Bem rotate_nearest(const Bem& bem, double radians);
std::size_t hamming(const Bem& a, const Bem& b);

struct AugmentSpec {
    bool flip_lr = false;
    double rotation = 0.0;             // radians, |rotation| <= 0.35
    double noise_flip_fraction = 0.0;  // in [0, 0.1]

    void validate() const;
};

// Flip (negating the label), then rotate, then flip exactly
// round(fraction * W * H) distinct, uniformly chosen bits.
std::pair<Bem, double> augment(const Bem& bem, double label_v_y, const AugmentSpec& spec, std::uint64_t seed);

// Block reductions to a network input grid. A BEM cell is set if at least half
// of the source pixels in its block are set; depth cells take the block mean.
Bem downsample_bem(const Bem& bem, int out_w, int out_h);
std::vector<double> downsample_depth(const DepthMap& depth, int out_w, int out_h);

}  // namespace evavoid
