#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "evavoid/learner.hpp"

namespace evavoid {
namespace {

struct Chunk {
    std::size_t trajectory;
    std::size_t start;
    std::size_t length;
};

std::vector<double> flip_columns(const std::vector<double>& img, int size) {
    std::vector<double> out(img.size());
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            out[static_cast<std::size_t>(y) * size + (size - 1 - x)] = img[static_cast<std::size_t>(y) * size + x];
    return out;
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void TrainConfig::validate() const {
    if (!(weights.w_p >= 0.0) || !(weights.w_v >= 0.0)) throw ValidationError("train: loss weights must be >= 0");
    if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("train: momentum must be in [0, 1)");
    if (batch_size <= 0 || epochs <= 0 || chunk_length <= 0 || burn_in < 0)
        throw ValidationError("train: batch_size, epochs, chunk_length must be positive");
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
        throw ValidationError("train: flip_probability must be in [0, 1]");
    if (!(noise_flip_fraction >= 0.0 && noise_flip_fraction <= 0.1))
        throw ValidationError("train: noise_flip_fraction must be in [0, 0.1]");
    if (!(clip_norm >= 0.0)) throw ValidationError("train: clip_norm must be >= 0");
}

double mean_depth_baseline(std::span<const Trajectory> dataset) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& tr : dataset)
        for (const auto& s : tr.frames) {
            sum = std::accumulate(s.depth_gt.begin(), s.depth_gt.end(), sum);
            n += s.depth_gt.size();
        }
    if (n == 0) throw ValidationError("mean_depth_baseline: empty dataset");
    const double mean = sum / static_cast<double>(n);
    double loss = 0.0;
    std::size_t frames = 0;
    for (const auto& tr : dataset)
        for (const auto& s : tr.frames) {
            const std::vector<double> pred(s.depth_gt.size(), mean);
            loss += loss_perception(pred, s.depth_gt);
            ++frames;
        }
    return loss / static_cast<double>(frames);
}

TrainResult train(std::span<const Trajectory> dataset, const NetConfig& net_cfg, const TrainConfig& cfg) {
    cfg.validate();
    const DepthVelocityNet net(net_cfg);
    const int S = net_cfg.input_size;

    std::vector<Chunk> chunks;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::size_t n = dataset[i].frames.size();
        for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(cfg.chunk_length))
            chunks.push_back({i, s, std::min<std::size_t>(cfg.chunk_length, n - s)});
    }
    if (chunks.empty()) throw ValidationError("train: dataset has no frames");

    TrainResult result;
    result.params = net.init_params(mix_seed(cfg.seed, 0));
    ModelParams velocity = result.params.zeros_like();
    ModelParams grad = result.params.zeros_like();
    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        EpochStats stats;
        stats.epoch = epoch;
        std::size_t frames_seen = 0;

        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad.theta.begin(), grad.theta.end(), 0.0);
            std::fill(grad.phi.begin(), grad.phi.end(), 0.0);

            for (std::size_t bi = b0; bi < b1; ++bi) {
                const Chunk& ch = chunks[order[bi]];
                const auto& frames = dataset[ch.trajectory].frames;
                const bool flip = rng.uniform() < cfg.flip_probability;
                const std::uint64_t noise_seed = rng.next_u64();

                auto prepare = [&](const Sample& s, std::size_t k) {
                    Sample out = s;
                    if (flip) {
                        out.bem = flip_lr(s.bem);
                        out.depth_gt = flip_columns(s.depth_gt, S);
                        out.v_y = -s.v_y;
                    }
                    if (cfg.noise_flip_fraction > 0.0)
                        out.bem = augment(out.bem, out.v_y, {false, 0.0, cfg.noise_flip_fraction},
                                          mix_seed(noise_seed, k))
                                      .first;
                    return out;
                };

                RecurrentState state;
                const std::size_t warm0 = ch.start > static_cast<std::size_t>(cfg.burn_in) ? ch.start - cfg.burn_in : 0;
                for (std::size_t k = warm0; k < ch.start; ++k)
                    state = net.advance_state(result.params, prepare(frames[k], k).bem, state);

                std::vector<Sample> seq;
                seq.reserve(ch.length);
                for (std::size_t k = ch.start; k < ch.start + ch.length; ++k) seq.push_back(prepare(frames[k], k));

                const Objective obj = net.backward(result.params, seq, cfg.mode, cfg.weights, grad, state);
                if (!std::isfinite(obj.total)) {
                    std::ostringstream msg;
                    msg << "training diverged: non-finite loss at epoch " << epoch << ", step " << step
                        << " (l_p=" << obj.l_p << ", l_v=" << obj.l_v << ")";
                    throw DivergenceError(msg.str());
                }
                const auto n = static_cast<double>(seq.size());
                stats.l_p += obj.l_p * n;
                stats.l_v += obj.l_v * n;
                stats.total += obj.total * n;
                frames_seen += seq.size();
            }

            double scale = 1.0 / static_cast<double>(b1 - b0);
            double sq = 0.0;
            for (double g : grad.theta) sq += g * g;
            for (double g : grad.phi) sq += g * g;
            const double norm = scale * std::sqrt(sq);
            stats.max_grad_norm = std::max(stats.max_grad_norm, norm);
            if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) scale *= cfg.clip_norm / norm;
            auto update = [&](std::vector<double>& p, std::vector<double>& vel, const std::vector<double>& g) {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    vel[i] = cfg.momentum * vel[i] + scale * g[i];
                    p[i] -= cfg.learning_rate * vel[i];
                }
            };
            update(result.params.theta, velocity.theta, grad.theta);
            update(result.params.phi, velocity.phi, grad.phi);
            if (!all_finite(result.params.theta) || !all_finite(result.params.phi)) {
                std::ostringstream msg;
                msg << "training diverged: non-finite parameters at epoch " << epoch << ", step " << step;
                throw DivergenceError(msg.str());
            }
            ++step;
        }
        const auto n = static_cast<double>(frames_seen);
        stats.l_p /= n;
        stats.l_v /= n;
        stats.total /= n;
        result.history.push_back(stats);
    }
    return result;
}

}  // namespace evavoid
