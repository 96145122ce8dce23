#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evavoid/events.hpp"

namespace evavoid {

// Encoder (two 3x3 conv + 2x2 average-pool stages) -> optional gated
// recurrent cell on the bottleneck -> decoder (bilinear upsample, concat
// the encoder features of the same resolution, 3x3 conv) -> softplus depth.
// The velocity head reads a depth map: 3x3 conv, average pool to a coarse
// grid, two fully connected layers, tanh.
struct NetConfig {
    int input_size = 64;
    int enc1_channels = 8;
    int enc2_channels = 16;
    bool recurrent = true;
    int dec1_channels = 8;
    int head_channels = 4;
    int head_grid = 4;
    int head_hidden = 16;
    double depth_floor = 0.01;
    double head_input_scale = 0.1;
    double initial_depth = 10.0;

    void validate() const;
    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

enum class ParamPart : std::uint8_t { theta = 0, phi = 1 };

struct TensorSlot {
    std::string name;
    ParamPart part = ParamPart::theta;
    std::size_t offset = 0;
    std::vector<std::uint32_t> shape;

    std::size_t size() const;
    friend bool operator==(const TensorSlot&, const TensorSlot&) = default;
};

// theta: depth predictor weights, phi: velocity head weights.
struct ModelParams {
    std::vector<double> theta;
    std::vector<double> phi;
    std::vector<TensorSlot> layout;

    std::span<double> view(const TensorSlot& slot);
    std::span<const double> view(const TensorSlot& slot) const;
    const TensorSlot& slot(const std::string& name) const;
    std::size_t count() const { return theta.size() + phi.size(); }
    // Same layout, all zeros.
    ModelParams zeros_like() const;
    // Check layout coverage and finiteness; throws ValidationError.
    void validate() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

enum class TrainMode { joint, independent, no_depth };

const char* to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

struct LossWeights {
    double w_p = 1.0;
    double w_v = 10.0;
};

// Mean over pixels of (1 / gt) * (gt - pred)^2. Throws on nonpositive gt.
double loss_perception(std::span<const double> depth_pred, std::span<const double> depth_gt);
double loss_velocity(double v_y_pred, double v_y_label);

struct RecurrentState {
    std::vector<double> h;  // empty means zeros
};

struct ForwardResult {
    std::vector<double> depth;  // input_size x input_size
    double v_y = 0.0;
    RecurrentState state;
};

// One supervised frame at network resolution.
struct Sample {
    Bem bem;
    std::vector<double> depth_gt;
    double v_y = 0.0;
};

struct Objective {
    double total = 0.0;
    double l_p = 0.0;  // mean over frames
    double l_v = 0.0;  // mean over frames
};

class DepthVelocityNet {
public:
    explicit DepthVelocityNet(NetConfig cfg);

    const NetConfig& config() const { return cfg_; }
    const std::vector<TensorSlot>& layout() const { return layout_; }
    std::size_t theta_size() const { return theta_size_; }
    std::size_t phi_size() const { return phi_size_; }

    // Glorot-uniform weights, zero biases (the depth output bias starts at
    // the value that yields initial_depth).
    ModelParams init_params(std::uint64_t seed) const;

    ForwardResult forward(const ModelParams& params, const Bem& bem, const RecurrentState& state) const;
    // Velocity head alone on an arbitrary depth map.
    double velocity(const ModelParams& params, std::span<const double> depth) const;

    // Mode objective over a sequence, starting from `init`:
    //   joint:       mean_t w_p L_p + w_v L_v, head fed with predicted depth
    //   independent: mean_t w_p L_p + w_v L_v, head fed with ground-truth depth
    //   no_depth:    mean_t w_v L_v, head fed with predicted depth
    Objective objective(const ModelParams& params, std::span<const Sample> seq, TrainMode mode, LossWeights w,
                        const RecurrentState& init = {}) const;

    // Objective value and its exact gradient (accumulated into `grad`, which
    // must share the parameter layout).
    Objective backward(const ModelParams& params, std::span<const Sample> seq, TrainMode mode, LossWeights w,
                       ModelParams& grad, const RecurrentState& init = {}) const;

    // Run encoder and recurrent cell only, to warm up the state.
    RecurrentState advance_state(const ModelParams& params, const Bem& bem, const RecurrentState& state) const;

private:
    struct Cache;
    void check_params(const ModelParams& params) const;
    void forward_frame(const ModelParams& params, const Bem& bem, const std::vector<double>& h_prev, Cache& c,
                       bool depth_branch) const;

    NetConfig cfg_;
    std::vector<TensorSlot> layout_;
    std::size_t theta_size_ = 0;
    std::size_t phi_size_ = 0;
};

// ---- training -------------------------------------------------------------

// Consecutive frames of one expert flight; recurrent state threads through
// a trajectory and resets between trajectories.
struct Trajectory {
    std::vector<Sample> frames;
};

struct TrainConfig {
    LossWeights weights{};
    double learning_rate = 2e-3;
    double momentum = 0.9;
    int batch_size = 8;
    int epochs = 4;
    int chunk_length = 8;
    // Frames run through encoder + recurrent cell (no gradient) to warm the
    // state before each chunk.
    int burn_in = 4;
    double flip_probability = 0.5;
    double noise_flip_fraction = 0.0;
    // Rescale each batch gradient to at most this global L2 norm; 0 disables.
    double clip_norm = 20.0;
    TrainMode mode = TrainMode::joint;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double l_p = 0.0;
    double l_v = 0.0;
    double total = 0.0;
    double max_grad_norm = 0.0;  // largest batch gradient norm before clipping
    friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> history;
};

// Minibatch SGD with momentum over trajectory chunks. Deterministic for a
// fixed seed. Throws DivergenceError if the loss becomes non-finite.
TrainResult train(std::span<const Trajectory> dataset, const NetConfig& net_cfg, const TrainConfig& cfg);

// Mean per-frame L_p of predicting one constant depth (the dataset mean).
double mean_depth_baseline(std::span<const Trajectory> dataset);

}  // namespace evavoid
