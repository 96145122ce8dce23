#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evavoid/control.hpp"
#include "evavoid/events.hpp"
#include "evavoid/formats.hpp"
#include "evavoid/learner.hpp"
#include "evavoid/render.hpp"
#include "evavoid/world.hpp"

namespace evavoid {

enum class PolicyKind { expert, learned_joint, learned_independent, learned_no_depth, blind };
enum class EventModelKind { accumulator, difflog };

const char* to_string(PolicyKind p);
PolicyKind policy_from_string(const std::string& s);
const char* to_string(EventModelKind m);
EventModelKind event_model_from_string(const std::string& s);
bool is_learned(PolicyKind p);

struct TrialConfig {
    std::uint64_t world_seed = 0;
    PolicyKind policy = PolicyKind::expert;
    double speed_min = 3.0;  // speed drawn uniformly in [min, max]
    double speed_max = 7.0;
    double length = 10.0;
    EventModelKind event_model = EventModelKind::difflog;
    double timeout = 0.0;  // 0: 3 * length / speed
    bool stop_at_first_collision = false;

    WorldGenConfig world{};  // seed is replaced by world_seed
    CameraConfig camera{};
    ExpertConfig expert{};
    ContrastThresholds thresholds{};
    double altitude = 1.5;
    double physics_dt = 1.0 / 120.0;
    double tau = 0.3;
    // Keep frames, depth, event batches and BEMs in the record.
    bool record_sensors = false;

    void validate() const;
};

// Per-trial world, speed and start state, all derived from world_seed. The
// world is generated in a frame where the start point is the origin, with the
// start offset uniformly within the central 20% of the lateral extent. The
// world is lengthened (same density) when length + sense radius exceeds it.
struct TrialSetup {
    World world;
    double speed = 0.0;
    double start_offset_y = 0.0;
    QuadState start;
};
TrialSetup make_trial(const TrialConfig& trial);

struct FrameRecord {
    double t = 0.0;
    QuadState state;
    double v_y_label = 0.0;  // expert's unit lateral command at this frame
    VelocityCommand command;  // command actually flown after this frame
};

struct SensorRecord {
    Frame frame;
    DepthMap depth;
    EventBatch batch;
    Bem bem;
};

struct CollisionEvent {
    double t_start = 0.0;
    double t_end = 0.0;
    Vec2 position;
};

enum class Outcome { reached_goal, timeout, stopped_on_collision };
const char* to_string(Outcome o);

struct RolloutRecord {
    double speed = 0.0;
    std::vector<FrameRecord> frames;
    std::vector<SensorRecord> sensors;  // only with record_sensors
    std::vector<Event> event_stream;    // only with record_sensors
    std::vector<CollisionEvent> collisions;
    Outcome outcome = Outcome::timeout;
};

// Non-privileged policy: receives only binary event masks.
class Pilot {
public:
    virtual ~Pilot() = default;
    virtual void reset() {}
    virtual double act(const Bem& bem) = 0;
    // False lets the loop skip rendering; act() then sees an empty mask.
    virtual bool uses_events() const { return true; }
};

class BlindPilot final : public Pilot {
public:
    double act(const Bem&) override { return 0.0; }
    bool uses_events() const override { return false; }
};

class LearnedPilot final : public Pilot {
public:
    LearnedPilot(NetConfig cfg, ModelParams params);
    void reset() override { state_ = {}; }
    double act(const Bem& bem) override;

private:
    DepthVelocityNet net_;
    ModelParams params_;
    RecurrentState state_;
};

// Closed loop at camera rate. pilot == nullptr runs the privileged expert,
// which re-plans at expert.replan_hz and skips perception unless sensors are
// recorded.
RolloutRecord rollout(const World& world, const QuadState& start, double speed, const TrialConfig& trial,
                      Pilot* pilot);
RolloutRecord run_trial(const TrialConfig& trial, Pilot* pilot);

struct Metrics {
    int trials = 0;
    double success_rate = 0.0;  // zero collisions
    double rate_le_1 = 0.0;
    double rate_le_2 = 0.0;
    double mean_collisions = 0.0;
    int timeouts = 0;
};

Metrics aggregate(const std::vector<int>& collision_counts, int timeouts = 0);

struct EvalRow {
    std::string policy;
    double length = 0.0;
    Metrics metrics;
};

struct EvalConfig {
    PolicyKind policy = PolicyKind::expert;
    std::string label;  // row name; defaults to the policy name
    int n_trials = 100;
    std::vector<double> lengths{10.0};
    std::uint64_t base_seed = 1'000'000;
    TrialConfig trial{};  // world_seed, policy and length are overridden
    int workers = 0;      // 0: hardware concurrency
};

// Trial k of every length uses world seed base_seed + k. Trials run on a
// worker pool and are reduced in trial order.
std::vector<EvalRow> evaluate(const EvalConfig& cfg, const NetConfig* net = nullptr,
                              const ModelParams* params = nullptr);

std::string format_metrics_table(const std::vector<EvalRow>& rows);
std::string format_metrics_csv(const std::vector<EvalRow>& rows);

// Command log: header plus one row per camera frame (t_s v_y_unit v_x_unit speed px py).
std::string format_command_log(const RolloutRecord& rec);

struct CommandRow {
    double t_s, v_y_unit, v_x_unit, speed, px, py;
    friend bool operator==(const CommandRow&, const CommandRow&) = default;
};
std::vector<CommandRow> parse_command_log(const std::string& text);

// ---- datasets ---------------------------------------------------------------

struct CollectConfig {
    int n_trajectories = 0;
    std::vector<std::uint64_t> seeds;  // empty: base_seed + k
    std::uint64_t base_seed = 0;
    TrialConfig trial{};               // policy forced to expert, events to accumulator
    bool write_images = true;
};

struct ManifestEntry {
    int index = 0;
    std::uint64_t seed = 0;
    double speed = 0.0;
    double length = 0.0;
    int frames = 0;
    double duration_s = 0.0;
    std::string dir;
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
    CameraConfig camera;
    std::vector<ManifestEntry> trajectories;
};

std::string manifest_to_text(const Manifest& m);
Manifest manifest_from_text(const std::string& text);

// Runs expert rollouts and writes per-trajectory EVS1/DPT1/IMG1 files, a
// command log, the world, and manifest.json. On I/O failure every file this
// call created is removed and IoError is rethrown.
Manifest collect_dataset(const CollectConfig& cfg, const std::filesystem::path& out_dir);

// Stored trajectory as read back from disk.
struct StoredTrajectory {
    EventFile events;
    std::vector<DepthMap> depth;
    std::vector<Frame> images;
    std::vector<CommandRow> commands;
};
StoredTrajectory load_stored_trajectory(const std::filesystem::path& dir, const Manifest& m, const ManifestEntry& e);

// Network-resolution training samples. Frame 0 (no preceding window) is skipped.
Trajectory training_trajectory(const RolloutRecord& rec, int input_size);
Trajectory training_trajectory(const StoredTrajectory& st, const CameraConfig& cam, int input_size);
std::vector<Trajectory> load_training_set(const std::filesystem::path& dir, int input_size);

// In-memory collection without the disk round trip.
std::vector<Trajectory> collect_training_set(const CollectConfig& cfg, int input_size);

}  // namespace evavoid
