#include "evavoid/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "evavoid/formats.hpp"

namespace evavoid {
namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string numbered(const char* prefix, int i, int width, const char* suffix) {
    std::ostringstream s;
    s << prefix << std::setw(width) << std::setfill('0') << i << suffix;
    return s.str();
}

// Per-frame perception: render, synthesize events with the chosen model,
// batch over the frame interval and reduce to a BEM.
class Perception {
public:
    Perception(const TrialConfig& trial, bool record)
        : trial_(trial),
          record_(record),
          accumulator_(trial.camera.width, trial.camera.height, trial.thresholds) {}

    // Returns the frame's BEM; fills `out` when recording.
    Bem observe(const World& world, const QuadState& pose, SensorRecord* out, std::vector<Event>* stream) {
        const CameraConfig& cam = trial_.camera;
        auto [frame, depth] = render(world, pose, cam);
        std::vector<double> log_now = log_intensity(frame, trial_.thresholds.log_eps);

        Bem bem(cam.width, cam.height);
        EventBatch batch{{}, frame.t_us, frame.t_us, cam.width, cam.height};
        if (!has_prev_) {
            if (trial_.event_model == EventModelKind::accumulator) accumulator_.reset(log_now);
        } else {
            std::vector<Event> events;
            if (trial_.event_model == EventModelKind::accumulator) {
                events = accumulator_.accumulate_log(log_now, prev_t_us_, frame.t_us);
            } else {
                const auto counts = events_difflog_log(prev_log_, log_now, trial_.thresholds);
                if (record_) events = events_from_counts(counts, cam.width, cam.height, prev_t_us_, frame.t_us);
                bem = bem_from_difflog(counts, cam.width, cam.height);
            }
            batch = batch_events(events, prev_t_us_ + 1, frame.t_us - prev_t_us_, cam.width, cam.height);
            if (trial_.event_model == EventModelKind::accumulator) bem = bem_from_batch(batch);
            if (stream) stream->insert(stream->end(), events.begin(), events.end());
        }
        has_prev_ = true;
        prev_t_us_ = frame.t_us;
        prev_log_ = std::move(log_now);
        if (out) *out = SensorRecord{std::move(frame), std::move(depth), std::move(batch), bem};
        return bem;
    }

private:
    const TrialConfig& trial_;
    bool record_;
    EventCameraModel accumulator_;
    bool has_prev_ = false;
    std::uint64_t prev_t_us_ = 0;
    std::vector<double> prev_log_;
};

}  // namespace

const char* to_string(PolicyKind p) {
    switch (p) {
        case PolicyKind::expert: return "expert";
        case PolicyKind::learned_joint: return "learned_joint";
        case PolicyKind::learned_independent: return "learned_independent";
        case PolicyKind::learned_no_depth: return "learned_no_depth";
        case PolicyKind::blind: return "blind";
    }
    return "?";
}

PolicyKind policy_from_string(const std::string& s) {
    for (PolicyKind p : {PolicyKind::expert, PolicyKind::learned_joint, PolicyKind::learned_independent,
                         PolicyKind::learned_no_depth, PolicyKind::blind})
        if (s == to_string(p)) return p;
    throw ValidationError("unknown policy: " + s);
}

const char* to_string(EventModelKind m) { return m == EventModelKind::accumulator ? "accumulator" : "difflog"; }

EventModelKind event_model_from_string(const std::string& s) {
    if (s == "accumulator") return EventModelKind::accumulator;
    if (s == "difflog") return EventModelKind::difflog;
    throw ValidationError("unknown event model: " + s);
}

bool is_learned(PolicyKind p) {
    return p == PolicyKind::learned_joint || p == PolicyKind::learned_independent ||
           p == PolicyKind::learned_no_depth;
}

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::reached_goal: return "reached_goal";
        case Outcome::timeout: return "timeout";
        case Outcome::stopped_on_collision: return "stopped_on_collision";
    }
    return "?";
}

void TrialConfig::validate() const {
    if (!(speed_min > 0.0) || !(speed_max >= speed_min)) throw ValidationError("trial: invalid speed range");
    if (!(length > 0.0)) throw ValidationError("trial: length must be positive");
    if (!(timeout >= 0.0)) throw ValidationError("trial: timeout must be >= 0");
    if (!(physics_dt > 0.0) || !(tau > 0.0)) throw ValidationError("trial: physics_dt and tau must be positive");
    camera.validate();
    expert.validate();
    thresholds.validate();
    const double steps = 1.0 / (camera.fps * physics_dt);
    if (std::abs(steps - std::round(steps)) > 1e-6 || std::round(steps) < 1.0)
        throw ValidationError("trial: camera period must be a whole number of physics steps");
}

TrialSetup make_trial(const TrialConfig& trial) {
    trial.validate();
    Rng rng(mix_seed(trial.world_seed, 7));
    TrialSetup setup;
    setup.speed = trial.speed_min == trial.speed_max ? trial.speed_min : rng.uniform(trial.speed_min, trial.speed_max);
    const Bounds& b = trial.world.bounds;
    const double extent = b.y_max - b.y_min;
    setup.start_offset_y = 0.5 * (b.y_min + b.y_max) + rng.uniform(-0.1, 0.1) * extent;

    WorldGenConfig wc = trial.world;
    wc.seed = trial.world_seed;
    wc.bounds.y_min -= setup.start_offset_y;
    wc.bounds.y_max -= setup.start_offset_y;
    // Long trials stretch the forest along x at constant tree density.
    const double needed_x = trial.length + trial.expert.sense_radius;
    if (needed_x > wc.bounds.x_max) {
        const double scale = (needed_x - wc.bounds.x_min) / (wc.bounds.x_max - wc.bounds.x_min);
        wc.n_trees = static_cast<int>(std::lround(wc.n_trees * scale));
        wc.bounds.x_max = needed_x;
    }
    setup.world = generate_world(wc);
    setup.start.position = {0.0, 0.0, trial.altitude};
    setup.start.velocity = {setup.speed, 0.0, 0.0};
    setup.start.t = 0.0;
    return setup;
}

LearnedPilot::LearnedPilot(NetConfig cfg, ModelParams params) : net_(cfg), params_(std::move(params)) {
    params_.validate();
    if (params_.layout != net_.layout()) throw ShapeError("learned pilot: parameters do not match the network");
}

double LearnedPilot::act(const Bem& bem) {
    const int S = net_.config().input_size;
    const Bem input = (bem.width == S && bem.height == S) ? bem : downsample_bem(bem, S, S);
    ForwardResult r = net_.forward(params_, input, state_);
    state_ = std::move(r.state);
    return r.v_y;
}

RolloutRecord rollout(const World& world, const QuadState& start, double speed, const TrialConfig& trial,
                      Pilot* pilot) {
    trial.validate();
    if (!(speed > 0.0)) throw ValidationError("rollout: speed must be positive");
    const CameraConfig& cam = trial.camera;
    const auto steps_per_frame = static_cast<int>(std::lround(1.0 / (cam.fps * trial.physics_dt)));
    const double timeout = trial.timeout > 0.0 ? trial.timeout : 3.0 * trial.length / speed;
    const double goal_x = start.position.x + trial.length;
    const auto replan_every = std::max<long>(1, std::lround(cam.fps / trial.expert.replan_hz));
    const double quad_radius = trial.expert.inflate.quad_radius;

    const bool sensing = (pilot != nullptr && pilot->uses_events()) || trial.record_sensors;
    std::optional<Perception> perception;
    if (sensing) perception.emplace(trial, trial.record_sensors);
    if (pilot) pilot->reset();

    RolloutRecord rec;
    rec.speed = speed;
    QuadState state = start;
    VelocityCommand expert_cmd = decompose_v_y(0.0, speed);
    bool colliding = false;

    for (std::uint64_t i = 0;; ++i) {
        QuadState pose = state;
        pose.t = static_cast<double>(cam.frame_time_us(i)) * 1e-6;

        if (static_cast<long>(i % static_cast<std::uint64_t>(replan_every)) == 0) {
            const ExpertDecision d = expert_waypoint(world, state, trial.expert);
            expert_cmd = command_from_waypoint(state, d.waypoint, speed);
        }

        Bem bem;
        if (sensing) {
            SensorRecord sr;
            bem = perception->observe(world, pose, trial.record_sensors ? &sr : nullptr,
                                      trial.record_sensors ? &rec.event_stream : nullptr);
            if (trial.record_sensors) rec.sensors.push_back(std::move(sr));
        }
        const VelocityCommand cmd = pilot ? decompose_v_y(pilot->act(bem), speed) : expert_cmd;
        rec.frames.push_back({pose.t, state, expert_cmd.v_y_unit, cmd});

        bool stop = false;
        for (int k = 0; k < steps_per_frame && !stop; ++k) {
            state = step_dynamics(state, cmd, trial.physics_dt, trial.tau);
            const bool hit = in_collision(world, state.position.xy(), quad_radius);
            if (hit && !colliding) {
                rec.collisions.push_back({state.t, state.t, state.position.xy()});
                if (trial.stop_at_first_collision) {
                    rec.outcome = Outcome::stopped_on_collision;
                    stop = true;
                }
            }
            if (hit) rec.collisions.back().t_end = state.t;
            colliding = hit;
        }
        if (stop) break;
        if (state.position.x >= goal_x) {
            rec.outcome = Outcome::reached_goal;
            break;
        }
        if (state.t >= timeout) {
            rec.outcome = Outcome::timeout;
            break;
        }
    }
    return rec;
}

RolloutRecord run_trial(const TrialConfig& trial, Pilot* pilot) {
    const TrialSetup setup = make_trial(trial);
    return rollout(setup.world, setup.start, setup.speed, trial, pilot);
}

Metrics aggregate(const std::vector<int>& collision_counts, int timeouts) {
    Metrics m;
    m.trials = static_cast<int>(collision_counts.size());
    m.timeouts = timeouts;
    if (m.trials == 0) return m;
    int c0 = 0, c1 = 0, c2 = 0;
    long total = 0;
    for (int c : collision_counts) {
        c0 += c == 0;
        c1 += c <= 1;
        c2 += c <= 2;
        total += c;
    }
    const auto n = static_cast<double>(m.trials);
    m.success_rate = c0 / n;
    m.rate_le_1 = c1 / n;
    m.rate_le_2 = c2 / n;
    m.mean_collisions = static_cast<double>(total) / n;
    return m;
}

std::vector<EvalRow> evaluate(const EvalConfig& cfg, const NetConfig* net, const ModelParams* params) {
    if (cfg.n_trials < 1) throw ValidationError("evaluate: n_trials must be >= 1");
    if (is_learned(cfg.policy) && (net == nullptr || params == nullptr))
        throw ValidationError("evaluate: learned policies require model parameters");

    auto make_pilot = [&]() -> std::unique_ptr<Pilot> {
        if (is_learned(cfg.policy)) return std::make_unique<LearnedPilot>(*net, *params);
        if (cfg.policy == PolicyKind::blind) return std::make_unique<BlindPilot>();
        return nullptr;
    };

    std::vector<EvalRow> rows;
    for (double length : cfg.lengths) {
        const auto n = static_cast<std::size_t>(cfg.n_trials);
        std::vector<int> counts(n, 0);
        std::vector<char> timed_out(n, 0);
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;

        auto worker = [&]() {
            for (std::size_t k = next++; k < n; k = next++) {
                try {
                    TrialConfig t = cfg.trial;
                    t.world_seed = cfg.base_seed + k;
                    t.policy = cfg.policy;
                    t.length = length;
                    t.record_sensors = false;
                    auto pilot = make_pilot();
                    const RolloutRecord rec = run_trial(t, pilot.get());
                    counts[k] = static_cast<int>(rec.collisions.size());
                    timed_out[k] = rec.outcome == Outcome::timeout;
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        };
        unsigned workers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : std::thread::hardware_concurrency();
        workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(n));
        if (workers == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        if (failure) std::rethrow_exception(failure);

        const int timeouts = static_cast<int>(std::count(timed_out.begin(), timed_out.end(), 1));
        rows.push_back({cfg.label.empty() ? to_string(cfg.policy) : cfg.label, length, aggregate(counts, timeouts)});
    }
    return rows;
}

std::string format_metrics_table(const std::vector<EvalRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(22) << "policy" << std::right << std::setw(8) << "length" << std::setw(8)
        << "trials" << std::setw(10) << "success" << std::setw(8) << "<=1" << std::setw(8) << "<=2" << std::setw(12)
        << "mean_coll" << std::setw(10) << "timeouts" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(22) << r.policy << std::right << std::setw(8) << fixed(r.length, 0)
            << std::setw(8) << r.metrics.trials << std::setw(10) << fixed(r.metrics.success_rate, 3) << std::setw(8)
            << fixed(r.metrics.rate_le_1, 3) << std::setw(8) << fixed(r.metrics.rate_le_2, 3) << std::setw(12)
            << fixed(r.metrics.mean_collisions, 3) << std::setw(10) << r.metrics.timeouts << '\n';
    }
    return out.str();
}

std::string format_metrics_csv(const std::vector<EvalRow>& rows) {
    std::ostringstream out;
    out << "policy,length,trials,success_rate,rate_le_1,rate_le_2,mean_collisions,timeouts\n";
    for (const auto& r : rows) {
        out << r.policy << ',' << fixed(r.length, 1) << ',' << r.metrics.trials << ','
            << fixed(r.metrics.success_rate, 4) << ',' << fixed(r.metrics.rate_le_1, 4) << ','
            << fixed(r.metrics.rate_le_2, 4) << ',' << fixed(r.metrics.mean_collisions, 4) << ','
            << r.metrics.timeouts << '\n';
    }
    return out.str();
}

std::string format_command_log(const RolloutRecord& rec) {
    std::ostringstream out;
    out << "t_s v_y_unit v_x_unit speed px py\n";
    for (const auto& f : rec.frames) {
        out << g17(f.t) << ' ' << g17(f.command.v_y_unit) << ' ' << g17(f.command.v_x_unit) << ' '
            << g17(f.command.speed) << ' ' << g17(f.state.position.x) << ' ' << g17(f.state.position.y) << '\n';
    }
    return out.str();
}

std::vector<CommandRow> parse_command_log(const std::string& text) {
    std::vector<CommandRow> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.rfind("t_s", 0) == 0 || line[0] == '#') continue;
        std::istringstream ls(line);
        CommandRow r{};
        if (!(ls >> r.t_s >> r.v_y_unit >> r.v_x_unit >> r.speed >> r.px >> r.py))
            throw ValidationError("command log: malformed row: " + line);
        rows.push_back(r);
    }
    return rows;
}

std::string manifest_to_text(const Manifest& m) {
    nlohmann::ordered_json j;
    j["format_versions"] = {{"events", "EVS1"}, {"depth", "DPT1"}, {"image", "IMG1"}, {"commands", "text-1"}};
    j["camera"] = {{"width", m.camera.width},
                   {"height", m.camera.height},
                   {"horizontal_fov", m.camera.horizontal_fov},
                   {"fps", m.camera.fps},
                   {"max_depth", m.camera.max_depth}};
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : m.trajectories) {
        arr.push_back({{"index", e.index},
                       {"seed", e.seed},
                       {"speed", e.speed},
                       {"length", e.length},
                       {"frames", e.frames},
                       {"duration_s", e.duration_s},
                       {"dir", e.dir},
                       {"events", e.dir + "/events.evs"},
                       {"commands", e.dir + "/commands.txt"},
                       {"world", e.dir + "/world.json"}});
    }
    j["trajectories"] = arr;
    return j.dump(2) + "\n";
}

Manifest manifest_from_text(const std::string& text) {
    Manifest m;
    try {
        const auto j = nlohmann::json::parse(text);
        const auto& c = j.at("camera");
        m.camera.width = c.at("width").get<int>();
        m.camera.height = c.at("height").get<int>();
        m.camera.horizontal_fov = c.at("horizontal_fov").get<double>();
        m.camera.fps = c.at("fps").get<double>();
        m.camera.max_depth = c.at("max_depth").get<double>();
        for (const auto& e : j.at("trajectories")) {
            ManifestEntry me;
            me.index = e.at("index").get<int>();
            me.seed = e.at("seed").get<std::uint64_t>();
            me.speed = e.at("speed").get<double>();
            me.length = e.at("length").get<double>();
            me.frames = e.at("frames").get<int>();
            me.duration_s = e.at("duration_s").get<double>();
            me.dir = e.at("dir").get<std::string>();
            m.trajectories.push_back(me);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest: ") + e.what());
    }
    m.camera.validate();
    return m;
}

namespace {

TrialConfig collection_trial(const CollectConfig& cfg, std::uint64_t seed) {
    TrialConfig t = cfg.trial;
    t.world_seed = seed;
    t.policy = PolicyKind::expert;
    t.event_model = EventModelKind::accumulator;
    t.record_sensors = true;
    return t;
}

std::vector<std::uint64_t> collection_seeds(const CollectConfig& cfg) {
    if (cfg.n_trajectories < 0) throw ValidationError("collect: n_trajectories must be >= 0");
    if (!cfg.seeds.empty() && cfg.seeds.size() != static_cast<std::size_t>(cfg.n_trajectories))
        throw ValidationError("collect: seed list length must equal n_trajectories");
    std::vector<std::uint64_t> seeds = cfg.seeds;
    if (seeds.empty())
        for (int k = 0; k < cfg.n_trajectories; ++k) seeds.push_back(cfg.base_seed + static_cast<std::uint64_t>(k));
    return seeds;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + p.string() + " for writing");
    f << s;
    if (!f) throw IoError("write failed: " + p.string());
}

std::string read_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

Manifest collect_dataset(const CollectConfig& cfg, const fs::path& out_dir) {
    const std::vector<std::uint64_t> seeds = collection_seeds(cfg);
    Manifest manifest;
    manifest.camera = cfg.trial.camera;

    std::vector<fs::path> created;
    try {
        std::error_code ec;
        if (!fs::exists(out_dir)) {
            created.push_back(out_dir);
            fs::create_directories(out_dir, ec);
            if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
        }
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const TrialConfig trial = collection_trial(cfg, seeds[k]);
            const TrialSetup setup = make_trial(trial);
            const RolloutRecord rec = rollout(setup.world, setup.start, setup.speed, trial, nullptr);

            const std::string dir_name = numbered("traj_", static_cast<int>(k), 4, "");
            const fs::path dir = out_dir / dir_name;
            if (!fs::exists(dir)) created.push_back(dir);
            fs::create_directories(dir / "depth", ec);
            if (!ec && cfg.write_images) fs::create_directories(dir / "image", ec);
            if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

            save_world(setup.world, dir / "world.json");
            save_events(dir / "events.evs", {trial.camera.width, trial.camera.height, rec.event_stream});
            for (std::size_t i = 0; i < rec.sensors.size(); ++i) {
                save_depth(dir / "depth" / numbered("", static_cast<int>(i), 6, ".dpt"), rec.sensors[i].depth);
                if (cfg.write_images)
                    save_image(dir / "image" / numbered("", static_cast<int>(i), 6, ".img"), rec.sensors[i].frame);
            }
            write_text(dir / "commands.txt", format_command_log(rec));

            ManifestEntry e;
            e.index = static_cast<int>(k);
            e.seed = seeds[k];
            e.speed = setup.speed;
            e.length = trial.length;
            e.frames = static_cast<int>(rec.frames.size());
            e.duration_s = rec.frames.empty() ? 0.0 : rec.frames.back().t;
            e.dir = dir_name;
            manifest.trajectories.push_back(e);
        }
        if (!fs::exists(out_dir / "manifest.json")) created.push_back(out_dir / "manifest.json");
        write_text(out_dir / "manifest.json", manifest_to_text(manifest));
    } catch (const std::exception& e) {
        const bool io = dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e);
        if (!io) throw;
        for (const auto& p : created) {
            std::error_code ignore;
            fs::remove_all(p, ignore);
        }
        throw IoError(std::string("collect aborted, partial output removed: ") + e.what());
    }
    return manifest;
}

StoredTrajectory load_stored_trajectory(const fs::path& dir, const Manifest& m, const ManifestEntry& e) {
    (void)m;
    const fs::path base = dir / e.dir;
    StoredTrajectory st;
    st.events = load_events(base / "events.evs");
    for (int i = 0; i < e.frames; ++i) {
        st.depth.push_back(load_depth(base / "depth" / numbered("", i, 6, ".dpt")));
        const fs::path img = base / "image" / numbered("", i, 6, ".img");
        if (fs::exists(img)) st.images.push_back(load_image(img));
    }
    st.commands = parse_command_log(read_text(base / "commands.txt"));
    if (st.commands.size() != static_cast<std::size_t>(e.frames))
        throw ValidationError("dataset: command log length does not match manifest frame count");
    return st;
}

Trajectory training_trajectory(const RolloutRecord& rec, int input_size) {
    if (rec.sensors.size() != rec.frames.size())
        throw ValidationError("training_trajectory: rollout was recorded without sensors");
    Trajectory tr;
    for (std::size_t i = 1; i < rec.sensors.size(); ++i) {
        tr.frames.push_back({downsample_bem(rec.sensors[i].bem, input_size, input_size),
                             downsample_depth(rec.sensors[i].depth, input_size, input_size),
                             rec.frames[i].v_y_label});
    }
    return tr;
}

Trajectory training_trajectory(const StoredTrajectory& st, const CameraConfig& cam, int input_size) {
    Trajectory tr;
    for (std::size_t i = 1; i < st.depth.size(); ++i) {
        const std::uint64_t t_prev = st.depth[i - 1].t_us;
        const std::uint64_t t_now = st.depth[i].t_us;
        const EventBatch batch = batch_events(st.events.events, t_prev + 1, t_now - t_prev, cam.width, cam.height);
        tr.frames.push_back({downsample_bem(bem_from_batch(batch), input_size, input_size),
                             downsample_depth(st.depth[i], input_size, input_size), st.commands[i].v_y_unit});
    }
    return tr;
}

std::vector<Trajectory> load_training_set(const fs::path& dir, int input_size) {
    const Manifest m = manifest_from_text(read_text(dir / "manifest.json"));
    std::vector<Trajectory> out;
    for (const auto& e : m.trajectories)
        out.push_back(training_trajectory(load_stored_trajectory(dir, m, e), m.camera, input_size));
    return out;
}

std::vector<Trajectory> collect_training_set(const CollectConfig& cfg, int input_size) {
    std::vector<Trajectory> out;
    for (std::uint64_t seed : collection_seeds(cfg)) {
        const TrialConfig trial = collection_trial(cfg, seed);
        const TrialSetup setup = make_trial(trial);
        const RolloutRecord rec = rollout(setup.world, setup.start, setup.speed, trial, nullptr);
        out.push_back(training_trajectory(rec, input_size));
    }
    return out;
}

}  // namespace evavoid
