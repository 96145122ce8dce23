#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "evavoid/harness.hpp"
#include "test_util.hpp"

using namespace evavoid;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "evavoid_harness_test" / name;
    fs::remove_all(d);
    fs::create_directories(d.parent_path());
    return d;
}

// Sorted relative path -> file bytes for a directory tree.
std::map<std::string, Bytes> snapshot(const fs::path& root) {
    std::map<std::string, Bytes> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
    return out;
}

TrialConfig small_trial(std::uint64_t seed, double length = 6.0) {
    TrialConfig t;
    t.world_seed = seed;
    t.length = length;
    t.camera.width = 64;
    t.camera.height = 48;
    return t;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("trial setup: speed range, central start offset, origin start") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        TrialConfig t;
        t.world_seed = seed;
        const TrialSetup s = make_trial(t);
        CHECK(s.speed >= 3.0);
        CHECK(s.speed <= 7.0);
        CHECK(std::abs(s.start_offset_y) <= 0.1 * 40.0);
        CHECK(s.start.position == Vec3{0.0, 0.0, 1.5});
        CHECK(s.start.velocity.x == s.speed);
        CHECK(s.world.bounds.y_min == doctest::Approx(-20.0 - s.start_offset_y));
        CHECK(s.world.trees.size() == 100);
        CHECK_FALSE(in_collision(s.world, {0, 0}, 0.25));
    }
    TrialConfig a;
    a.world_seed = 4;
    CHECK(make_trial(a).world == make_trial(a).world);
    a.length = 60.0;
    const TrialSetup longer = make_trial(a);
    CHECK(longer.world.bounds.x_max == doctest::Approx(70.0));
    CHECK(longer.world.trees.size() == 140);
    TrialConfig bad;
    bad.speed_min = 5.0;
    bad.speed_max = 4.0;
    CHECK_THROWS_AS(make_trial(bad), ValidationError);
}

TEST_CASE("empty world: every policy flies straight to the goal") {
    TrialConfig t = small_trial(1);
    t.world.n_trees = 0;
    BlindPilot blind;
    NetConfig nc;
    nc.input_size = 16;
    const DepthVelocityNet net(nc);
    LearnedPilot learned(nc, net.init_params(1));
    for (Pilot* p : std::initializer_list<Pilot*>{nullptr, &blind}) {
        const auto rec = run_trial(t, p);
        CHECK(rec.outcome == Outcome::reached_goal);
        CHECK(rec.collisions.empty());
        for (const auto& f : rec.frames) CHECK(f.state.position.y == 0.0);
    }
    const auto rec = run_trial(t, &learned);
    CHECK(rec.outcome == Outcome::reached_goal);
    CHECK(rec.collisions.empty());
}

TEST_CASE("rollout cadence, monotone time and piecewise-constant expert commands") {
    TrialConfig t = small_trial(12, 10.0);
    const auto rec = run_trial(t, nullptr);
    REQUIRE(rec.frames.size() > 10);
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
        CHECK(std::abs(rec.frames[i].t - static_cast<double>(i) / 30.0) <= 1e-6);
        if (i > 0) {
            CHECK(rec.frames[i].t > rec.frames[i - 1].t);
            if (i % 6 != 0) CHECK(rec.frames[i].command.v_y_unit == rec.frames[i - 1].command.v_y_unit);
        }
        CHECK(rec.frames[i].state.velocity.z == 0.0);
    }
    CHECK(rec.frames.back().state.position.x < 10.0 + rec.speed / 30.0);
    CHECK(rec.sensors.empty());
}

TEST_CASE("collision intervals are counted once each; optional early stop") {
    World w;
    w.trees = {{3.0, 0.0, 0.4, 0.5}, {6.0, 0.0, 0.4, 0.5}};
    TrialConfig t = small_trial(0, 8.0);
    QuadState start;
    start.velocity = {4.0, 0.0, 0.0};
    BlindPilot blind;
    const auto rec = rollout(w, start, 4.0, t, &blind);
    CHECK(rec.collisions.size() == 2);
    CHECK(rec.outcome == Outcome::reached_goal);
    for (const auto& c : rec.collisions) {
        CHECK(c.t_end > c.t_start);
        // Passing through a 0.65 m half-width at 4 m/s takes about 0.33 s.
        CHECK(c.t_end - c.t_start == doctest::Approx(1.3 / 4.0).epsilon(0.1));
    }
    t.stop_at_first_collision = true;
    const auto stopped = rollout(w, start, 4.0, t, &blind);
    CHECK(stopped.collisions.size() == 1);
    CHECK(stopped.outcome == Outcome::stopped_on_collision);
}

TEST_CASE("timeout ends a stalled flight") {
    World w;
    TrialConfig t = small_trial(0, 10.0);
    t.timeout = 0.5;
    QuadState start;
    struct Sideways final : Pilot {
        double act(const Bem&) override { return 1.0; }
    } side;
    const auto rec = rollout(w, start, 3.0, t, &side);
    CHECK(rec.outcome == Outcome::timeout);
    CHECK(rec.frames.back().t <= 0.5 + 1e-9);
}

TEST_CASE("recorded sensors: BEM of the recorded batch, frame 0 empty") {
    TrialConfig t = small_trial(8);
    t.record_sensors = true;
    t.event_model = EventModelKind::accumulator;
    const auto rec = run_trial(t, nullptr);
    REQUIRE(rec.sensors.size() == rec.frames.size());
    CHECK(rec.sensors[0].bem.popcount() == 0);
    CHECK(std::is_sorted(rec.event_stream.begin(), rec.event_stream.end()));
    std::size_t total = 0;
    for (std::size_t i = 1; i < rec.sensors.size(); ++i) {
        const auto& s = rec.sensors[i];
        CHECK(bem_from_batch(s.batch) == s.bem);
        CHECK(s.batch.t_start == rec.sensors[i - 1].frame.t_us + 1);
        total += s.batch.events.size();
    }
    CHECK(total == rec.event_stream.size());
    CHECK(total > 0);

    t.event_model = EventModelKind::difflog;
    const auto dl = run_trial(t, nullptr);
    for (std::size_t i = 1; i < dl.sensors.size(); ++i) CHECK(bem_from_batch(dl.sensors[i].batch) == dl.sensors[i].bem);
}

TEST_CASE("metrics aggregation") {
    const Metrics all = aggregate({0, 0, 0, 0});
    CHECK(all.success_rate == 1.0);
    CHECK(all.rate_le_1 == 1.0);
    CHECK(all.rate_le_2 == 1.0);
    CHECK(all.mean_collisions == 0.0);

    const Metrics m = aggregate({0, 1, 2, 3, 0, 5}, 1);
    CHECK(m.trials == 6);
    CHECK(m.success_rate == 2.0 / 6);
    CHECK(m.rate_le_1 == 3.0 / 6);
    CHECK(m.rate_le_2 == 4.0 / 6);
    CHECK(m.mean_collisions == doctest::Approx(11.0 / 6));
    CHECK(m.timeouts == 1);
}

TEST_CASE("evaluation: expert beats blind, bookkeeping exact, worker count irrelevant") {
    EvalConfig ec;
    ec.n_trials = 30;
    ec.trial.world.n_trees = 200;
    ec.workers = 1;
    const auto expert = evaluate(ec);
    ec.policy = PolicyKind::blind;
    const auto blind = evaluate(ec);
    CHECK(blind[0].metrics.success_rate < expert[0].metrics.success_rate);
    for (const auto& r : {expert[0], blind[0]}) {
        CHECK(r.metrics.success_rate <= r.metrics.rate_le_1);
        CHECK(r.metrics.rate_le_1 <= r.metrics.rate_le_2);
        CHECK(r.metrics.rate_le_2 <= 1.0);
    }
    // Reconstruct the rate from per-trial counts.
    int zero = 0;
    for (int k = 0; k < ec.n_trials; ++k) {
        TrialConfig t = ec.trial;
        t.world_seed = ec.base_seed + static_cast<std::uint64_t>(k);
        t.policy = PolicyKind::blind;
        BlindPilot p;
        zero += run_trial(t, &p).collisions.empty();
    }
    CHECK(blind[0].metrics.success_rate == static_cast<double>(zero) / ec.n_trials);

    ec.workers = 3;
    const auto threaded = evaluate(ec);
    CHECK(threaded[0].metrics.success_rate == blind[0].metrics.success_rate);
    CHECK(threaded[0].metrics.mean_collisions == blind[0].metrics.mean_collisions);

    ec.policy = PolicyKind::learned_joint;
    CHECK_THROWS_AS(evaluate(ec), ValidationError);
    ec.n_trials = 0;
    CHECK_THROWS_AS(evaluate(ec), ValidationError);
}

TEST_CASE("metrics table and CSV") {
    const std::vector<EvalRow> rows{{"expert", 10.0, aggregate({0, 1})}, {"blind", 60.0, aggregate({2, 3})}};
    const std::string table = format_metrics_table(rows);
    CHECK(table.find("expert") != std::string::npos);
    CHECK(table.find("0.500") != std::string::npos);
    const std::string csv = format_metrics_csv(rows);
    CHECK(csv.rfind("policy,length,trials,success_rate,rate_le_1,rate_le_2,mean_collisions,timeouts\n", 0) == 0);
    CHECK(csv.find("blind,60.0,2,0.0000,0.0000,0.5000,2.5000,0") != std::string::npos);
}

TEST_CASE("command log round trip") {
    const auto rec = run_trial(small_trial(3), nullptr);
    const auto rows = parse_command_log(format_command_log(rec));
    REQUIRE(rows.size() == rec.frames.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].t_s == rec.frames[i].t);
        CHECK(rows[i].v_y_unit == rec.frames[i].command.v_y_unit);
        CHECK(rows[i].px == rec.frames[i].state.position.x);
    }
    CHECK_THROWS_AS(parse_command_log("t_s v_y_unit\n0.1 nope\n"), ValidationError);
}

TEST_CASE("collect: empty manifest, determinism, cadence, round trip") {
    CollectConfig cc;
    cc.trial = small_trial(0, 5.0);
    const fs::path empty = fresh_dir("empty");
    const Manifest m0 = collect_dataset(cc, empty);
    CHECK(m0.trajectories.empty());
    CHECK(manifest_from_text(manifest_to_text(m0)).trajectories.empty());

    cc.n_trajectories = 2;
    cc.seeds = {42, 43};
    const fs::path a = fresh_dir("a"), b = fresh_dir("b");
    const Manifest ma = collect_dataset(cc, a);
    collect_dataset(cc, b);
    CHECK(snapshot(a) == snapshot(b));

    const Manifest back = manifest_from_text(manifest_to_text(ma));
    CHECK(back.trajectories == ma.trajectories);
    for (const auto& e : ma.trajectories) {
        CHECK(std::abs(e.frames - (e.duration_s * cc.trial.camera.fps + 1)) <= 1.0);
        CHECK(e.speed >= 3.0);
        const auto st = load_stored_trajectory(a, ma, e);
        CHECK(st.depth.size() == static_cast<std::size_t>(e.frames));
        CHECK(st.images.size() == static_cast<std::size_t>(e.frames));
    }

    // Disk path and in-memory path produce identical training samples.
    const auto disk = load_training_set(a, 16);
    const auto mem = collect_training_set(cc, 16);
    REQUIRE(disk.size() == mem.size());
    for (std::size_t k = 0; k < disk.size(); ++k) {
        REQUIRE(disk[k].frames.size() == mem[k].frames.size());
        for (std::size_t i = 0; i < disk[k].frames.size(); ++i) {
            CHECK(disk[k].frames[i].bem == mem[k].frames[i].bem);
            CHECK(disk[k].frames[i].v_y == mem[k].frames[i].v_y);
            CHECK(disk[k].frames[i].depth_gt == mem[k].frames[i].depth_gt);
        }
    }
    cc.seeds = {1};
    CHECK_THROWS_AS(collect_dataset(cc, fresh_dir("bad")), ValidationError);
}

TEST_CASE("collect: I/O failure removes what it created and keeps foreign files") {
    CollectConfig cc;
    cc.trial = small_trial(0, 3.0);
    cc.n_trajectories = 2;
    const fs::path d = fresh_dir("fail");
    fs::create_directories(d);
    { std::ofstream(d / "traj_0001") << "occupied"; }
    CHECK_THROWS_AS(collect_dataset(cc, d), IoError);
    CHECK_FALSE(fs::exists(d / "traj_0000"));
    CHECK_FALSE(fs::exists(d / "manifest.json"));
    CHECK(fs::exists(d / "traj_0001"));
}

}
