// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Tolerances and workload sizes are fixed below.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "evavoid/control.hpp"
#include "evavoid/formats.hpp"
#include "evavoid/harness.hpp"
#include "evavoid/learner.hpp"
#include "test_util.hpp"

using namespace evavoid;
using namespace evavoid::testing;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kOracleBudgetS = 5.0;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetS = 120.0;
constexpr int kGradInputSize = 8;
constexpr double kLabelTolerance = 1e-9;
constexpr double kExpertMinSuccess = 0.95;
constexpr double kExpertBudgetS = 600.0;

// Ablation workload.
constexpr int kAblTrajectories = 100;
constexpr std::uint64_t kAblDataSeed = 500;
constexpr double kAblTrajectoryLength = 20.0;
constexpr int kAblInputSize = 32;
constexpr int kAblEpochs = 4;
constexpr double kAblLearningRate = 2e-3;
constexpr double kAblClipNorm = 20.0;
constexpr std::uint64_t kAblTrainSeed = 3;
constexpr int kAblTrials = 50;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<double> random_log(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-3.0, 0.0);
    return v;
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "evavoid_acceptance" / name;
    fs::remove_all(d);
    fs::create_directories(d.parent_path());
    return d;
}

std::map<std::string, Bytes> snapshot(const fs::path& root) {
    std::map<std::string, Bytes> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
    return out;
}

Verdict event_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    int mismatches = 0;
    std::size_t events = 0;
    for (int trial = 0; trial < 100; ++trial) {
        ContrastThresholds thr;
        thr.c_pos = rng.uniform(0.1, 0.4);
        thr.c_neg = rng.uniform(0.1, 0.4);
        const auto log0 = random_log(rng, 64);
        EventCameraModel m(8, 8, thr);
        m.reset(log0);
        ReferenceAccumulator ref(log0, thr.c_pos, thr.c_neg);
        std::uint64_t t = 0;
        for (int k = 1; k < 10; ++k) {
            const auto next = random_log(rng, 64);
            const std::uint64_t t1 = t + 1 + rng.below(50000);
            auto got = m.accumulate_log(next, t, t1);
            auto want = ref.step(next, 8, t, t1);
            std::sort(got.begin(), got.end());
            std::sort(want.begin(), want.end());
            mismatches += got != want;
            events += got.size();
            t = t1;
        }
    }
    const double s = seconds_since(t0);
    return {mismatches == 0 && s < kOracleBudgetS, std::to_string(mismatches) + " mismatching steps, " +
                                                       std::to_string(events) + " events, " + fmt("%.2f s", s)};
}

Verdict two_frame_agreement() {
    Rng rng(31);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        ContrastThresholds thr;
        thr.c_pos = rng.uniform(0.05, 0.5);
        thr.c_neg = rng.uniform(0.05, 0.5);
        const auto a = random_log(rng, 64), b = random_log(rng, 64);
        EventCameraModel m(8, 8, thr);
        m.reset(a);
        m.accumulate_log(b, 0, 33333);
        const auto d = events_difflog_log(a, b, thr);
        for (int i = 0; i < 64; ++i) mismatches += m.signed_count(i % 8, i / 8) != d[i];
    }

    ContrastThresholds thr;
    thr.c_pos = thr.c_neg = 0.2;
    const std::vector<std::vector<double>> seq{{0.0}, {0.39}, {0.41}};
    EventCameraModel acc(1, 1, thr);
    acc.reset(seq[0]);
    const std::size_t n_acc = acc.accumulate_log(seq[1], 0, 100).size() + acc.accumulate_log(seq[2], 100, 200).size();
    int n_diff = 0;
    for (int k = 0; k < 2; ++k) n_diff += std::abs(events_difflog_log(seq[k], seq[k + 1], thr)[0]);
    return {mismatches == 0 && n_diff == 1 && n_acc == 2,
            std::to_string(mismatches) + " count mismatches; [0, 0.39, 0.41]: difflog " + std::to_string(n_diff) +
                ", accumulator " + std::to_string(n_acc)};
}

Verdict bem_correctness() {
    Rng rng(77);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int w = 1 + static_cast<int>(rng.below(12)), h = 1 + static_cast<int>(rng.below(12));
        EventBatch r{{}, 0, 1000, w, h};
        const int n = static_cast<int>(rng.below(200));
        for (int k = 0; k < n; ++k)
            r.events.push_back({rng.below(1000), static_cast<std::uint16_t>(rng.below(w)),
                                static_cast<std::uint16_t>(rng.below(h)), static_cast<std::int8_t>(rng.below(2) ? 1 : -1)});
        std::sort(r.events.begin(), r.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
        mismatches += !(bem_from_batch(r) == brute_force_bem(r));
    }
    EventBatch cancel{{}, 0, 100, 1, 1};
    for (int k = 0; k < 3; ++k) {
        cancel.events.push_back({static_cast<std::uint64_t>(2 * k), 0, 0, 1});
        cancel.events.push_back({static_cast<std::uint64_t>(2 * k + 1), 0, 0, -1});
    }
    const bool zero = bem_from_batch(cancel).at(0, 0) == 0;
    return {mismatches == 0 && zero,
            std::to_string(mismatches) + " of 1000 batches differ; 3+/3- gives " + (zero ? "0" : "1")};
}

Verdict gradient_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    NetConfig cfg;
    cfg.input_size = kGradInputSize;
    const DepthVelocityNet net(cfg);
    Rng rng(17);
    double worst = 0.0;
    std::size_t checked = 0;
    for (TrainMode mode : {TrainMode::joint, TrainMode::independent, TrainMode::no_depth})
        for (int point = 0; point < 20; ++point) {
            ModelParams p = net.init_params(rng.next_u64());
            perturb(p, rng, 0.05);
            const auto seq = random_sequence(rng, kGradInputSize, 3);
            const GradCheck gc = check_gradient(net, p, seq, mode, {1.0, 10.0}, rng, 4, 100);
            worst = std::max(worst, gc.max_rel_error);
            checked += gc.checked;
        }
    const double s = seconds_since(t0);
    return {worst < kGradTolerance && s < kGradBudgetS,
            "max rel error " + fmt("%.2e", worst) + " over " + std::to_string(checked) + " coordinates, " +
                fmt("%.1f s", s)};
}

Verdict loss_formulas() {
    const double lp = loss_perception(std::vector<double>{3.0}, std::vector<double>{2.0});
    const double lv = loss_velocity(0.5, -0.5);
    NetConfig cfg;
    cfg.input_size = 8;
    const DepthVelocityNet net(cfg);
    Rng rng(4);
    const auto seq = random_sequence(rng, 8, 1);
    const Objective o = net.objective(net.init_params(3), seq, TrainMode::joint, {1.0, 10.0});
    const bool total = o.total == o.l_p + 10.0 * o.l_v;
    return {lp == 0.5 && lv == 1.0 && total,
            "L_p " + fmt("%.17g", lp) + ", L_v " + fmt("%.17g", lv) + ", total identity " + (total ? "exact" : "off")};
}

Verdict expert_geometry() {
    World w;
    w.trees = {{5.0, 0.0, 0.5, 0.5}};
    ExpertConfig cfg;
    cfg.inflate = {0.25, 0.25};  // inflated radius 1.0 m
    QuadState s;
    s.position = {0.0, 0.0, 1.5};
    const auto d = expert_waypoint(w, s, cfg);

    // Point-to-line oracle over the 0.5 m grid, smallest |y| first, +y on ties.
    double oracle = std::nan("");
    for (int k = 0; k <= 10 && std::isnan(oracle); ++k)
        for (int sgn : {+1, -1}) {
            const double y = sgn * 0.5 * k;
            if (point_line_distance({5, 0}, {0, 0}, {10, y}) > 1.0) {
                oracle = y;
                break;
            }
        }
    const double label = command_from_waypoint(s, d.waypoint, 5.0).v_y_unit;
    const double want = 2.5 / std::sqrt(106.25);
    const bool ok = d.waypoint.y == 2.5 && oracle == 2.5 && std::abs(label - want) <= kLabelTolerance;
    return {ok, "waypoint y " + fmt("%.6g", d.waypoint.y) + " (oracle " + fmt("%.6g", oracle) + "), label error " +
                    fmt("%.1e", std::abs(label - want))};
}

Verdict expert_competence() {
    const auto t0 = std::chrono::steady_clock::now();
    EvalConfig ec;
    ec.policy = PolicyKind::expert;
    ec.n_trials = 100;
    ec.lengths = {10.0};
    const auto rows = evaluate(ec);
    const double s = seconds_since(t0);
    const double rate = rows[0].metrics.success_rate;
    return {rate >= kExpertMinSuccess && s < kExpertBudgetS,
            "success " + fmt("%.2f", rate) + " over 100 trials at 10 m, " + fmt("%.0f s", s)};
}

Verdict ablation_ordering() {
    const auto t0 = std::chrono::steady_clock::now();
    CollectConfig cc;
    cc.n_trajectories = kAblTrajectories;
    cc.base_seed = kAblDataSeed;
    cc.trial.length = kAblTrajectoryLength;
    const auto data = collect_training_set(cc, kAblInputSize);

    NetConfig nc;
    nc.input_size = kAblInputSize;
    std::vector<EvalRow> rows;
    std::map<PolicyKind, double> at60;
    for (PolicyKind policy : {PolicyKind::learned_joint, PolicyKind::learned_independent, PolicyKind::learned_no_depth}) {
        TrainConfig tc;
        tc.mode = policy == PolicyKind::learned_joint         ? TrainMode::joint
                  : policy == PolicyKind::learned_independent ? TrainMode::independent
                                                              : TrainMode::no_depth;
        tc.epochs = kAblEpochs;
        tc.learning_rate = kAblLearningRate;
        tc.clip_norm = kAblClipNorm;
        tc.seed = kAblTrainSeed;
        const TrainResult r = train(data, nc, tc);
        EvalConfig ec;
        ec.policy = policy;
        ec.n_trials = kAblTrials;
        ec.lengths = {10.0, 60.0};
        for (const EvalRow& row : evaluate(ec, &nc, &r.params)) {
            rows.push_back(row);
            if (row.length == 60.0) at60[policy] = row.metrics.success_rate;
        }
    }
    bool monotone = true;
    for (const EvalRow& r : rows)
        monotone &= r.metrics.success_rate <= r.metrics.rate_le_1 && r.metrics.rate_le_1 <= r.metrics.rate_le_2;
    const bool ordered = at60[PolicyKind::learned_joint] >= at60[PolicyKind::learned_no_depth];

    std::istringstream table(format_metrics_table(rows));
    for (std::string line; std::getline(table, line);) std::printf("    %s\n", line.c_str());
    std::printf("    reference at 60 m (not asserted): joint 0.60, no_depth 0.15\n");
    return {ordered && monotone, "60 m success joint " + fmt("%.2f", at60[PolicyKind::learned_joint]) +
                                     " vs no_depth " + fmt("%.2f", at60[PolicyKind::learned_no_depth]) +
                                     (monotone ? ", monotone" : ", NOT monotone") + ", " +
                                     fmt("%.0f s", seconds_since(t0))};
}

Verdict collect_determinism() {
    CollectConfig cc;
    cc.n_trajectories = 3;
    cc.base_seed = 900;
    cc.trial.length = 10.0;
    const fs::path a = scratch("collect_a"), b = scratch("collect_b");
    collect_dataset(cc, a);
    collect_dataset(cc, b);
    const auto sa = snapshot(a), sb = snapshot(b);
    std::size_t bytes = 0;
    for (const auto& [name, data] : sa) bytes += data.size();
    fs::remove_all(a);
    fs::remove_all(b);
    return {sa == sb && !sa.empty(),
            std::to_string(sa.size()) + " files, " + std::to_string(bytes) + " bytes, " + (sa == sb ? "identical" : "differ")};
}

Verdict format_round_trip() {
    // Files from a real collect run plus a model checkpoint.
    CollectConfig cc;
    cc.n_trajectories = 1;
    cc.base_seed = 901;
    cc.trial.length = 4.0;
    const fs::path dir = scratch("formats");
    const Manifest m = collect_dataset(cc, dir);
    const fs::path traj = dir / m.trajectories.at(0).dir;

    NetConfig nc;
    nc.input_size = 32;
    Rng rng(6);
    ModelParams params = DepthVelocityNet(nc).init_params(6);
    perturb(params, rng, 0.1);
    save_checkpoint(dir / "model.mdl", params, nc);

    std::vector<std::string> failed;
    auto check = [&](const std::string& tag, const fs::path& p, const std::function<void(const fs::path&)>& rewrite) {
        const fs::path copy = p.string() + ".rt";
        rewrite(copy);
        if (read_file(copy) != read_file(p)) failed.push_back(tag);
    };
    check("EVS1", traj / "events.evs", [&](const fs::path& out) { save_events(out, load_events(traj / "events.evs")); });
    check("DPT1", traj / "depth" / "000010.dpt",
          [&](const fs::path& out) { save_depth(out, load_depth(traj / "depth" / "000010.dpt")); });
    check("IMG1", traj / "image" / "000010.img",
          [&](const fs::path& out) { save_image(out, load_image(traj / "image" / "000010.img")); });
    check("MDL1", dir / "model.mdl", [&](const fs::path& out) {
        const auto [cfg, p] = load_checkpoint(dir / "model.mdl");
        save_checkpoint(out, p, cfg);
    });
    fs::remove_all(dir);
    std::string detail = failed.empty() ? "EVS1 DPT1 IMG1 MDL1 byte-identical" : "differ:";
    for (const auto& f : failed) detail += " " + f;
    return {failed.empty(), detail};
}

Verdict augmentation_contracts() {
    Rng rng(55);
    int violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 8 + static_cast<int>(rng.below(40)), h = 8 + static_cast<int>(rng.below(30));
        const Bem b = random_bem(rng, w, h, rng.uniform(0.05, 0.6));
        const double label = rng.uniform(-1, 1);
        const auto once = augment(b, label, {true, 0.0, 0.0}, 1);
        const auto twice = augment(once.first, once.second, {true, 0.0, 0.0}, 1);
        violations += !(twice.first == b) || twice.second != label || once.second != -label;
        const double rho = rng.uniform(0.0, 0.1);
        const auto noisy = augment(b, label, {false, 0.0, rho}, rng.next_u64());
        violations += hamming(noisy.first, b) != static_cast<std::size_t>(std::llround(rho * w * h));
    }
    return {violations == 0, std::to_string(violations) + " violations over 100 masks"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> only;
    app.add_option("--only", only, "Run only these criteria (1-11)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"event model matches the per-pixel reference", event_oracle},
        {"two-frame difflog agreement and divergence", two_frame_agreement},
        {"BEM matches brute-force counting", bem_correctness},
        {"analytic gradients match finite differences", gradient_fidelity},
        {"loss formulas", loss_formulas},
        {"expert single-tree geometry", expert_geometry},
        {"expert competence at 10 m", expert_competence},
        {"ablation ordering and metric monotonicity", ablation_ordering},
        {"collect determinism", collect_determinism},
        {"format round trip", format_round_trip},
        {"augmentation contracts", augmentation_contracts},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
