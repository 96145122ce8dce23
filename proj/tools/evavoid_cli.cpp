// evavoid: world generation, dataset collection, training, evaluation and
// event conversion from the command line.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evavoid/formats.hpp"
#include "evavoid/harness.hpp"

namespace fs = std::filesystem;
using namespace evavoid;

namespace {

// "40x50" -> lateral 40 m, forward 50 m.
Bounds parse_area(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ValidationError("--area must look like WIDTHxLENGTH, got " + s);
    double w = 0, l = 0;
    try {
        w = std::stod(s.substr(0, x));
        l = std::stod(s.substr(x + 1));
    } catch (const std::exception&) {
        throw ValidationError("--area must look like WIDTHxLENGTH, got " + s);
    }
    if (!(w > 0) || !(l > 0)) throw ValidationError("--area dimensions must be positive");
    return Bounds{0.0, l, -0.5 * w, 0.5 * w};
}

void write_text_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + p.string() + " for writing");
    f << text;
    if (!f) throw IoError("write failed: " + p.string());
}

struct TrialOptions {
    std::uint64_t seed = 0;
    int trees = 100;
    std::string area = "40x50";
    double speed_min = 3.0;
    double speed_max = 7.0;
    double length = 10.0;
    std::string event_model = "difflog";
    bool stop_at_collision = false;

    void add(CLI::App* app) {
        app->add_option("--seed", seed, "Seed");
        app->add_option("--trees", trees, "Trees per world");
        app->add_option("--area", area, "World extent WIDTHxLENGTH in meters");
        app->add_option("--speed-min", speed_min, "Minimum forward speed (m/s)");
        app->add_option("--speed-max", speed_max, "Maximum forward speed (m/s)");
        app->add_option("--length", length, "Trajectory length (m)");
        app->add_option("--event-model", event_model, "difflog or accumulator");
        app->add_flag("--stop-at-collision", stop_at_collision, "End a trial at its first collision");
    }

    TrialConfig trial() const {
        TrialConfig t;
        t.world_seed = seed;
        t.world.n_trees = trees;
        t.world.bounds = parse_area(area);
        t.speed_min = speed_min;
        t.speed_max = speed_max;
        t.length = length;
        t.event_model = event_model_from_string(event_model);
        t.stop_at_first_collision = stop_at_collision;
        return t;
    }
};

std::vector<Frame> load_frames(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".img") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Frame> frames;
    for (const auto& f : files) frames.push_back(load_image(f));
    return frames;
}

EventFile convert_frames(const std::vector<Frame>& frames, EventModelKind model, const ContrastThresholds& thr) {
    if (frames.empty()) throw ValidationError("events-convert: no frames");
    EventFile out{frames[0].width, frames[0].height, {}};
    EventCameraModel acc(out.width, out.height, thr);
    for (std::size_t i = 1; i < frames.size(); ++i) {
        std::vector<Event> ev;
        if (model == EventModelKind::accumulator) {
            ev = acc.accumulate(frames[i - 1], frames[i]);
        } else {
            const auto counts = events_difflog(thr, frames[i - 1], frames[i]);
            ev = events_from_counts(counts, out.width, out.height, frames[i - 1].t_us, frames[i].t_us);
        }
        out.events.insert(out.events.end(), ev.begin(), ev.end());
    }
    return out;
}

void log_counts(const char* model, std::size_t frames, const EventFile& f) {
    const auto pos = std::count_if(f.events.begin(), f.events.end(), [](const Event& e) { return e.p > 0; });
    std::printf("model=%s frames=%zu events=%zu positive=%zu negative=%zu\n", model, frames, f.events.size(),
                static_cast<std::size_t>(pos), f.events.size() - static_cast<std::size_t>(pos));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-based obstacle avoidance toolkit"};
    app.set_config("--config", "", "Read options from an INI/TOML configuration file");
    app.require_subcommand(1);

    // gen-world
    auto* gen = app.add_subcommand("gen-world", "Generate a random forest world");
    TrialOptions gen_opt;
    std::string gen_out = "world.json";
    gen->add_option("--seed", gen_opt.seed, "World seed");
    gen->add_option("--trees", gen_opt.trees, "Number of trees");
    gen->add_option("--area", gen_opt.area, "Extent WIDTHxLENGTH in meters");
    gen->add_option("-o,--out", gen_out, "Output world file");

    // collect
    auto* collect = app.add_subcommand("collect", "Record expert trajectories to a dataset directory");
    TrialOptions col_opt;
    col_opt.event_model = "accumulator";
    int col_n = 10;
    std::string col_out = "dataset";
    bool col_no_images = false;
    col_opt.add(collect);
    collect->add_option("-n,--trajectories", col_n, "Number of trajectories");
    collect->add_option("-o,--out", col_out, "Output directory");
    collect->add_flag("--no-images", col_no_images, "Skip IMG1 intensity frames");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the depth/velocity network");
    std::uint64_t tr_seed = 0;
    std::string tr_data, tr_out = "model.mdl", tr_mode = "joint";
    int tr_collect = 0;
    NetConfig net_cfg;
    TrainConfig tr_cfg;
    TrialOptions tr_trial;
    train_cmd->add_option("--seed", tr_seed, "Training seed");
    train_cmd->add_option("--data", tr_data, "Dataset directory written by collect");
    train_cmd->add_option("--collect", tr_collect, "Collect this many trajectories in memory instead of --data");
    train_cmd->add_option("-o,--out", tr_out, "Output checkpoint (MDL1)");
    train_cmd->add_option("--mode", tr_mode, "joint, independent or no_depth");
    train_cmd->add_option("--epochs", tr_cfg.epochs, "Epochs");
    train_cmd->add_option("--lr", tr_cfg.learning_rate, "Learning rate");
    train_cmd->add_option("--momentum", tr_cfg.momentum, "Momentum");
    train_cmd->add_option("--batch", tr_cfg.batch_size, "Chunks per update");
    train_cmd->add_option("--chunk", tr_cfg.chunk_length, "Frames per chunk");
    train_cmd->add_option("--w-p", tr_cfg.weights.w_p, "Depth loss weight");
    train_cmd->add_option("--w-v", tr_cfg.weights.w_v, "Velocity loss weight");
    train_cmd->add_option("--noise", tr_cfg.noise_flip_fraction, "Noise bit-flip fraction");
    train_cmd->add_option("--clip", tr_cfg.clip_norm, "Gradient norm clip (0: off)");
    train_cmd->add_option("--input-size", net_cfg.input_size, "Network input resolution");
    train_cmd->add_option("--length", tr_trial.length, "Trajectory length for --collect (m)");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a policy over seeded trials");
    TrialOptions ev_opt;
    std::string ev_policy = "expert", ev_model, ev_csv, ev_label;
    int ev_trials = 100, ev_workers = 0;
    std::vector<double> ev_lengths;
    ev_opt.seed = 1'000'000;
    ev_opt.add(eval);
    eval->add_option("--policy", ev_policy, "expert, blind, learned_joint, learned_independent, learned_no_depth");
    eval->add_option("--model", ev_model, "Checkpoint for learned policies");
    eval->add_option("--trials", ev_trials, "Trials per length");
    eval->add_option("--lengths", ev_lengths, "Additional trajectory lengths (m)");
    eval->add_option("--label", ev_label, "Row label");
    eval->add_option("--csv", ev_csv, "Also write CSV rows to this file");
    eval->add_option("--workers", ev_workers, "Worker threads (0: all cores)");

    // events-convert
    auto* conv = app.add_subcommand("events-convert", "Convert intensity frames to an event stream");
    std::uint64_t cv_seed = 0;
    std::string cv_model = "accumulator", cv_frames, cv_out;
    double cv_length = 2.0;
    bool cv_compare = false;
    ContrastThresholds cv_thr;
    conv->add_option("--seed", cv_seed, "Seed of the rendered flight used when --frames is absent");
    conv->add_option("--model", cv_model, "difflog or accumulator");
    conv->add_option("--frames", cv_frames, "Directory of IMG1 frames (sorted by name)");
    conv->add_option("--length", cv_length, "Flight length to render when --frames is absent (m)");
    conv->add_option("--c-pos", cv_thr.c_pos, "Positive contrast threshold");
    conv->add_option("--c-neg", cv_thr.c_neg, "Negative contrast threshold");
    conv->add_option("-o,--out", cv_out, "Output EVS1 file");
    conv->add_flag("--compare", cv_compare, "Run both models and log both counts");

    // rollout
    auto* roll = app.add_subcommand("rollout", "Fly one trial and write its command log");
    TrialOptions ro_opt;
    std::string ro_policy = "expert", ro_model, ro_log, ro_world;
    ro_opt.add(roll);
    roll->add_option("--policy", ro_policy, "Policy");
    roll->add_option("--model", ro_model, "Checkpoint for learned policies");
    roll->add_option("--log", ro_log, "Command log output");
    roll->add_option("--world-out", ro_world, "Write the trial world here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    try {
        if (*gen) {
            WorldGenConfig wc;
            wc.seed = gen_opt.seed;
            wc.n_trees = gen_opt.trees;
            wc.bounds = parse_area(gen_opt.area);
            const World w = generate_world(wc);
            save_world(w, gen_out);
            std::printf("wrote %s (%zu trees)\n", gen_out.c_str(), w.trees.size());
        } else if (*collect) {
            CollectConfig cc;
            cc.n_trajectories = col_n;
            cc.base_seed = col_opt.seed;
            cc.trial = col_opt.trial();
            cc.write_images = !col_no_images;
            const Manifest m = collect_dataset(cc, col_out);
            std::size_t frames = 0;
            for (const auto& e : m.trajectories) frames += static_cast<std::size_t>(e.frames);
            std::printf("wrote %zu trajectories (%zu frames) to %s\n", m.trajectories.size(), frames, col_out.c_str());
        } else if (*train_cmd) {
            tr_cfg.seed = tr_seed;
            tr_cfg.mode = train_mode_from_string(tr_mode);
            net_cfg.validate();
            std::vector<Trajectory> data;
            if (!tr_data.empty()) {
                data = load_training_set(tr_data, net_cfg.input_size);
            } else if (tr_collect > 0) {
                CollectConfig cc;
                cc.n_trajectories = tr_collect;
                cc.base_seed = tr_seed;
                cc.trial = tr_trial.trial();
                data = collect_training_set(cc, net_cfg.input_size);
            } else {
                throw ValidationError("train: pass --data DIR or --collect N");
            }
            const TrainResult r = train(data, net_cfg, tr_cfg);
            for (const auto& h : r.history)
                std::printf("epoch %d  total %.6f  l_p %.6f  l_v %.6f  max_grad_norm %.4g\n", h.epoch, h.total, h.l_p,
                            h.l_v, h.max_grad_norm);
            save_checkpoint(tr_out, r.params, net_cfg);
            std::printf("wrote %s\n", tr_out.c_str());
        } else if (*eval) {
            EvalConfig ec;
            ec.policy = policy_from_string(ev_policy);
            ec.label = ev_label;
            ec.n_trials = ev_trials;
            ec.base_seed = ev_opt.seed;
            ec.trial = ev_opt.trial();
            ec.workers = ev_workers;
            ec.lengths = {ev_opt.length};
            ec.lengths.insert(ec.lengths.end(), ev_lengths.begin(), ev_lengths.end());
            std::vector<EvalRow> rows;
            if (is_learned(ec.policy)) {
                if (ev_model.empty()) throw ValidationError("eval: learned policies require --model");
                const auto [cfg, params] = load_checkpoint(ev_model);
                rows = evaluate(ec, &cfg, &params);
            } else {
                rows = evaluate(ec);
            }
            std::cout << format_metrics_table(rows);
            if (!ev_csv.empty()) write_text_file(ev_csv, format_metrics_csv(rows));
        } else if (*conv) {
            std::vector<Frame> frames;
            if (!cv_frames.empty()) {
                frames = load_frames(cv_frames);
            } else {
                TrialConfig t;
                t.world_seed = cv_seed;
                t.length = cv_length;
                t.record_sensors = true;
                const RolloutRecord rec = run_trial(t, nullptr);
                for (const auto& s : rec.sensors) frames.push_back(s.frame);
            }
            cv_thr.validate();
            const EventModelKind model = event_model_from_string(cv_model);
            const EventFile f = convert_frames(frames, model, cv_thr);
            log_counts(to_string(model), frames.size(), f);
            if (cv_compare) {
                const EventModelKind other =
                    model == EventModelKind::accumulator ? EventModelKind::difflog : EventModelKind::accumulator;
                log_counts(to_string(other), frames.size(), convert_frames(frames, other, cv_thr));
            }
            if (!cv_out.empty()) save_events(cv_out, f);
        } else if (*roll) {
            const TrialConfig t = [&] {
                TrialConfig tc = ro_opt.trial();
                tc.policy = policy_from_string(ro_policy);
                return tc;
            }();
            std::unique_ptr<Pilot> pilot;
            if (is_learned(t.policy)) {
                if (ro_model.empty()) throw ValidationError("rollout: learned policies require --model");
                auto [cfg, params] = load_checkpoint(ro_model);
                pilot = std::make_unique<LearnedPilot>(cfg, std::move(params));
            } else if (t.policy == PolicyKind::blind) {
                pilot = std::make_unique<BlindPilot>();
            }
            const TrialSetup setup = make_trial(t);
            const RolloutRecord rec = rollout(setup.world, setup.start, setup.speed, t, pilot.get());
            if (!ro_world.empty()) save_world(setup.world, ro_world);
            if (!ro_log.empty()) write_text_file(ro_log, format_command_log(rec));
            std::printf("policy=%s seed=%llu speed=%.3f frames=%zu collisions=%zu outcome=%s\n",
                        to_string(t.policy), static_cast<unsigned long long>(t.world_seed), setup.speed,
                        rec.frames.size(), rec.collisions.size(), to_string(rec.outcome));
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
