// Command-line front end for the tabletop world-action-model stack:
// data generation, two-stage training, closed-loop evaluation and reports.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "wam/harness/config.hpp"
#include "wam/harness/policy.hpp"
#include "wam/harness/report.hpp"
#include "wam/harness/train.hpp"
#include "wam/sim/sim.hpp"
#include "wam/wm/world_model.hpp"

namespace fs = std::filesystem;
using namespace wam;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
};

harness::Config load_config(const CommonOpts& opts) {
    if (opts.config_path.empty()) return harness::Config{};
    return harness::Config::load(opts.config_path);
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "flat key = value config file");
    cmd->add_option("--seed", opts.seed, "master seed")->capture_default_str();
    cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"world-action-model tabletop harness"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* gen = app.add_subcommand("gen-data", "generate scripted-expert demonstrations");
    add_common(gen, opts);

    auto* label = app.add_subcommand("label", "re-label a dataset's gate field into a new file");
    add_common(label, opts);
    std::string label_src;
    label->add_option("--data", label_src, "source dataset file")->required();

    auto* train_wm = app.add_subcommand("train-wm", "stage 1: autoencoder + flow world model");
    add_common(train_wm, opts);

    auto* train_ex = app.add_subcommand("train-experts",
                                        "stage 2: experts + gate against the frozen world model");
    add_common(train_ex, opts);

    auto* eval = app.add_subcommand("eval", "closed-loop policy evaluation");
    add_common(eval, opts);
    std::string policy_str = "harmowam";
    std::string scenario_str = "ID";
    int episodes = -1;
    int denoise = -1;
    eval->add_option("--policy", policy_str, "policy kind")->capture_default_str();
    eval->add_option("--scenario", scenario_str, "scenario kind")->capture_default_str();
    eval->add_option("--episodes", episodes, "episodes per task (default from config)");
    eval->add_option("--denoise-steps", denoise, "world-model sampler steps (default from config)");

    auto* ablate = app.add_subcommand("ablate-steps", "denoising-step sweep");
    add_common(ablate, opts);

    auto* report = app.add_subcommand("report", "re-emit a rows CSV sorted and validated");
    add_common(report, opts);
    std::string report_src;
    report->add_option("--data", report_src, "rows CSV to re-emit")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        harness::Config cfg = load_config(opts);
        fs::path out(opts.out_dir);

        if (gen->parsed()) {
            harness::gen_data(cfg, opts.seed, out);
            std::cout << "wrote " << (out / "dataset.txt") << " and manifest" << std::endl;
        } else if (label->parsed()) {
            fs::create_directories(out);
            fs::path dst = out / "dataset_labeled.txt";
            harness::label_dataset(label_src, dst, cfg);
            std::cout << "wrote " << dst << std::endl;
        } else if (train_wm->parsed()) {
            auto data = harness::DatasetView::load(out / "dataset.txt", cfg.held_out_fraction);
            auto res = harness::train_stage1(data, cfg, opts.seed, out);
            std::cout << "stage 1 done: recon_mae=" << res.recon_mae
                      << " flow_held " << res.flow_loss_init << " -> " << res.flow_loss_final
                      << std::endl;
        } else if (train_ex->parsed()) {
            auto data = harness::DatasetView::load(out / "dataset.txt", cfg.held_out_fraction);
            auto res = harness::train_stage2(data, out / "wm.ckpt", cfg, opts.seed, out);
            std::cout << "stage 2 done: gate_accuracy=" << res.gate_accuracy
                      << " pred " << res.pred_init << " -> " << res.pred_final
                      << " react " << res.react_init << " -> " << res.react_final
                      << std::endl;
        } else if (eval->parsed()) {
            harness::System sys = harness::load_system(out, cfg);
            harness::PolicyKind kind = harness::parse_policy(policy_str);
            sim::ScenarioKind scen = sim::parse_scenario_kind(scenario_str);
            int eps = episodes > 0 ? episodes : cfg.eval_episodes;
            std::vector<harness::EvalRow> rows;
            std::map<std::string, harness::PolicyTiming> timing;
            for (int task_id = 0; task_id < cfg.tasks; ++task_id) {
                auto res = harness::run_policy(
                    sys, cfg, kind, scen, sim::make_task(task_id), eps,
                    harness::derive_seed(opts.seed, "eval/" + std::to_string(task_id)),
                    denoise);
                rows.insert(rows.end(), res.rows.begin(), res.rows.end());
                auto& t = timing[harness::policy_name(kind)];
                t.rollouts += res.timing.rollouts;
                t.rollout_seconds += res.timing.rollout_seconds;
                t.actions += res.timing.actions;
                t.wall_seconds += res.timing.wall_seconds;
                t.episodes += res.timing.episodes;
                if (cfg.dump_rollouts) {
                    sim::TaskSpec task = sim::make_task(task_id);
                    sim::ScenarioConfig sc = sim::make_scenario(scen, 0);
                    sim::SimState st = sim::spawn_state(sc, task, 0);
                    auto roll = wm::rollout(sys.world, sim::render(st, sc), task, cfg.horizon,
                                            denoise > 0 ? denoise : cfg.denoise_steps, 0);
                    wm::dump_rollout(out / ("rollout_task" + std::to_string(task_id) + ".txt"),
                                     roll, task, sc);
                }
            }
            harness::emit_report(rows, out / "report.csv");
            harness::write_timing_csv(timing, out / "timing.csv");
            for (const auto& r : rows) {
                std::cout << r.policy << " " << r.scenario << " task=" << r.task
                          << " stage=" << r.stage << " " << r.successes << "/" << r.episodes
                          << std::endl;
            }
        } else if (ablate->parsed()) {
            harness::System sys = harness::load_system(out, cfg);
            auto rows = harness::ablate_denoising(sys, cfg, {3, 5, 10, 50}, opts.seed);
            harness::write_ablation_csv(rows, out / "ablation.csv");
            for (const auto& r : rows) {
                std::cout << "steps=" << r.steps << " success=" << r.success_rate
                          << " rollouts/s=" << r.rollouts_per_second << std::endl;
            }
        } else if (report->parsed()) {
            fs::create_directories(out);
            auto rows = harness::read_report_rows(report_src);
            harness::emit_report(rows, out / "report.csv");
            std::cout << "wrote " << (out / "report.csv") << std::endl;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
