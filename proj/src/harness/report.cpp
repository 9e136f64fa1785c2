#include "wam/harness/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wam/core/errors.hpp"
#include "wam/sim/sim.hpp"

namespace wam::harness {

void emit_report(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
    if (rows.empty()) throw core::ContractError("emit_report: no rows");
    std::vector<EvalRow> sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const EvalRow& a, const EvalRow& b) {
        if (a.policy != b.policy) return a.policy < b.policy;
        if (a.scenario != b.scenario) return a.scenario < b.scenario;
        if (a.task != b.task) return a.task < b.task;
        return a.stage < b.stage;
    });
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw core::IoError("cannot write report: " + path.string());
    f << "policy,scenario,task,stage,successes,episodes,rate\n";
    for (const EvalRow& r : sorted) {
        char rate[16];
        double v = r.episodes > 0 ? static_cast<double>(r.successes) / r.episodes : 0.0;
        std::snprintf(rate, sizeof rate, "%.4f", v);
        f << r.policy << ',' << r.scenario << ',' << r.task << ',' << r.stage << ','
          << r.successes << ',' << r.episodes << ',' << rate << '\n';
    }
    if (!f) throw core::IoError("short write on report: " + path.string());
}

std::vector<EvalRow> read_report_rows(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw core::IoError("cannot read report: " + path.string());
    std::vector<EvalRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("policy,", 0) == 0) continue;
        }
        std::istringstream is(line);
        EvalRow r;
        std::string field;
        std::getline(is, r.policy, ',');
        std::getline(is, r.scenario, ',');
        std::getline(is, field, ',');
        r.task = std::stoi(field);
        std::getline(is, field, ',');
        r.stage = std::stoi(field);
        std::getline(is, field, ',');
        r.successes = std::stoi(field);
        std::getline(is, field, ',');
        r.episodes = std::stoi(field);
        rows.push_back(r);
    }
    return rows;
}

void write_timing_csv(const std::map<std::string, PolicyTiming>& timing,
                      const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw core::IoError("cannot write timing: " + path.string());
    f << "policy,episodes,rollouts,mean_rollout_seconds,actions_per_second\n";
    for (const auto& [name, t] : timing) {
        double mean_roll = t.rollouts > 0 ? t.rollout_seconds / t.rollouts : 0.0;
        double aps = t.wall_seconds > 0.0 ? static_cast<double>(t.actions) / t.wall_seconds : 0.0;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f,%.2f", mean_roll, aps);
        f << name << ',' << t.episodes << ',' << t.rollouts << ',' << buf << '\n';
    }
}

std::vector<AblationRow> ablate_denoising(const System& sys, const Config& cfg,
                                          const std::vector<int>& steps_list,
                                          std::uint64_t seed) {
    std::vector<AblationRow> out;
    for (int steps : steps_list) {
        AblationRow row;
        row.steps = steps;
        int successes = 0, episodes = 0;
        double roll_seconds = 0.0;
        int rolls = 0;
        for (int task_id = 0; task_id < cfg.tasks; ++task_id) {
            // same seed across step counts: identical episode batteries
            RunResult r = run_policy(sys, cfg, PolicyKind::Harmowam, sim::ScenarioKind::ID,
                                     sim::make_task(task_id), cfg.ablate_episodes,
                                     derive_seed(seed, "ablate/" + std::to_string(task_id)),
                                     steps);
            successes += r.full_successes;
            episodes += r.episodes;
            roll_seconds += r.timing.rollout_seconds;
            rolls += r.timing.rollouts;
        }
        row.success_rate = episodes ? static_cast<double>(successes) / episodes : 0.0;
        row.rollouts_per_second = roll_seconds > 0.0 ? rolls / roll_seconds : 0.0;
        out.push_back(row);
    }
    return out;
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw core::IoError("cannot write ablation table: " + path.string());
    f << "steps,success_rate,rollouts_per_second\n";
    for (const AblationRow& r : rows) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d,%.4f,%.2f", r.steps, r.success_rate,
                      r.rollouts_per_second);
        f << buf << '\n';
    }
}

} // namespace wam::harness
