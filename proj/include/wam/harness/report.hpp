#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wam/harness/policy.hpp"

namespace wam::harness {

/// CSV with header policy,scenario,task,stage,successes,episodes,rate; rate
/// printed with four decimals, rows sorted by (policy, scenario, task,
/// stage), UTF-8 with LF endings. Re-emitting identical rows is
/// byte-identical.
void emit_report(const std::vector<EvalRow>& rows, const std::filesystem::path& path);

std::vector<EvalRow> read_report_rows(const std::filesystem::path& path);

void write_timing_csv(const std::map<std::string, PolicyTiming>& timing,
                      const std::filesystem::path& path);

struct AblationRow {
    int steps = 0;
    double success_rate = 0.0;
    double rollouts_per_second = 0.0;
};

/// Runs the gated policy over a fixed seeded episode battery per sampler step
/// count and reports task success plus rollout throughput.
std::vector<AblationRow> ablate_denoising(const System& sys, const Config& cfg,
                                          const std::vector<int>& steps_list,
                                          std::uint64_t seed);

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path);

} // namespace wam::harness
