#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wam/sim/types.hpp"

namespace wam::sim {

/// One timestep of a demonstration. `gate` is -1 until a labeling pass ran.
struct Record {
    int episode = 0;
    int t = 0;
    SimState state;
    Action action;
    int task_id = 0;
    ScenarioKind kind = ScenarioKind::ID;
    std::uint64_t scenario_seed = 0;
    int gate = -1;
};

struct ManifestEpisode {
    int episode = 0;
    int task_id = 0;
    ScenarioKind kind = ScenarioKind::ID;
    std::uint64_t scenario_seed = 0;
    std::uint64_t episode_seed = 0;
    int steps = 0;
    bool success = false;
};

struct Manifest {
    std::vector<ManifestEpisode> episodes;
};

/// Line-delimited UTF-8 records, one timestep per line, self-describing
/// key=value fields: episode, t, state, action, task_id, scenario and the
/// optional gate label. Doubles print with %.17g so rereads are exact.
void write_dataset(const std::filesystem::path& path, const std::vector<Record>& records);
std::vector<Record> read_dataset(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

std::string format_double(double v);
std::string record_line(const Record& r);
Record parse_record_line(const std::string& line);

} // namespace wam::sim
