#include "wam/sim/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "wam/core/errors.hpp"

namespace wam::sim {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

double parse_double(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw core::IoError("bad float: " + s);
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t next = s.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

std::string state_str(const SimState& st) {
    std::ostringstream os;
    os << "e:" << format_double(st.effector.x) << "," << format_double(st.effector.y);
    os << ";g:" << st.gripper;
    os << ";o:";
    for (std::size_t i = 0; i < st.objects.size(); ++i) {
        const ObjectState& obj = st.objects[i];
        if (i) os << "|";
        os << format_double(obj.pos.x) << "," << format_double(obj.pos.y) << ","
           << obj.shape << "," << obj.color << "," << (obj.held ? 1 : 0);
    }
    os << ";z:";
    for (std::size_t i = 0; i < st.zones.size(); ++i) {
        const ZoneSpec& z = st.zones[i];
        if (i) os << "|";
        os << format_double(z.center.x) << "," << format_double(z.center.y) << ","
           << format_double(z.radius);
    }
    return os.str();
}

SimState parse_state(const std::string& s) {
    SimState st;
    for (const std::string& group : split(s, ';')) {
        if (group.rfind("e:", 0) == 0) {
            auto parts = split(group.substr(2), ',');
            if (parts.size() != 2) throw core::IoError("bad effector group: " + group);
            st.effector = {parse_double(parts[0]), parse_double(parts[1])};
        } else if (group.rfind("g:", 0) == 0) {
            st.gripper = std::stoi(group.substr(2));
        } else if (group.rfind("o:", 0) == 0) {
            std::string body = group.substr(2);
            if (body.empty()) continue;
            for (const std::string& item : split(body, '|')) {
                auto parts = split(item, ',');
                if (parts.size() != 5) throw core::IoError("bad object group: " + item);
                ObjectState obj;
                obj.pos = {parse_double(parts[0]), parse_double(parts[1])};
                obj.shape = std::stoi(parts[2]);
                obj.color = std::stoi(parts[3]);
                obj.held = parts[4] == "1";
                st.objects.push_back(obj);
            }
        } else if (group.rfind("z:", 0) == 0) {
            std::string body = group.substr(2);
            if (body.empty()) continue;
            for (const std::string& item : split(body, '|')) {
                auto parts = split(item, ',');
                if (parts.size() != 3) throw core::IoError("bad zone group: " + item);
                ZoneSpec z;
                z.center = {parse_double(parts[0]), parse_double(parts[1])};
                z.radius = parse_double(parts[2]);
                st.zones.push_back(z);
            }
        } else {
            throw core::IoError("unknown state group: " + group);
        }
    }
    return st;
}

} // namespace

std::string record_line(const Record& r) {
    std::ostringstream os;
    os << "episode=" << r.episode << " t=" << r.t;
    os << " state=" << state_str(r.state);
    os << " action=" << format_double(r.action.dx) << "," << format_double(r.action.dy)
       << "," << format_double(r.action.g_cmd);
    os << " task_id=" << r.task_id;
    os << " scenario=" << scenario_kind_name(r.kind) << "," << r.scenario_seed;
    if (r.gate >= 0) os << " gate=" << r.gate;
    return os.str();
}

Record parse_record_line(const std::string& line) {
    Record r;
    bool saw_state = false, saw_action = false;
    for (const std::string& field : split(line, ' ')) {
        if (field.empty()) continue;
        std::size_t eq = field.find('=');
        if (eq == std::string::npos) throw core::IoError("bad field: " + field);
        std::string key = field.substr(0, eq);
        std::string val = field.substr(eq + 1);
        if (key == "episode") r.episode = std::stoi(val);
        else if (key == "t") r.t = std::stoi(val);
        else if (key == "state") { r.state = parse_state(val); saw_state = true; }
        else if (key == "action") {
            auto parts = split(val, ',');
            if (parts.size() != 3) throw core::IoError("bad action: " + val);
            r.action = {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])};
            saw_action = true;
        } else if (key == "task_id") r.task_id = std::stoi(val);
        else if (key == "scenario") {
            auto parts = split(val, ',');
            if (parts.size() != 2) throw core::IoError("bad scenario: " + val);
            r.kind = parse_scenario_kind(parts[0]);
            r.scenario_seed = std::stoull(parts[1]);
        } else if (key == "gate") r.gate = std::stoi(val);
        else throw core::IoError("unknown record field: " + key);
    }
    if (!saw_state || !saw_action) throw core::IoError("record missing state/action: " + line);
    return r;
}

void write_dataset(const std::filesystem::path& path, const std::vector<Record>& records) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw core::IoError("cannot write dataset: " + path.string());
    for (const Record& r : records) {
        f << record_line(r) << '\n';
    }
    if (!f) throw core::IoError("short write on dataset: " + path.string());
}

std::vector<Record> read_dataset(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw core::IoError("cannot read dataset: " + path.string());
    std::vector<Record> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(parse_record_line(line));
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw core::IoError("cannot write manifest: " + path.string());
    f << "episodes=" << manifest.episodes.size() << '\n';
    for (const ManifestEpisode& e : manifest.episodes) {
        f << "episode=" << e.episode << " task_id=" << e.task_id
          << " scenario=" << scenario_kind_name(e.kind)
          << " scenario_seed=" << e.scenario_seed
          << " episode_seed=" << e.episode_seed
          << " steps=" << e.steps
          << " success=" << (e.success ? 1 : 0) << '\n';
    }
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw core::IoError("cannot read manifest: " + path.string());
    Manifest m;
    std::string line;
    std::size_t declared = 0;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (first) {
            if (line.rfind("episodes=", 0) != 0) throw core::IoError("manifest missing episode count");
            declared = std::stoul(line.substr(9));
            first = false;
            continue;
        }
        ManifestEpisode e;
        for (const std::string& field : split(line, ' ')) {
            std::size_t eq = field.find('=');
            if (eq == std::string::npos) continue;
            std::string key = field.substr(0, eq), val = field.substr(eq + 1);
            if (key == "episode") e.episode = std::stoi(val);
            else if (key == "task_id") e.task_id = std::stoi(val);
            else if (key == "scenario") e.kind = parse_scenario_kind(val);
            else if (key == "scenario_seed") e.scenario_seed = std::stoull(val);
            else if (key == "episode_seed") e.episode_seed = std::stoull(val);
            else if (key == "steps") e.steps = std::stoi(val);
            else if (key == "success") e.success = val == "1";
        }
        m.episodes.push_back(e);
    }
    if (m.episodes.size() != declared) {
        throw core::IoError("manifest episode count mismatch in " + path.string());
    }
    return m;
}

} // namespace wam::sim
