#include "wam/harness/config.hpp"

#include <fstream>
#include <sstream>

#include "wam/core/errors.hpp"
#include "wam/core/rng.hpp"

namespace wam::harness {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw core::ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
}

} // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw core::ConfigError("config line " + std::to_string(line_no) +
                                    ": expected key = value");
        }
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        try {
            if (key == "horizon") cfg.horizon = std::stoi(val);
            else if (key == "denoise_steps") cfg.denoise_steps = std::stoi(val);
            else if (key == "diffusion_steps") cfg.diffusion_steps = std::stoi(val);
            else if (key == "gate_window") cfg.gate_window = std::stoi(val);
            else if (key == "gate_per_frame") cfg.gate_per_frame = parse_bool(val, key);
            else if (key == "lambda_react") cfg.weights.lambda_react = std::stod(val);
            else if (key == "lambda_gate") cfg.weights.lambda_gate = std::stod(val);
            else if (key == "episodes_per_task") cfg.episodes_per_task = std::stoi(val);
            else if (key == "tasks") cfg.tasks = std::stoi(val);
            else if (key == "ae_pretrain_steps") cfg.ae_pretrain_steps = std::stoi(val);
            else if (key == "ae_finetune_steps") cfg.ae_finetune_steps = std::stoi(val);
            else if (key == "flow_steps") cfg.flow_steps = std::stoi(val);
            else if (key == "stage2_steps") cfg.stage2_steps = std::stoi(val);
            else if (key == "batch_size") cfg.batch_size = std::stoi(val);
            else if (key == "lr") cfg.lr = std::stod(val);
            else if (key == "lr_stage2") cfg.lr_stage2 = std::stod(val);
            else if (key == "held_out_fraction") cfg.held_out_fraction = std::stod(val);
            else if (key == "react_train_on_predicted")
                cfg.react_train_on_predicted = parse_bool(val, key);
            else if (key == "reroll_per_chunk") cfg.reroll_per_chunk = parse_bool(val, key);
            else if (key == "eval_episodes") cfg.eval_episodes = std::stoi(val);
            else if (key == "step_cap") cfg.step_cap = std::stoi(val);
            else if (key == "transit_radius") cfg.transit_radius = std::stod(val);
            else if (key == "ablate_episodes") cfg.ablate_episodes = std::stoi(val);
            else if (key == "dump_rollouts") cfg.dump_rollouts = parse_bool(val, key);
            else throw core::ConfigError("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw core::ConfigError("config key " + key + ": bad value '" + val + "'");
        }
    }
    if (cfg.weights.lambda_react < 0.0 || cfg.weights.lambda_gate < 0.0) {
        throw core::ConfigError("loss weights must be non-negative");
    }
    if (cfg.horizon < 1 || cfg.horizon > 8) {
        throw core::ConfigError("horizon must be in [1, 8]");
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw core::ConfigError("cannot read config: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse(text);
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) {
    std::uint64_t s = base ^ core::fnv1a64(tag);
    return core::splitmix64(s);
}

} // namespace wam::harness
