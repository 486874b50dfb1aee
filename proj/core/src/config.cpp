#include "mlcl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mlcl {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
    return x;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    const double x = parse_double(key, v);
    if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x)))
        throw ConfigError("config: expected a non-negative integer for " + key + ": '" + v + "'");
    return static_cast<std::size_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: expected a boolean for " + key + ": '" + v + "'");
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config: malformed section header at line " +
                                  std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            if (section != "data" && section != "train" && section != "loss" &&
                section != "eval")
                throw ConfigError("config: unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key=value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;

        if (section == "data") {
            if (key == "n_train") cfg.data.n_train = parse_size(full, value);
            else if (key == "n_val") cfg.data.n_val = parse_size(full, value);
            else if (key == "n_test") cfg.data.n_test = parse_size(full, value);
            else if (key == "feature_dim") cfg.data.feature_dim = parse_size(full, value);
            else if (key == "num_labels") cfg.data.num_labels = parse_size(full, value);
            else if (key == "zipf_exponent") cfg.data.zipf_exponent = parse_double(full, value);
            else if (key == "mean_labels") cfg.data.mean_labels = parse_double(full, value);
            else if (key == "noise_scale") cfg.data.noise_scale = parse_double(full, value);
            else if (key == "cooccur_concentration")
                cfg.data.cooccur_concentration = parse_double(full, value);
            else if (key == "seed") cfg.data.seed = parse_size(full, value);
            else if (key == "path") cfg.data_path = value;
            else throw ConfigError("config: unknown key " + full);
        } else if (section == "train") {
            if (key == "epochs") cfg.train.epochs = parse_size(full, value);
            else if (key == "batch_size") cfg.train.batch_size = parse_size(full, value);
            else if (key == "lr") cfg.train.lr = parse_double(full, value);
            else if (key == "weight_decay") cfg.train.weight_decay = parse_double(full, value);
            else if (key == "warmup_fraction")
                cfg.train.warmup_fraction = parse_double(full, value);
            else if (key == "scheduler") {
                if (value == "linear") cfg.train.scheduler = SchedulerKind::Linear;
                else if (value == "cosine") cfg.train.scheduler = SchedulerKind::Cosine;
                else throw ConfigError("config: unknown scheduler '" + value + "'");
            } else if (key == "clip_norm") cfg.train.clip_norm = parse_double(full, value);
            else if (key == "seed") cfg.train.seed = parse_size(full, value);
            else if (key == "loss") {
                try {
                    cfg.train.loss = loss_kind_from_string(value);
                } catch (const std::exception& e) {
                    throw ConfigError(std::string("config: ") + e.what());
                }
            } else if (key == "queue_capacity")
                cfg.train.queue_capacity = parse_size(full, value);
            else if (key == "momentum") cfg.train.momentum = parse_double(full, value);
            else if (key == "hidden_dim") cfg.train.hidden_dim = parse_size(full, value);
            else if (key == "num_hidden_layers")
                cfg.train.num_hidden_layers = parse_size(full, value);
            else if (key == "embed_dim") cfg.train.embed_dim = parse_size(full, value);
            else if (key == "select") {
                if (value == "last") cfg.train.select = CheckpointSelect::Last;
                else if (value == "best_val_f1") cfg.train.select = CheckpointSelect::BestValF1;
                else throw ConfigError("config: unknown select '" + value + "'");
            } else throw ConfigError("config: unknown key " + full);
        } else if (section == "loss") {
            if (key == "tau") cfg.train.loss_cfg.tau = parse_double(full, value);
            else if (key == "beta") cfg.train.loss_cfg.beta = parse_double(full, value);
            else if (key == "use_queue") cfg.train.loss_cfg.use_queue = parse_bool(full, value);
            else if (key == "use_prototypes")
                cfg.train.loss_cfg.use_prototypes = parse_bool(full, value);
            else if (key == "balanced") cfg.train.loss_cfg.balanced = parse_bool(full, value);
            else if (key == "gamma") cfg.train.loss_cfg.gamma = parse_double(full, value);
            else if (key == "gamma_pos") cfg.train.loss_cfg.gamma_pos = parse_double(full, value);
            else if (key == "gamma_neg") cfg.train.loss_cfg.gamma_neg = parse_double(full, value);
            else if (key == "margin") cfg.train.loss_cfg.margin = parse_double(full, value);
            else throw ConfigError("config: unknown key " + full);
        } else if (section == "eval") {
            if (key == "epochs") cfg.eval.epochs = parse_size(full, value);
            else if (key == "num_seeds") cfg.eval.num_seeds = parse_size(full, value);
            else if (key == "batch_size") cfg.eval.batch_size = parse_size(full, value);
            else if (key == "seed") cfg.eval.seed = parse_size(full, value);
            else if (key == "grid") {
                if (value == "paper") cfg.eval.use_full_grid();
                else if (value != "desk")
                    throw ConfigError("config: unknown grid '" + value + "'");
            } else throw ConfigError("config: unknown key " + full);
        } else {
            throw ConfigError("config: key outside any section: " + key);
        }
    }
    cfg.train.eval_cfg = cfg.eval;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    return parse_config(in);
}

void apply_env_overrides(ExperimentConfig& cfg) {
    if (const char* s = std::getenv("MLCL_SEED")) {
        const std::string v(s);
        cfg.data.seed = parse_size("MLCL_SEED", v);
        cfg.train.seed = cfg.data.seed;
    }
}

}  // namespace mlcl
