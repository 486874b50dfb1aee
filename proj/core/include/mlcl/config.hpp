#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "mlcl/data.hpp"
#include "mlcl/eval.hpp"
#include "mlcl/train.hpp"

namespace mlcl {

/// Everything an experiment run needs, assembled from an INI-style file.
struct ExperimentConfig {
    GeneratorConfig data;
    std::string data_path;  // non-empty => load JSONL instead of generating
    TrainConfig train;
    LinearEvalConfig eval;
};

/// Raised on malformed lines and on unknown section/key pairs; the message
/// names the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Applies the MLCL_SEED environment variable (when set) on top of the
/// parsed config: it overrides both the data and training seeds.
void apply_env_overrides(ExperimentConfig& cfg);

}  // namespace mlcl
