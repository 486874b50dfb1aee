#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <string>

#include "mlcl/config.hpp"

using namespace mlcl;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

}  // namespace

TEST_CASE("a full config parses into the right fields") {
    const ExperimentConfig cfg = parse(R"(
# comment
[data]
n_train = 100   ; inline comment
num_labels = 7
zipf_exponent = 1.5

[train]
epochs = 5
scheduler = linear
loss = base
select = last

[loss]
tau = 0.2
balanced = false

[eval]
num_seeds = 2
grid = paper
)");
    CHECK(cfg.data.n_train == 100);
    CHECK(cfg.data.num_labels == 7);
    CHECK(cfg.data.zipf_exponent == doctest::Approx(1.5));
    CHECK(cfg.train.epochs == 5);
    CHECK(cfg.train.scheduler == SchedulerKind::Linear);
    CHECK(cfg.train.loss == LossKind::Base);
    CHECK(cfg.train.select == CheckpointSelect::Last);
    CHECK(cfg.train.loss_cfg.tau == doctest::Approx(0.2));
    CHECK(!cfg.train.loss_cfg.balanced);
    CHECK(cfg.eval.num_seeds == 2);
    CHECK(cfg.eval.learning_rates.size() == 3);  // paper grid
    // the training copy of the eval config tracks the [eval] section
    CHECK(cfg.train.eval_cfg.num_seeds == 2);
}

TEST_CASE("defaults survive an empty config") {
    const ExperimentConfig cfg = parse("");
    CHECK(cfg.data.n_train == 2000);
    CHECK(cfg.train.batch_size == 32);
    CHECK(cfg.train.loss == LossKind::Msc);
    CHECK(cfg.train.loss_cfg.beta == doctest::Approx(0.1));
}

TEST_CASE("unknown keys are rejected by name") {
    try {
        parse("[train]\nnot_a_key = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("train.not_a_key") != std::string::npos);
    }
}

TEST_CASE("unknown sections, bad values, and stray keys are rejected") {
    CHECK_THROWS_AS(parse("[nope]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("orphan = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[train]\nepochs = banana\n"), ConfigError);
    CHECK_THROWS_AS(parse("[train]\nepochs = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[loss]\nbalanced = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse("[train]\nscheduler = step\n"), ConfigError);
    CHECK_THROWS_AS(parse("[train]\nno_equals_sign\n"), ConfigError);
    CHECK_THROWS_AS(parse("[eval]\ngrid = huge\n"), ConfigError);
}

TEST_CASE("MLCL_SEED overrides both seeds") {
    ExperimentConfig cfg = parse("[data]\nseed = 5\n[train]\nseed = 6\n");
    setenv("MLCL_SEED", "99", 1);
    apply_env_overrides(cfg);
    unsetenv("MLCL_SEED");
    CHECK(cfg.data.seed == 99);
    CHECK(cfg.train.seed == 99);

    ExperimentConfig untouched = parse("[data]\nseed = 5\n");
    apply_env_overrides(untouched);
    CHECK(untouched.data.seed == 5);
}

TEST_CASE("missing file is a config error") {
    CHECK_THROWS_AS(load_config("/tmp/definitely_missing.ini"), ConfigError);
}
