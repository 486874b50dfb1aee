// mlcl: experiment driver for the contrastive multi-label library.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 divergence
// during training.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mlcl/config.hpp"
#include "mlcl/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

mlcl::ExperimentConfig read_config(const std::string& path, const std::string& profile) {
    mlcl::ExperimentConfig cfg =
        path.empty() ? mlcl::ExperimentConfig{} : mlcl::load_config(path);
    if (profile == "paper-grid") {
        cfg.eval.use_full_grid();
        cfg.train.eval_cfg = cfg.eval;
    } else if (profile != "desk") {
        throw mlcl::ConfigError("unknown profile '" + profile + "' (desk|paper-grid)");
    }
    mlcl::apply_env_overrides(cfg);
    return cfg;
}

mlcl::DatasetSplits load_or_generate(const mlcl::ExperimentConfig& cfg) {
    if (cfg.data_path.empty()) return mlcl::generate_longtail_dataset(cfg.data);
    mlcl::DatasetSplits splits;
    splits.train = mlcl::load_dataset((fs::path(cfg.data_path) / "train.jsonl").string());
    splits.val = mlcl::load_dataset((fs::path(cfg.data_path) / "val.jsonl").string());
    splits.test = mlcl::load_dataset((fs::path(cfg.data_path) / "test.jsonl").string());
    const std::size_t num_labels =
        std::max({splits.train.num_labels(), splits.val.num_labels(), splits.test.num_labels()});
    splits.train.recount_frequencies(num_labels);
    splits.val.recount_frequencies(num_labels);
    splits.test.recount_frequencies(num_labels);
    splits.train.split = "train";
    splits.val.split = "val";
    splits.test.split = "test";
    return splits;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        seeds.push_back(std::stoull(tok));
    }
    if (seeds.empty()) throw mlcl::ConfigError("--seeds: empty seed list");
    return seeds;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

json metrics_json(const mlcl::MetricsRecord& m) {
    return {{"micro_f1", m.micro_f1}, {"macro_f1", m.macro_f1}, {"hamming", m.hamming}};
}

std::string epoch_log_csv(const std::vector<mlcl::EpochRecord>& log) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "epoch,train_loss,val_loss,val_micro_f1,lr\n";
    for (const mlcl::EpochRecord& r : log)
        out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_micro_f1
            << ',' << r.lr << "\n";
    return out.str();
}

bool is_supervised(mlcl::LossKind kind) {
    return kind == mlcl::LossKind::Bce || kind == mlcl::LossKind::Focal ||
           kind == mlcl::LossKind::Asymmetric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-label contrastive learning experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", profile = "desk";
    std::string checkpoint_path, seeds_arg = "1,2,3", variants_arg = "base,bqueue,bqproto,msc";
    std::size_t instances = 20;
    double tol = 1e-5;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic long-tailed dataset");
    gen->add_option("--config", config_path, "INI config file");
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "train one model and save checkpoints");
    train->add_option("--config", config_path, "INI config file");
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--profile", profile, "desk|paper-grid");

    auto* lineval = app.add_subcommand("linear-eval", "linear probe on a saved checkpoint");
    lineval->add_option("--config", config_path, "INI config file");
    lineval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    lineval->add_option("--out", out_dir, "output directory");
    lineval->add_option("--profile", profile, "desk|paper-grid");

    auto* gradcheck = app.add_subcommand("grad-check", "finite-difference gradient audit");
    gradcheck->add_option("--instances", instances, "random instances per loss");
    gradcheck->add_option("--tol", tol, "max relative error");

    auto* repr = app.add_subcommand("repr-analysis", "clustering sweep + attraction/repulsion");
    repr->add_option("--config", config_path, "INI config file");
    repr->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    repr->add_option("--out", out_dir, "output directory")->required();

    auto* ablation = app.add_subcommand("ablation", "loss ladder across seeds");
    ablation->add_option("--config", config_path, "INI config file");
    ablation->add_option("--out", out_dir, "output directory");
    ablation->add_option("--seeds", seeds_arg, "comma-separated seeds");
    ablation->add_option("--variants", variants_arg, "comma-separated variant names");
    ablation->add_option("--profile", profile, "desk|paper-grid");

    auto* collapse = app.add_subcommand("collapse-demo", "per-label loss collapse demonstration");
    collapse->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const mlcl::ExperimentConfig cfg = read_config(config_path, profile);
            const mlcl::DatasetSplits splits = mlcl::generate_longtail_dataset(cfg.data);
            fs::create_directories(out_dir);
            mlcl::save_dataset(splits.train, (fs::path(out_dir) / "train.jsonl").string());
            mlcl::save_dataset(splits.val, (fs::path(out_dir) / "val.jsonl").string());
            mlcl::save_dataset(splits.test, (fs::path(out_dir) / "test.jsonl").string());
            std::cout << "wrote " << splits.train.size() << "/" << splits.val.size() << "/"
                      << splits.test.size() << " examples to " << out_dir << "\n";
        } else if (train->parsed()) {
            const mlcl::ExperimentConfig cfg = read_config(config_path, profile);
            const mlcl::DatasetSplits splits = load_or_generate(cfg);
            const mlcl::TrainResult result = is_supervised(cfg.train.loss)
                                                 ? mlcl::train_supervised(splits, cfg.train)
                                                 : mlcl::train_contrastive(splits, cfg.train);
            fs::create_directories(out_dir);
            mlcl::save_checkpoint((fs::path(out_dir) / "selected.ckpt").string(),
                                  mlcl::state_to_tensors(result.selected));
            mlcl::save_checkpoint((fs::path(out_dir) / "last.ckpt").string(),
                                  mlcl::state_to_tensors(result.last));
            write_file(fs::path(out_dir) / "train_log.csv", epoch_log_csv(result.log));
            std::cout << "trained " << mlcl::to_string(cfg.train.loss) << " for "
                      << cfg.train.epochs << " epochs; final train loss "
                      << std::setprecision(17) << result.log.back().train_loss << "\n";
        } else if (lineval->parsed()) {
            const mlcl::ExperimentConfig cfg = read_config(config_path, profile);
            const mlcl::DatasetSplits splits = load_or_generate(cfg);
            const mlcl::TrainedState state =
                mlcl::state_from_tensors(mlcl::load_checkpoint(checkpoint_path));
            const mlcl::DenseMatrix train_repr =
                mlcl::backbone_representations(state.encoder, splits.train.features);
            const mlcl::DenseMatrix val_repr =
                mlcl::backbone_representations(state.encoder, splits.val.features);
            const mlcl::DenseMatrix test_repr =
                mlcl::backbone_representations(state.encoder, splits.test.features);
            const mlcl::LinearEvalResult r = mlcl::linear_evaluation(
                train_repr, splits.train.labels, val_repr, splits.val.labels, test_repr,
                splits.test.labels, cfg.eval);
            json j{{"test", metrics_json(r.test)},
                   {"val", metrics_json(r.val)},
                   {"untrainable_labels", r.untrainable_labels}};
            const std::string text = j.dump(2) + "\n";
            std::cout << text;
            if (!out_dir.empty()) write_file(fs::path(out_dir) / "linear_eval.json", text);
        } else if (gradcheck->parsed()) {
            const auto rows = mlcl::run_grad_checks(instances, tol);
            std::cout << mlcl::grad_check_table(rows);
            for (const auto& r : rows)
                if (!r.pass) return 1;
        } else if (repr->parsed()) {
            const mlcl::ExperimentConfig cfg = read_config(config_path, profile);
            const mlcl::DatasetSplits splits = load_or_generate(cfg);
            const mlcl::TrainedState state =
                mlcl::state_from_tensors(mlcl::load_checkpoint(checkpoint_path));
            const mlcl::DenseMatrix emb =
                mlcl::projected_embeddings(state.encoder, splits.test.features);
            const mlcl::ReprAnalysis r = mlcl::run_repr_analysis(
                emb, splits.test.labels, {0.1, 0.25, 0.5, 0.75, 1.0});
            write_file(fs::path(out_dir) / "clustering_sweep.csv", r.csv);
            json j{{"class", r.attrep_class},
                   {"class_size", r.attrep.in_class.size()},
                   {"bound", r.attrep.bound},
                   {"actual", r.attrep.actual}};
            write_file(fs::path(out_dir) / "attraction_repulsion.json", j.dump(2) + "\n");
            std::cout << r.csv;
            std::cout << "attraction/repulsion bound " << std::setprecision(17) << r.attrep.bound
                      << " <= actual " << r.attrep.actual << "\n";
        } else if (ablation->parsed()) {
            const mlcl::ExperimentConfig cfg = read_config(config_path, profile);
            const mlcl::DatasetSplits splits = load_or_generate(cfg);
            std::vector<std::string> variants;
            {
                std::stringstream ss(variants_arg);
                std::string tok;
                while (std::getline(ss, tok, ','))
                    if (!tok.empty()) variants.push_back(tok);
            }
            const mlcl::AblationResult result =
                mlcl::run_ablation(splits, cfg.train, variants, parse_seed_list(seeds_arg));
            const std::string table = mlcl::ablation_table(result);
            std::cout << table;
            if (!out_dir.empty()) {
                std::ostringstream csv;
                csv << std::setprecision(17);
                csv << "variant,seed,micro_f1,macro_f1,hamming\n";
                for (const auto& row : result.rows)
                    for (const auto& run : row.runs)
                        csv << run.variant << ',' << run.seed << ',' << run.test.micro_f1 << ','
                            << run.test.macro_f1 << ',' << run.test.hamming << "\n";
                write_file(fs::path(out_dir) / "ablation.csv", csv.str());
                write_file(fs::path(out_dir) / "ablation.txt", table);
            }
        } else if (collapse->parsed()) {
            const mlcl::CollapseDemoResult r =
                mlcl::run_collapse_demo(40, 4, 8, 5000, 0.5, 0.5, 3);
            std::cout << std::setprecision(17) << "steps " << r.steps << ", final loss "
                      << r.final_loss << "\n"
                      << "max within-label variance " << r.max_within_variance << "\n"
                      << "centroid cosines in [" << r.min_offdiag_cosine << ", "
                      << r.max_offdiag_cosine << "] (target -1/3)\n";
            if (!out_dir.empty()) {
                json j{{"steps", r.steps},
                       {"final_loss", r.final_loss},
                       {"max_within_variance", r.max_within_variance},
                       {"min_offdiag_cosine", r.min_offdiag_cosine},
                       {"max_offdiag_cosine", r.max_offdiag_cosine}};
                write_file(fs::path(out_dir) / "collapse.json", j.dump(2) + "\n");
            }
        }
    } catch (const mlcl::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        std::cerr << "error: " << what << "\n";
        return what.rfind("diverged", 0) == 0 ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
