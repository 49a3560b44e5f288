// samos: command-line driver for the MOS prediction pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "samos/checkpoint.hpp"
#include "samos/config.hpp"
#include "samos/corpus.hpp"
#include "samos/feature_matrix.hpp"
#include "samos/metrics.hpp"
#include "samos/model.hpp"
#include "samos/synthetic.hpp"
#include "samos/training.hpp"
#include "samos/wav.hpp"

namespace fs = std::filesystem;

namespace {

std::string dir_of(const std::string& path) {
    auto p = fs::path(path).parent_path();
    return p.empty() ? std::string(".") : p.string();
}

samos::RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return samos::parse_run_config(nlohmann::json::object());
    return samos::load_run_config(path);
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, const std::string& init_checkpoint) {
    samos::RunConfig cfg = load_config_or_default(config_path);
    std::uint64_t hash = samos::run_config_hash(cfg);

    auto utterances = samos::load_ratings(data_path);
    auto vocab = samos::ListenerVocabulary::from_utterances(utterances);

    samos::ModelConfig mc{cfg.extractor, cfg.predictor, vocab.size()};
    samos::SamosModel model(mc);

    samos::FeatureCache cache;
    samos::TrainingData data = samos::prepare_training_data(utterances, vocab, cfg.mean_only,
                                                            model, cache, dir_of(data_path));

    samos::TrainOptions opts = cfg.training;
    opts.config_hash = hash;

    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "train_log.csv");
    log << "epoch,stage,train_loss,dev_srcc\n";

    samos::TrainingRunResult run;
    if (!init_checkpoint.empty()) {
        samos::Checkpoint start = samos::load_checkpoint(init_checkpoint);
        run = samos::finetune_ood(model, start, data, cfg.loss, cfg.stages, opts, &log);
    } else {
        run = samos::run_training(model, data, cfg.loss, cfg.stages, opts, &log);
    }

    std::string ckpt_path = (fs::path(out_dir) / "final.smck").string();
    samos::save_checkpoint(ckpt_path, run.final);
    std::cerr << "wrote " << ckpt_path << "\n";
    return 0;
}

int cmd_predict(const std::string& config_path, const std::string& checkpoint_path,
                const std::string& data_path, const std::string& out_path,
                const std::string& split_name, bool clamp) {
    samos::RunConfig cfg = load_config_or_default(config_path);
    samos::Checkpoint ck = samos::load_checkpoint(checkpoint_path);
    std::uint64_t hash = samos::run_config_hash(cfg);
    if (ck.config_hash != 0 && ck.config_hash != hash)
        throw samos::ConfigError("checkpoint was trained with a different config (hash mismatch)");

    auto it = ck.tensors.find("listener.embed");
    if (it == ck.tensors.end())
        throw samos::ValidationError("checkpoint missing listener.embed tensor");
    samos::ModelConfig mc{cfg.extractor, cfg.predictor, it->second.rows};
    samos::SamosModel model(mc);
    ck.load_into(model.params());

    auto utterances = samos::load_ratings(data_path);
    samos::Split split = samos::parse_split(split_name, 0);
    auto selected = samos::filter_split(utterances, split);
    if (selected.empty()) throw samos::InputError("no utterances in split '" + split_name + "'");

    samos::ScoreTable table;
    std::string base = dir_of(data_path);
    for (const auto& u : selected) {
        auto wav = samos::read_wav(samos::join_path(base, u.wav_path));
        // Inference always uses the mean-listener ID.
        samos::PredictorOutput out = model.infer_waveform(wav, 0);
        double s = out.s;
        if (clamp || cfg.clamp_scores) s = std::clamp(s, 1.0, 5.0);
        table.push_back({u.utterance_id, u.system_id, s, u.mean_score});
    }
    samos::write_score_table(out_path, table);
    return 0;
}

int cmd_evaluate(const std::string& scores_path, const std::string& level_name,
                 const std::string& tau_name, const std::string& out_path) {
    samos::ScoreTable table = samos::read_score_table(scores_path);
    samos::MetricLevel level;
    if (level_name == "system") level = samos::MetricLevel::system;
    else if (level_name == "utterance") level = samos::MetricLevel::utterance;
    else throw samos::ConfigError("--level must be 'system' or 'utterance'");
    samos::TauVariant variant =
        tau_name == "tau_a" ? samos::TauVariant::tau_a : samos::TauVariant::tau_b;

    samos::MetricReport rep = samos::evaluate_report(table, level, variant);
    std::cout << samos::format_report(rep);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        const char* prefix = level == samos::MetricLevel::system ? "S_" : "U_";
        out.precision(17);
        out << prefix << "MSE=" << rep.mse << "\n"
            << prefix << "LCC=" << rep.lcc << "\n"
            << prefix << "SRCC=" << rep.srcc << "\n"
            << prefix << "KTAU=" << rep.ktau << "\n"
            << "n=" << rep.n << "\n";
    }
    return 0;
}

int cmd_average(const std::vector<std::string>& inputs, const std::string& out_path) {
    std::vector<samos::Checkpoint> cks;
    for (const auto& p : inputs) cks.push_back(samos::load_checkpoint(p));
    samos::save_checkpoint(out_path, samos::average_checkpoints(cks));
    return 0;
}

int cmd_extract(const std::string& config_path, const std::string& wav_path,
                const std::string& kind, const std::string& out_path) {
    samos::RunConfig cfg = load_config_or_default(config_path);
    samos::ModelConfig mc{cfg.extractor, cfg.predictor, 1};
    samos::SamosModel model(mc);
    auto wav = samos::read_wav(wav_path);
    samos::FeatureMatrix m;
    if (kind == "semantic") m = model.extract_semantic(wav);
    else if (kind == "acoustic") m = model.extract_acoustic(wav);
    else throw samos::ConfigError("--kind must be 'semantic' or 'acoustic'");
    samos::write_feature_file(out_path, m);
    return 0;
}

int cmd_make_synthetic(int systems, int utts, int listeners, int wav_samples, std::uint64_t seed,
                       const std::string& out_dir) {
    samos::SyntheticConfig cfg;
    cfg.systems = systems;
    cfg.utts_per_system = utts;
    cfg.listeners = listeners;
    cfg.wav_samples = wav_samples;
    cfg.seed = seed;
    std::string csv = samos::make_synthetic(cfg, out_dir);
    std::cerr << "wrote " << csv << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SAMOS MOS prediction toolkit"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, checkpoint_path, wav_path;
    std::string kind = "semantic", level = "system", split = "test", tau = "tau_b";
    std::string init_checkpoint;
    bool clamp = false;
    std::vector<std::string> avg_inputs;
    int systems = 20, utts = 30, listeners = 8, wav_samples = 1600;
    std::uint64_t seed = 0;

    auto* train = app.add_subcommand("train", "run the three-stage training schedule");
    train->add_option("--config", config_path, "JSON run config (defaults if omitted)");
    train->add_option("--data", data_path, "ratings CSV")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--init-checkpoint", init_checkpoint,
                      "start from this checkpoint (OOD fine-tuning)");

    auto* predict = app.add_subcommand("predict", "score a split with the mean-listener ID");
    predict->add_option("--config", config_path, "JSON run config used at training time");
    predict->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    predict->add_option("--data", data_path, "ratings CSV")->required();
    predict->add_option("--out", out_path, "output scores CSV")->required();
    predict->add_option("--split", split, "train|dev|test (default test)");
    predict->add_flag("--clamp", clamp, "clamp scores to [1,5]");

    auto* evaluate = app.add_subcommand("evaluate", "metric report from a score table");
    evaluate->add_option("--scores", data_path, "scores CSV")->required();
    evaluate->add_option("--level", level, "system|utterance (default system)");
    evaluate->add_option("--tau-variant", tau, "tau_b|tau_a (default tau_b)");
    evaluate->add_option("--out", out_path, "also write machine-readable key=value file");

    auto* average = app.add_subcommand("average-checkpoints", "parameter-average checkpoints");
    average->add_option("inputs", avg_inputs, "checkpoint files")->required()->expected(-1);
    average->add_option("--out", out_path, "output checkpoint")->required();

    auto* extract = app.add_subcommand("extract-features", "write a feature file from a wav");
    extract->add_option("--config", config_path, "JSON run config");
    extract->add_option("--wav", wav_path, "input wav")->required();
    extract->add_option("--kind", kind, "semantic|acoustic")->required();
    extract->add_option("--out", out_path, "output .smft file")->required();

    auto* make_syn = app.add_subcommand("make-synthetic", "emit a synthetic rated corpus");
    make_syn->add_option("--systems", systems, "number of systems");
    make_syn->add_option("--utts-per-system", utts, "utterances per system");
    make_syn->add_option("--listeners", listeners, "listeners per utterance");
    make_syn->add_option("--wav-samples", wav_samples, "samples per utterance");
    make_syn->add_option("--seed", seed, "corpus seed");
    make_syn->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 prints help to stdout for -h; usage errors go to stderr.
        int code = app.exit(e, std::cout, std::cerr);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, data_path, out_path, init_checkpoint);
        if (predict->parsed())
            return cmd_predict(config_path, checkpoint_path, data_path, out_path, split, clamp);
        if (evaluate->parsed()) return cmd_evaluate(data_path, level, tau, out_path);
        if (average->parsed()) return cmd_average(avg_inputs, out_path);
        if (extract->parsed()) return cmd_extract(config_path, wav_path, kind, out_path);
        if (make_syn->parsed())
            return cmd_make_synthetic(systems, utts, listeners, wav_samples, seed, out_path);
    } catch (const samos::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
