#pragma once

#include <array>
#include <fstream>
#include <string>

#include <json.hpp>

#include "samos/common.hpp"
#include "samos/losses.hpp"
#include "samos/metrics.hpp"
#include "samos/model.hpp"
#include "samos/training.hpp"

namespace samos {

// Single JSON configuration for the whole pipeline. Every default matches
// the published training setup, so an empty config file reproduces it.
struct RunConfig {
    bool mean_only = false;
    ExtractorConfig extractor;
    PredictorConfig predictor;
    LossConfig loss;
    std::array<StageConfig, 3> stages;
    TauVariant tau_variant = TauVariant::tau_b;
    bool clamp_scores = false;  // inference-time clamping of s to [1,5]
    TrainOptions training;

    void validate() const {
        extractor.validate();
        predictor.validate();
        loss.validate();
        for (const auto& s : stages) s.validate();
    }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::vector<std::string>& known,
                           const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
}

template <typename T>
inline void get_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

inline void parse_stage(const json& j, StageConfig& s, const std::string& where) {
    reject_unknown(j, {"max_epochs", "batch_size", "learning_rate", "patience", "seed"}, where);
    get_if(j, "max_epochs", s.max_epochs);
    get_if(j, "batch_size", s.batch_size);
    get_if(j, "learning_rate", s.learning_rate);
    get_if(j, "patience", s.patience);
    get_if(j, "seed", s.seed);
}

inline json stage_to_json(const StageConfig& s) {
    return json{{"max_epochs", s.max_epochs},
                {"batch_size", s.batch_size},
                {"learning_rate", s.learning_rate},
                {"patience", s.patience},
                {"seed", s.seed}};
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using detail::get_if;
    using detail::reject_unknown;
    RunConfig cfg;
    // Distinct default stage seeds, still fully determined by the config.
    cfg.stages[1].seed = 1;
    cfg.stages[2].seed = 2;

    reject_unknown(j, {"corpus", "extractor", "predictor", "loss", "stages", "metrics",
                       "ablations", "training"},
                   "");
    if (j.contains("corpus")) {
        const auto& c = j.at("corpus");
        reject_unknown(c, {"mean_only"}, "corpus");
        get_if(c, "mean_only", cfg.mean_only);
    }
    if (j.contains("extractor")) {
        const auto& e = j.at("extractor");
        reject_unknown(e,
                       {"semantic_dim", "acoustic_dim", "listener_dim", "frame_shift_samples",
                        "context_layers", "context_heads", "context_ff_expansion",
                        "context_conv_kernel", "semantic_bands", "seed"},
                       "extractor");
        get_if(e, "semantic_dim", cfg.extractor.semantic_dim);
        get_if(e, "acoustic_dim", cfg.extractor.acoustic_dim);
        get_if(e, "listener_dim", cfg.extractor.listener_dim);
        get_if(e, "frame_shift_samples", cfg.extractor.frame_shift_samples);
        get_if(e, "context_layers", cfg.extractor.context_layers);
        get_if(e, "context_heads", cfg.extractor.context_heads);
        get_if(e, "context_ff_expansion", cfg.extractor.context_ff_expansion);
        get_if(e, "context_conv_kernel", cfg.extractor.context_conv_kernel);
        get_if(e, "semantic_bands", cfg.extractor.semantic_bands);
        get_if(e, "seed", cfg.extractor.seed);
    }
    if (j.contains("predictor")) {
        const auto& p = j.at("predictor");
        reject_unknown(p,
                       {"backbone_layers", "backbone_hidden", "regression_layers", "weight_layers",
                        "classification_layers", "head_hidden"},
                       "predictor");
        get_if(p, "backbone_layers", cfg.predictor.backbone_layers);
        get_if(p, "backbone_hidden", cfg.predictor.backbone_hidden);
        get_if(p, "regression_layers", cfg.predictor.regression_layers);
        get_if(p, "weight_layers", cfg.predictor.weight_layers);
        get_if(p, "classification_layers", cfg.predictor.classification_layers);
        get_if(p, "head_hidden", cfg.predictor.head_hidden);
    }
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        reject_unknown(l, {"alpha", "beta", "gamma", "tau"}, "loss");
        get_if(l, "alpha", cfg.loss.alpha);
        get_if(l, "beta", cfg.loss.beta);
        get_if(l, "gamma", cfg.loss.gamma);
        get_if(l, "tau", cfg.loss.tau);
    }
    if (j.contains("stages")) {
        const auto& st = j.at("stages");
        if (!st.is_array() || st.size() != 3)
            throw ConfigError("config 'stages' must be an array of 3 stage objects");
        for (int i = 0; i < 3; ++i)
            detail::parse_stage(st.at(size_t(i)), cfg.stages[size_t(i)],
                                "stages[" + std::to_string(i) + "]");
    }
    if (j.contains("metrics")) {
        const auto& m = j.at("metrics");
        reject_unknown(m, {"tau_variant", "clamp_scores"}, "metrics");
        if (m.contains("tau_variant")) {
            std::string v = m.at("tau_variant").get<std::string>();
            if (v == "tau_b") cfg.tau_variant = TauVariant::tau_b;
            else if (v == "tau_a") cfg.tau_variant = TauVariant::tau_a;
            else throw ConfigError("metrics.tau_variant must be 'tau_b' or 'tau_a'");
        }
        get_if(m, "clamp_scores", cfg.clamp_scores);
    }
    if (j.contains("ablations")) {
        const auto& a = j.at("ablations");
        reject_unknown(a,
                       {"disable_semantic", "disable_acoustic", "disable_id_embedding",
                        "disable_weight_branch", "disable_regression_head",
                        "disable_classification_head", "disable_aggregation"},
                       "ablations");
        auto& ab = cfg.predictor.ablations;
        get_if(a, "disable_semantic", ab.disable_semantic);
        get_if(a, "disable_acoustic", ab.disable_acoustic);
        get_if(a, "disable_id_embedding", ab.disable_id_embedding);
        get_if(a, "disable_weight_branch", ab.disable_weight_branch);
        get_if(a, "disable_regression_head", ab.disable_regression_head);
        get_if(a, "disable_classification_head", ab.disable_classification_head);
        get_if(a, "disable_aggregation", ab.disable_aggregation);
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        reject_unknown(t, {"average_per_stage", "s2_train_backbone"}, "training");
        get_if(t, "average_per_stage", cfg.training.average_per_stage);
        get_if(t, "s2_train_backbone", cfg.training.s2_train_backbone);
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": invalid JSON: " + e.what());
    }
    return parse_run_config(j);
}

// Canonical serialization of the fully-defaulted config; its hash is
// recorded into checkpoints.
inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    using nlohmann::json;
    const auto& ab = cfg.predictor.ablations;
    return json{
        {"corpus", {{"mean_only", cfg.mean_only}}},
        {"extractor",
         {{"semantic_dim", cfg.extractor.semantic_dim},
          {"acoustic_dim", cfg.extractor.acoustic_dim},
          {"listener_dim", cfg.extractor.listener_dim},
          {"frame_shift_samples", cfg.extractor.frame_shift_samples},
          {"context_layers", cfg.extractor.context_layers},
          {"context_heads", cfg.extractor.context_heads},
          {"context_ff_expansion", cfg.extractor.context_ff_expansion},
          {"context_conv_kernel", cfg.extractor.context_conv_kernel},
          {"semantic_bands", cfg.extractor.semantic_bands},
          {"seed", cfg.extractor.seed}}},
        {"predictor",
         {{"backbone_layers", cfg.predictor.backbone_layers},
          {"backbone_hidden", cfg.predictor.backbone_hidden},
          {"regression_layers", cfg.predictor.regression_layers},
          {"weight_layers", cfg.predictor.weight_layers},
          {"classification_layers", cfg.predictor.classification_layers},
          {"head_hidden", cfg.predictor.head_hidden}}},
        {"loss",
         {{"alpha", cfg.loss.alpha},
          {"beta", cfg.loss.beta},
          {"gamma", cfg.loss.gamma},
          {"tau", cfg.loss.tau}}},
        {"stages",
         {detail::stage_to_json(cfg.stages[0]), detail::stage_to_json(cfg.stages[1]),
          detail::stage_to_json(cfg.stages[2])}},
        {"metrics",
         {{"tau_variant", cfg.tau_variant == TauVariant::tau_b ? "tau_b" : "tau_a"},
          {"clamp_scores", cfg.clamp_scores}}},
        {"ablations",
         {{"disable_semantic", ab.disable_semantic},
          {"disable_acoustic", ab.disable_acoustic},
          {"disable_id_embedding", ab.disable_id_embedding},
          {"disable_weight_branch", ab.disable_weight_branch},
          {"disable_regression_head", ab.disable_regression_head},
          {"disable_classification_head", ab.disable_classification_head},
          {"disable_aggregation", ab.disable_aggregation}}},
        {"training",
         {{"average_per_stage", cfg.training.average_per_stage},
          {"s2_train_backbone", cfg.training.s2_train_backbone}}}};
}

inline std::uint64_t run_config_hash(const RunConfig& cfg) {
    return fnv1a(run_config_to_json(cfg).dump());
}

}  // namespace samos
