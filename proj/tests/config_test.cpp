#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "samos/config.hpp"

using namespace samos;
using nlohmann::json;

TEST_CASE("empty config reproduces the published defaults") {
    RunConfig cfg = parse_run_config(json::object());
    CHECK(cfg.mean_only == false);
    CHECK(cfg.extractor.semantic_dim == 64);
    CHECK(cfg.extractor.acoustic_dim == 768);
    CHECK(cfg.extractor.listener_dim == 128);
    CHECK(cfg.extractor.frame_shift_samples == 320);
    CHECK(cfg.extractor.context_layers == 1);
    CHECK(cfg.predictor.backbone_layers == 3);
    CHECK(cfg.predictor.backbone_hidden == 128);
    CHECK(cfg.predictor.regression_layers == 2);
    CHECK(cfg.predictor.weight_layers == 2);
    CHECK(cfg.predictor.classification_layers == 2);
    CHECK(PredictorConfig::num_classes == 5);
    CHECK(cfg.loss.alpha == 0.1);
    CHECK(cfg.loss.beta == 1.0);
    CHECK(cfg.loss.gamma == 0.5);
    CHECK(cfg.loss.tau == 0.25);
    for (int i = 0; i < 3; ++i) {
        CHECK(cfg.stages[size_t(i)].batch_size == 8);
        CHECK(cfg.stages[size_t(i)].learning_rate == 0.0001);
        CHECK(cfg.stages[size_t(i)].patience == 15);
        CHECK(cfg.stages[size_t(i)].seed == std::uint64_t(i));
    }
    CHECK(cfg.tau_variant == TauVariant::tau_b);
    CHECK(cfg.clamp_scores == false);
    CHECK(cfg.training.average_per_stage == false);
    CHECK(cfg.training.s2_train_backbone == false);
    const auto& ab = cfg.predictor.ablations;
    CHECK_FALSE(ab.disable_semantic);
    CHECK_FALSE(ab.disable_acoustic);
    CHECK_FALSE(ab.disable_id_embedding);
    CHECK_FALSE(ab.disable_weight_branch);
    CHECK_FALSE(ab.disable_regression_head);
    CHECK_FALSE(ab.disable_classification_head);
    CHECK_FALSE(ab.disable_aggregation);
}

TEST_CASE("overrides are applied") {
    json j = {
        {"corpus", {{"mean_only", true}}},
        {"extractor", {{"semantic_dim", 16}, {"acoustic_dim", 32}, {"seed", 99}}},
        {"predictor", {{"backbone_hidden", 8}}},
        {"loss", {{"tau", 0.5}}},
        {"metrics", {{"tau_variant", "tau_a"}, {"clamp_scores", true}}},
        {"ablations", {{"disable_acoustic", true}}},
        {"training", {{"average_per_stage", true}}},
    };
    RunConfig cfg = parse_run_config(j);
    CHECK(cfg.mean_only);
    CHECK(cfg.extractor.semantic_dim == 16);
    CHECK(cfg.extractor.acoustic_dim == 32);
    CHECK(cfg.extractor.seed == 99);
    CHECK(cfg.predictor.backbone_hidden == 8);
    CHECK(cfg.loss.tau == 0.5);
    CHECK(cfg.tau_variant == TauVariant::tau_a);
    CHECK(cfg.clamp_scores);
    CHECK(cfg.predictor.ablations.disable_acoustic);
    CHECK(cfg.training.average_per_stage);
}

TEST_CASE("stage array overrides individual stages") {
    json j = {{"stages",
               {json{{"max_epochs", 10}}, json{{"learning_rate", 0.01}}, json{{"seed", 7}}}}};
    RunConfig cfg = parse_run_config(j);
    CHECK(cfg.stages[0].max_epochs == 10);
    CHECK(cfg.stages[1].learning_rate == 0.01);
    CHECK(cfg.stages[2].seed == 7);
    // Untouched fields keep their defaults.
    CHECK(cfg.stages[0].learning_rate == 0.0001);
    CHECK(cfg.stages[1].seed == 1);

    json bad = {{"stages", {json{{"max_epochs", 10}}}}};
    CHECK_THROWS_AS(parse_run_config(bad), ConfigError);
}

TEST_CASE("unknown keys are rejected with their path") {
    CHECK_THROWS_MATCHES(parse_run_config(json{{"extraneous", 1}}), ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("extraneous")));
    CHECK_THROWS_MATCHES(parse_run_config(json{{"loss", {{"delta", 1.0}}}}), ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("loss.delta")));
    CHECK_THROWS_AS(parse_run_config(json{{"extractor", {{"semanticdim", 8}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"ablations", {{"disable_everything", true}}}}),
                    ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"stages", {json{{"lr", 0.1}}, json::object(),
                                                      json::object()}}}),
                    ConfigError);
}

TEST_CASE("invalid values fail validation") {
    CHECK_THROWS_AS(parse_run_config(json{{"loss", {{"alpha", 0.0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"extractor", {{"acoustic_dim", 7}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"predictor", {{"backbone_layers", 0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"metrics", {{"tau_variant", "tau_c"}}}}), ConfigError);
    CHECK_THROWS_AS(
        parse_run_config(json{{"ablations",
                               {{"disable_regression_head", true},
                                {"disable_classification_head", true}}}}),
        ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
    RunConfig a = parse_run_config(json::object());
    RunConfig b = parse_run_config(json::object());
    CHECK(run_config_hash(a) == run_config_hash(b));

    RunConfig c = parse_run_config(json{{"loss", {{"tau", 0.3}}}});
    CHECK(run_config_hash(a) != run_config_hash(c));

    // Round-tripping the canonical JSON reproduces the same hash.
    RunConfig d = parse_run_config(run_config_to_json(a));
    CHECK(run_config_hash(a) == run_config_hash(d));
}

TEST_CASE("load_run_config reads files and reports errors") {
    auto dir = std::filesystem::temp_directory_path();
    auto ok = dir / "samos_cfg_ok.json";
    {
        std::ofstream out(ok);
        out << R"({"loss": {"tau": 0.5}})";
    }
    RunConfig cfg = load_run_config(ok.string());
    CHECK(cfg.loss.tau == 0.5);
    std::filesystem::remove(ok);

    CHECK_THROWS_AS(load_run_config((dir / "samos_cfg_missing.json").string()), IoError);

    auto bad = dir / "samos_cfg_bad.json";
    {
        std::ofstream out(bad);
        out << "{not json";
    }
    CHECK_THROWS_AS(load_run_config(bad.string()), ParseError);
    std::filesystem::remove(bad);
}
