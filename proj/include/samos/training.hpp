#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "samos/checkpoint.hpp"
#include "samos/common.hpp"
#include "samos/corpus.hpp"
#include "samos/losses.hpp"
#include "samos/metrics.hpp"
#include "samos/model.hpp"
#include "samos/wav.hpp"

namespace samos {

enum class Stage { S1_regression = 1, S2_classification = 2, S3_aggregation = 3 };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::S1_regression: return "S1_regression";
        case Stage::S2_classification: return "S2_classification";
        default: return "S3_aggregation";
    }
}

struct StageConfig {
    int max_epochs = 1000;
    int batch_size = 8;
    double learning_rate = 0.0001;
    int patience = 15;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
        if (patience < 1) throw ConfigError("patience must be >= 1");
    }
};

struct TrainOptions {
    bool average_per_stage = false;  // default: average only the final stage's top-3
    bool s2_train_backbone = false;  // override for the stage-2 swap
    std::uint64_t config_hash = 0;
};

// Parameter groups excluded from gradient updates in each stage. The
// acoustic spectral projection and the fixed semantic frontend are frozen
// everywhere.
inline std::set<std::string> freeze_mask(Stage stage) {
    static const std::set<std::string> all = {
        "semantic.base", "semantic.proj", "acoustic.spectral", "acoustic.context",
        "listener.embed", "backbone",     "reg.score",         "reg.weight",
        "cls",           "agg"};
    switch (stage) {
        case Stage::S1_regression:
            return {"semantic.base", "acoustic.spectral", "cls", "agg"};
        case Stage::S2_classification: {
            std::set<std::string> m = all;
            m.erase("cls");
            return m;
        }
        case Stage::S3_aggregation: {
            std::set<std::string> m = all;
            m.erase("agg");
            return m;
        }
    }
    throw ConfigError("unknown training stage");
}

// History entries are (epoch, dev system-level SRCC). Stop once the best
// value is `patience` epochs old; SRCC ties keep the earliest epoch.
inline bool should_stop(const std::vector<std::pair<int, double>>& history, int patience) {
    if (history.empty()) throw InputError("should_stop: empty history");
    int best_epoch = history.front().first;
    double best = history.front().second;
    for (const auto& [epoch, srcc] : history)
        if (srcc > best) {
            best = srcc;
            best_epoch = epoch;
        }
    return history.back().first - best_epoch >= patience;
}

// ----- data plumbing -----

struct PreparedSample {
    TrainingSample meta;
    const FixedFeatures* fx = nullptr;
};

struct DevItem {
    std::string utterance_id;
    std::string system_id;
    const FixedFeatures* fx = nullptr;
    double truth = 0.0;  // utterance mean score
};

struct TrainingData {
    std::vector<PreparedSample> train;
    std::vector<DevItem> dev;  // sorted by utterance_id
};

using FeatureCache = std::map<std::string, FixedFeatures>;

inline std::string join_path(const std::string& base, const std::string& rel) {
    if (rel.empty() || rel.front() == '/' || base.empty()) return rel;
    return base.back() == '/' ? base + rel : base + "/" + rel;
}

inline const FixedFeatures& cache_features(FeatureCache& cache, const SamosModel& model,
                                           const Utterance& utt, const std::string& base_dir) {
    auto it = cache.find(utt.utterance_id);
    if (it != cache.end()) return it->second;
    auto wav = read_wav(join_path(base_dir, utt.wav_path));
    return cache.emplace(utt.utterance_id, model.compute_fixed(wav)).first->second;
}

// Expands the train split and wires dev items, filling the cache with the
// frozen-frontend features of every referenced utterance.
inline TrainingData prepare_training_data(const std::vector<Utterance>& utterances,
                                          const ListenerVocabulary& vocab, bool mean_only,
                                          const SamosModel& model, FeatureCache& cache,
                                          const std::string& base_dir) {
    TrainingData data;
    auto train_utts = filter_split(utterances, Split::train);
    auto dev_utts = filter_split(utterances, Split::dev);
    auto samples = expand_training_samples(train_utts, vocab, mean_only);

    std::map<std::string, const Utterance*> by_id;
    for (const auto& u : train_utts) by_id[u.utterance_id] = &u;
    for (auto& s : samples) {
        const FixedFeatures& fx = cache_features(cache, model, *by_id.at(s.utterance_id), base_dir);
        data.train.push_back({std::move(s), &fx});
    }
    for (const auto& u : dev_utts) {
        const FixedFeatures& fx = cache_features(cache, model, u, base_dir);
        data.dev.push_back({u.utterance_id, u.system_id, &fx, u.mean_score});
    }
    return data;
}

// ----- stage runner -----

struct StageResult {
    std::vector<Checkpoint> best;  // sorted by dev SRCC desc, epoch asc; at most 3
    std::vector<std::pair<int, double>> history;
};

namespace detail {

inline void insert_topk(std::vector<Checkpoint>& best, Checkpoint ck, size_t k = 3) {
    best.push_back(std::move(ck));
    std::stable_sort(best.begin(), best.end(), [](const Checkpoint& a, const Checkpoint& b) {
        if (a.dev_srcc != b.dev_srcc) return a.dev_srcc > b.dev_srcc;
        return a.epoch < b.epoch;
    });
    if (best.size() > k) best.resize(k);
}

inline double system_level_srcc(const std::vector<DevItem>& dev,
                                const std::vector<double>& predictions) {
    ScoreTable table;
    for (size_t i = 0; i < dev.size(); ++i)
        table.push_back({dev[i].utterance_id, dev[i].system_id, predictions[i], dev[i].truth});
    auto agg = system_aggregate(table);
    if (agg.size() < 2)
        throw ConfigError("dev set needs at least 2 systems for system-level SRCC");
    std::vector<double> p, t;
    for (const auto& [sys, pp, tt] : agg) {
        p.push_back(pp);
        t.push_back(tt);
    }
    return srcc(p, t);
}

}  // namespace detail

inline StageResult run_stage(SamosModel& model, Stage stage, const TrainingData& data,
                             const LossConfig& loss_cfg, const StageConfig& cfg,
                             const TrainOptions& opts, std::ostream* log = nullptr) {
    cfg.validate();
    loss_cfg.validate();
    if (data.train.empty()) throw InputError("run_stage: empty training split");
    if (data.dev.empty()) throw ConfigError("run_stage: empty dev set");

    std::set<std::string> frozen = freeze_mask(stage);
    if (stage == Stage::S2_classification && opts.s2_train_backbone) frozen.erase("backbone");

    StageResult result;
    if (cfg.max_epochs == 0) return result;

    const size_t n = data.train.size();
    const Predictor& pred = model.predictor();

    // Stages 2 and 3 train only past the frozen prefix of the graph, so the
    // upstream activations are computed once.
    std::vector<Eigen::MatrixXd> train_states, dev_states;  // stage 2
    std::vector<std::pair<double, double>> train_rc;        // stage 3: (r, c)
    std::vector<std::pair<double, double>> dev_rc;
    if (stage == Stage::S2_classification && !opts.s2_train_backbone) {
        auto states_of = [&](const FixedFeatures& fx, int listener) {
            nn::Tape t;
            PredictorGraph g = model.build_graph(t, fx, listener);
            return t.value(g.states);
        };
        for (const auto& s : data.train)
            train_states.push_back(states_of(*s.fx, s.meta.listener_index));
        for (const auto& d : data.dev) dev_states.push_back(states_of(*d.fx, 0));
    } else if (stage == Stage::S3_aggregation) {
        auto rc_of = [&](const FixedFeatures& fx, int listener) {
            PredictorOutput out = model.infer(fx, listener);
            return std::make_pair(out.r, out.c);
        };
        for (const auto& s : data.train) train_rc.push_back(rc_of(*s.fx, s.meta.listener_index));
        for (const auto& d : data.dev) dev_rc.push_back(rc_of(*d.fx, 0));
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        size_t batches = 0;

        for (size_t start = 0; start < n; start += size_t(cfg.batch_size)) {
            size_t end = std::min(n, start + size_t(cfg.batch_size));
            size_t bs = end - start;
            model.params().zero_grads();
            double batch_loss = 0.0;

            if (stage == Stage::S1_regression) {
                std::vector<nn::Tape> tapes(bs);
                std::vector<PredictorGraph> graphs(bs);
                std::vector<std::pair<double, double>> batch;  // (label, prediction)
                for (size_t i = 0; i < bs; ++i) {
                    const auto& s = data.train[order[start + i]];
                    graphs[i] = model.build_graph(tapes[i], *s.fx, s.meta.listener_index);
                    batch.emplace_back(s.meta.label_score, tapes[i].value(graphs[i].r)(0, 0));
                }
                batch_loss = regression_batch_loss(batch, loss_cfg);
                auto grads = regression_batch_loss_grad(batch, loss_cfg);
                for (size_t i = 0; i < bs; ++i)
                    tapes[i].backward(graphs[i].r, Eigen::MatrixXd::Constant(1, 1, grads[i]));
            } else if (stage == Stage::S2_classification) {
                for (size_t i = 0; i < bs; ++i) {
                    const auto& s = data.train[order[start + i]];
                    nn::Tape t;
                    nn::Tape::Var p;
                    if (opts.s2_train_backbone) {
                        PredictorGraph g = model.build_graph(t, *s.fx, s.meta.listener_index);
                        p = g.p;
                    } else {
                        auto [pp, cc] = pred.classify_from_states(
                            t, t.input(train_states[order[start + i]]));
                        p = pp;
                    }
                    std::array<double, 5> pv;
                    for (int k = 0; k < 5; ++k) pv[size_t(k)] = t.value(p)(0, k);
                    batch_loss += classification_loss(pv, s.meta.label_distribution);
                    auto g = classification_loss_grad(pv, s.meta.label_distribution);
                    Eigen::MatrixXd seed(1, 5);
                    for (int k = 0; k < 5; ++k) seed(0, k) = g[size_t(k)] / double(bs);
                    t.backward(p, seed);
                }
                batch_loss /= double(bs);
            } else {  // S3_aggregation
                for (size_t i = 0; i < bs; ++i) {
                    const auto& s = data.train[order[start + i]];
                    const auto& [r, c] = train_rc[order[start + i]];
                    nn::Tape t;
                    nn::Tape::Var sv =
                        pred.aggregate(t, t.input(Eigen::MatrixXd::Constant(1, 1, r)),
                                       t.input(Eigen::MatrixXd::Constant(1, 1, c)));
                    double s_val = t.value(sv)(0, 0);
                    batch_loss += aggregation_loss(s_val, s.meta.label_score);
                    double g = aggregation_loss_grad(s_val, s.meta.label_score) / double(bs);
                    t.backward(sv, Eigen::MatrixXd::Constant(1, 1, g));
                }
                batch_loss /= double(bs);
            }

            if (!std::isfinite(batch_loss))
                throw Error("training diverged: non-finite loss in " +
                            std::string(stage_name(stage)) + " epoch " + std::to_string(epoch) +
                            " batch " + std::to_string(batches));
            model.params().sgd_step(cfg.learning_rate, frozen);
            epoch_loss += batch_loss;
            ++batches;
        }
        epoch_loss /= double(batches);

        // Dev evaluation with the mean-listener ID, on the stage's output
        // score, reduced in utterance_id order (dev items are pre-sorted).
        std::vector<double> dev_scores(data.dev.size());
        for (size_t i = 0; i < data.dev.size(); ++i) {
            if (stage == Stage::S1_regression ||
                (stage == Stage::S2_classification && opts.s2_train_backbone)) {
                PredictorOutput out = model.infer(*data.dev[i].fx, 0);
                dev_scores[i] = stage == Stage::S1_regression ? out.r : out.c;
            } else if (stage == Stage::S2_classification) {
                nn::Tape t;
                auto [p, c] = pred.classify_from_states(t, t.input(dev_states[i]));
                dev_scores[i] = t.value(c)(0, 0);
            } else {
                nn::Tape t;
                nn::Tape::Var sv = pred.aggregate(
                    t, t.input(Eigen::MatrixXd::Constant(1, 1, dev_rc[i].first)),
                    t.input(Eigen::MatrixXd::Constant(1, 1, dev_rc[i].second)));
                dev_scores[i] = t.value(sv)(0, 0);
            }
        }
        double dev_srcc = detail::system_level_srcc(data.dev, dev_scores);

        result.history.emplace_back(epoch, dev_srcc);
        Checkpoint ck = Checkpoint::from_params(model.params());
        ck.stage = int(stage);
        ck.epoch = epoch;
        ck.dev_srcc = dev_srcc;
        ck.config_hash = opts.config_hash;
        detail::insert_topk(result.best, std::move(ck));

        if (log)
            *log << epoch << ',' << stage_name(stage) << ',' << epoch_loss << ',' << dev_srcc
                 << '\n' << std::flush;
        if (should_stop(result.history, cfg.patience)) break;
    }
    return result;
}

// ----- full schedule -----

struct TrainingRunResult {
    Checkpoint final;
    std::array<StageResult, 3> stages;
};

// Stages 1 -> 2 -> 3. After each stage the model is reset to that stage's
// selected checkpoint (best by dev SRCC, or the top-3 average when
// average_per_stage is set). The released model is the final stage's
// top-3 average.
inline TrainingRunResult run_training(SamosModel& model, const TrainingData& data,
                                      const LossConfig& loss_cfg,
                                      const std::array<StageConfig, 3>& stage_cfgs,
                                      const TrainOptions& opts, std::ostream* log = nullptr) {
    const auto& ab = model.config().predictor.ablations;
    TrainingRunResult run;
    Checkpoint last_selected = Checkpoint::from_params(model.params());
    last_selected.config_hash = opts.config_hash;

    // Ablations can disable a stage's trainable target entirely.
    std::array<bool, 3> enabled = {
        !ab.disable_regression_head,
        !ab.disable_classification_head,
        !(ab.disable_aggregation || ab.disable_regression_head || ab.disable_classification_head)};
    int last_enabled = -1;
    for (int si = 0; si < 3; ++si)
        if (enabled[size_t(si)]) last_enabled = si;

    for (int si = 0; si < 3; ++si) {
        if (!enabled[size_t(si)]) continue;
        Stage stage = Stage(si + 1);
        run.stages[size_t(si)] =
            run_stage(model, stage, data, loss_cfg, stage_cfgs[size_t(si)], opts, log);
        const auto& best = run.stages[size_t(si)].best;
        if (best.empty()) continue;  // max_epochs == 0
        Checkpoint selected = (opts.average_per_stage || si == last_enabled)
                                  ? average_checkpoints(best)
                                  : best.front();
        selected.load_into(model.params());
        last_selected = std::move(selected);
    }
    run.final = std::move(last_selected);
    run.final.config_hash = opts.config_hash;
    return run;
}

// OOD fine-tuning: reruns the schedule from an existing checkpoint on a
// mean-listener-only corpus.
inline TrainingRunResult finetune_ood(SamosModel& model, const Checkpoint& start,
                                      const TrainingData& mean_only_data,
                                      const LossConfig& loss_cfg,
                                      const std::array<StageConfig, 3>& stage_cfgs,
                                      const TrainOptions& opts, std::ostream* log = nullptr) {
    start.load_into(model.params());
    return run_training(model, mean_only_data, loss_cfg, stage_cfgs, opts, log);
}

}  // namespace samos
