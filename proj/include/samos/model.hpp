#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "samos/common.hpp"
#include "samos/feature_matrix.hpp"
#include "samos/features.hpp"
#include "samos/nn/layers.hpp"
#include "samos/predictor.hpp"

namespace samos {

struct ModelConfig {
    ExtractorConfig extractor;
    PredictorConfig predictor;
    int listener_vocab_size = 1;  // mean-listener only until a corpus is attached

    void validate() const {
        extractor.validate();
        predictor.validate();
        if (listener_vocab_size < 1) throw ConfigError("listener vocabulary must be non-empty");
    }

    int input_dim() const {
        return extractor.semantic_dim + extractor.acoustic_dim + extractor.listener_dim;
    }
};

// Per-utterance output of the permanently frozen extractor stages; safe to
// cache across epochs because those parameters never move.
struct FixedFeatures {
    Eigen::MatrixXd semantic_base;      // T x semantic_dim
    Eigen::MatrixXd acoustic_spectral;  // T x acoustic_dim
    int frames = 0;
};

// The full SAMOS pipeline: fixed seeded frontends standing in for the
// pretrained semantic/acoustic models, the trainable extractor tails,
// listener embedding, and the base predictor.
class SamosModel {
  public:
    explicit SamosModel(const ModelConfig& cfg)
        : cfg_(cfg), dft_(cfg.extractor.frame_shift_samples) {
        cfg_.validate();
        const auto& ex = cfg_.extractor;
        int bins = ex.frame_shift_samples / 2 + 1;
        filterbank_ = low_band_filterbank(bins, ex.semantic_bands);

        std::mt19937_64 rng(ex.seed);
        // Creation order is fixed; it defines the checkpoint schema.
        sem_base_W_ = &params_.create("semantic.base.W", "semantic.base", ex.semantic_bands,
                                      ex.semantic_dim);
        sem_base_b_ = &params_.create("semantic.base.b", "semantic.base", 1, ex.semantic_dim);
        nn::init_uniform(*sem_base_W_, rng, ex.semantic_bands);
        nn::init_uniform(*sem_base_b_, rng, ex.semantic_bands);

        int half = ex.acoustic_dim / 2;
        ac_amp_W_ = &params_.create("acoustic.spectral.amp.W", "acoustic.spectral", bins, half);
        ac_amp_b_ = &params_.create("acoustic.spectral.amp.b", "acoustic.spectral", 1, half);
        ac_ph_W_ = &params_.create("acoustic.spectral.phase.W", "acoustic.spectral", 2 * bins, half);
        ac_ph_b_ = &params_.create("acoustic.spectral.phase.b", "acoustic.spectral", 1, half);
        nn::init_uniform(*ac_amp_W_, rng, bins);
        nn::init_uniform(*ac_amp_b_, rng, bins);
        nn::init_uniform(*ac_ph_W_, rng, 2 * bins);
        nn::init_uniform(*ac_ph_b_, rng, 2 * bins);

        sem_proj_ = nn::Linear::create(params_, "semantic.proj", "semantic.proj", ex.semantic_dim,
                                       ex.semantic_dim, rng);
        for (int l = 0; l < ex.context_layers; ++l)
            context_.push_back(nn::ConformerBlock::create(
                params_, "acoustic.context.b" + std::to_string(l), "acoustic.context",
                ex.acoustic_dim, ex.context_heads, ex.context_ff_expansion, ex.context_conv_kernel,
                rng));
        listener_embed_ = &params_.create("listener.embed", "listener.embed",
                                          cfg_.listener_vocab_size, ex.listener_dim);
        nn::init_uniform(*listener_embed_, rng, ex.listener_dim);

        predictor_ = Predictor::create(params_, cfg_.predictor, cfg_.input_dim(), rng);
    }

    const ModelConfig& config() const { return cfg_; }
    nn::ParameterStore& params() { return params_; }
    const nn::ParameterStore& params() const { return params_; }

    // ----- fixed (permanently frozen) frontend -----

    FixedFeatures compute_fixed(const std::vector<double>& waveform) const {
        const auto& ex = cfg_.extractor;
        ShortTimeSpectra sp = short_time_spectra(waveform, ex.frame_shift_samples, dft_);
        FixedFeatures fx;
        fx.frames = int(sp.amplitude.rows());

        // Semantic base: low-band log filterbank energies through a fixed
        // seeded nonlinear projection. Blind to everything above the band.
        Eigen::MatrixXd energy = sp.amplitude.array().square().matrix() * filterbank_;
        Eigen::MatrixXd loge = (energy.array() + 1e-8).log().matrix();
        fx.semantic_base =
            ((loge * sem_base_W_->value).rowwise() + sem_base_b_->value.row(0)).array().tanh();

        // Acoustic spectral stage: amplitude and phase spectra through fixed
        // seeded nonlinear projections, concatenated to acoustic_dim.
        Eigen::MatrixXd la = sp.amplitude.array().log1p().matrix();
        Eigen::MatrixXd amp_feat =
            ((la * ac_amp_W_->value).rowwise() + ac_amp_b_->value.row(0)).array().tanh();
        Eigen::MatrixXd ph(sp.phase_cos.rows(), 2 * sp.bins);
        ph << sp.phase_cos, sp.phase_sin;
        Eigen::MatrixXd ph_feat =
            ((ph * ac_ph_W_->value).rowwise() + ac_ph_b_->value.row(0)).array().tanh();
        fx.acoustic_spectral.resize(fx.frames, ex.acoustic_dim);
        fx.acoustic_spectral << amp_feat, ph_feat;
        return fx;
    }

    // ----- spec-level extractor operations (inference semantics) -----

    FeatureMatrix extract_semantic(const std::vector<double>& waveform) const {
        FixedFeatures fx = compute_fixed(waveform);
        FeatureMatrix m;
        m.frame_shift_samples = cfg_.extractor.frame_shift_samples;
        m.source = FeatureSource::semantic;
        m.data = (fx.semantic_base * sem_proj_.W->value).rowwise() + sem_proj_.b->value.row(0);
        return m;
    }

    // The acoustic path up to (not including) the trainable context layer.
    // Columns [0, acoustic_dim/2) carry amplitude information, the rest phase.
    FeatureMatrix acoustic_spectral(const std::vector<double>& waveform) const {
        FixedFeatures fx = compute_fixed(waveform);
        FeatureMatrix m;
        m.frame_shift_samples = cfg_.extractor.frame_shift_samples;
        m.source = FeatureSource::acoustic;
        m.data = fx.acoustic_spectral;
        return m;
    }

    FeatureMatrix extract_acoustic(const std::vector<double>& waveform) const {
        FixedFeatures fx = compute_fixed(waveform);
        nn::Tape t;
        nn::Tape::Var ac = t.input(fx.acoustic_spectral);
        for (const auto& block : context_) ac = block.apply(t, ac);
        FeatureMatrix m;
        m.frame_shift_samples = cfg_.extractor.frame_shift_samples;
        m.source = FeatureSource::acoustic;
        m.data = t.value(ac);
        return m;
    }

    Eigen::VectorXd embed_listener(int listener_index) const {
        if (listener_index < 0 || listener_index >= cfg_.listener_vocab_size)
            throw VocabularyError("listener index " + std::to_string(listener_index) +
                                  " out of range [0, " + std::to_string(cfg_.listener_vocab_size) +
                                  ")");
        return listener_embed_->value.row(listener_index).transpose();
    }

    // ----- training graph -----

    // Builds the full forward graph from cached fixed features. Trainable
    // extractor tails participate so their gradients flow.
    PredictorGraph build_graph(nn::Tape& t, const FixedFeatures& fx, int listener_index) {
        if (listener_index < 0 || listener_index >= cfg_.listener_vocab_size)
            throw VocabularyError("listener index out of range: " + std::to_string(listener_index));
        const auto& ex = cfg_.extractor;
        const auto& ab = cfg_.predictor.ablations;
        int T = fx.frames;

        nn::Tape::Var sem;
        if (ab.disable_semantic) {
            sem = t.input(Eigen::MatrixXd::Zero(T, ex.semantic_dim));
        } else {
            sem = sem_proj_.apply(t, t.input(fx.semantic_base));
        }

        nn::Tape::Var ac;
        if (ab.disable_acoustic) {
            ac = t.input(Eigen::MatrixXd::Zero(T, ex.acoustic_dim));
        } else {
            ac = t.input(fx.acoustic_spectral);
            for (const auto& block : context_) ac = block.apply(t, ac);
        }

        nn::Tape::Var lis;
        if (ab.disable_id_embedding) {
            lis = t.input(Eigen::MatrixXd::Zero(T, ex.listener_dim));
        } else {
            lis = t.repeat_row(t.leaf_row(*listener_embed_, listener_index), T);
        }

        nn::Tape::Var assembled = t.concat_cols({sem, ac, lis});
        return predictor_.build(t, assembled);
    }

    PredictorOutput infer(const FixedFeatures& fx, int listener_index) {
        nn::Tape t;
        PredictorGraph g = build_graph(t, fx, listener_index);
        return Predictor::read_output(t, g);
    }

    PredictorOutput infer_waveform(const std::vector<double>& waveform, int listener_index) {
        FixedFeatures fx = compute_fixed(waveform);
        return infer(fx, listener_index);
    }

    const Predictor& predictor() const { return predictor_; }

    // Parameter groups frozen in every stage of the schedule.
    static const std::set<std::string>& always_frozen_groups() {
        static const std::set<std::string> g = {"semantic.base", "acoustic.spectral"};
        return g;
    }

  private:
    ModelConfig cfg_;
    DftBasis dft_;
    Eigen::MatrixXd filterbank_;
    nn::ParameterStore params_;

    nn::Parameter* sem_base_W_ = nullptr;
    nn::Parameter* sem_base_b_ = nullptr;
    nn::Parameter* ac_amp_W_ = nullptr;
    nn::Parameter* ac_amp_b_ = nullptr;
    nn::Parameter* ac_ph_W_ = nullptr;
    nn::Parameter* ac_ph_b_ = nullptr;
    nn::Linear sem_proj_;
    std::vector<nn::ConformerBlock> context_;
    nn::Parameter* listener_embed_ = nullptr;
    Predictor predictor_;
};

}  // namespace samos
