#pragma once

#include <array>
#include <string>
#include <tuple>
#include <utility>

#include "samos/common.hpp"
#include "samos/feature_matrix.hpp"
#include "samos/nn/layers.hpp"

namespace samos {

struct AblationFlags {
    bool disable_semantic = false;
    bool disable_acoustic = false;
    bool disable_id_embedding = false;
    bool disable_weight_branch = false;
    bool disable_regression_head = false;
    bool disable_classification_head = false;
    bool disable_aggregation = false;

    void validate() const {
        if (disable_regression_head && disable_classification_head)
            throw ConfigError("at least one prediction head must stay enabled");
    }
};

struct PredictorConfig {
    int backbone_layers = 3;
    int backbone_hidden = 128;  // per direction
    int regression_layers = 2;
    int weight_layers = 2;
    int classification_layers = 2;
    int head_hidden = 64;
    static constexpr int num_classes = 5;
    AblationFlags ablations;

    void validate() const {
        if (backbone_layers < 1 || backbone_hidden < 1)
            throw ConfigError("backbone_layers and backbone_hidden must be positive");
        if (regression_layers < 1 || weight_layers < 1 || classification_layers < 1)
            throw ConfigError("head layer counts must be positive");
        if (head_hidden < 1) throw ConfigError("head_hidden must be positive");
        ablations.validate();
    }
};

struct PredictorOutput {
    std::array<double, 5> p{};      // class probability vector
    double r = 0.0;                 // regression score
    double c = 0.0;                 // classification score (expectation of p)
    double s = 0.0;                 // final aggregated score
    Eigen::VectorXd frame_scores;   // length T
    Eigen::VectorXd frame_weights;  // length T, sums to 1
};

// Tape handles to the predictor outputs, for loss seeding during training.
struct PredictorGraph {
    nn::Tape::Var r = -1;              // 1x1
    nn::Tape::Var p = -1;              // 1x5
    nn::Tape::Var c = -1;              // 1x1
    nn::Tape::Var s = -1;              // 1x1
    nn::Tape::Var frame_scores = -1;   // Tx1
    nn::Tape::Var frame_weights = -1;  // Tx1
    nn::Tape::Var states = -1;         // Tx2H backbone states
};

namespace detail {

// n linear layers with tanh between them (none after the last).
struct Mlp {
    std::vector<nn::Linear> layers;

    static Mlp create(nn::ParameterStore& ps, const std::string& name, const std::string& group,
                      int in, int hidden, int out, int n_layers, std::mt19937_64& rng) {
        Mlp m;
        for (int l = 0; l < n_layers; ++l) {
            int li = l == 0 ? in : hidden;
            int lo = l == n_layers - 1 ? out : hidden;
            m.layers.push_back(
                nn::Linear::create(ps, name + ".l" + std::to_string(l), group, li, lo, rng));
        }
        return m;
    }

    nn::Tape::Var apply(nn::Tape& t, nn::Tape::Var x) const {
        for (size_t l = 0; l < layers.size(); ++l) {
            x = layers[l].apply(t, x);
            if (l + 1 < layers.size()) x = t.tanh_(x);
        }
        return x;
    }
};

}  // namespace detail

// The base MOS predictor: BiLSTM backbone, regression head with weight
// branch, classification head, and the aggregation layer producing
// (p, r, c, s).
class Predictor {
  public:
    Predictor() = default;

    static Predictor create(nn::ParameterStore& ps, const PredictorConfig& cfg, int input_dim,
                            std::mt19937_64& rng) {
        cfg.validate();
        Predictor pr;
        pr.cfg_ = cfg;
        pr.input_dim_ = input_dim;
        pr.backbone_ = nn::BiLstmStack::create(ps, "backbone", "backbone", input_dim,
                                               cfg.backbone_hidden, cfg.backbone_layers, rng);
        int state_dim = 2 * cfg.backbone_hidden;
        pr.reg_score_ = detail::Mlp::create(ps, "reg.score", "reg.score", state_dim,
                                            cfg.head_hidden, 1, cfg.regression_layers, rng);
        pr.reg_weight_ = detail::Mlp::create(ps, "reg.weight", "reg.weight", state_dim,
                                             cfg.head_hidden, 1, cfg.weight_layers, rng);
        pr.cls_ = detail::Mlp::create(ps, "cls", "cls", state_dim, cfg.head_hidden,
                                      PredictorConfig::num_classes, cfg.classification_layers, rng);
        // Center initial frame scores on the middle of the MOS scale.
        ps.at("reg.score.l" + std::to_string(cfg.regression_layers - 1) + ".b").value.setConstant(3.0);
        // Aggregation starts as plain averaging of r and c.
        pr.agg_w_ = &ps.create("agg.w", "agg", 2, 1);
        pr.agg_b_ = &ps.create("agg.b", "agg", 1, 1);
        pr.agg_w_->value << 0.5, 0.5;
        return pr;
    }

    const PredictorConfig& config() const { return cfg_; }
    int input_dim() const { return input_dim_; }

    // Build the forward graph on a tape. `assembled` is a T x input_dim node.
    PredictorGraph build(nn::Tape& t, nn::Tape::Var assembled) const {
        const auto& x = t.value(assembled);
        if (int(x.cols()) != input_dim_)
            throw ConfigError("predictor input dim " + std::to_string(x.cols()) +
                              " does not match configured " + std::to_string(input_dim_));
        int T = int(x.rows());
        if (T < 1) throw InputError("predictor input has no frames");
        return build_from_states(t, backbone_.apply(t, assembled));
    }

    // Heads and aggregation over (possibly precomputed) backbone states;
    // stages 2 and 3 train against cached states since everything upstream
    // is frozen there.
    PredictorGraph build_from_states(nn::Tape& t, nn::Tape::Var states) const {
        int T = int(t.value(states).rows());
        const auto& ab = cfg_.ablations;
        PredictorGraph g;
        g.states = states;

        if (!ab.disable_regression_head) {
            g.frame_scores = reg_score_.apply(t, g.states);  // T x 1
            if (ab.disable_weight_branch) {
                g.frame_weights = t.input(Eigen::MatrixXd::Constant(T, 1, 1.0 / T));
            } else {
                g.frame_weights = t.softmax_col(reg_weight_.apply(t, g.states));
            }
            g.r = t.sum_all(t.cmul(g.frame_scores, g.frame_weights));
        } else {
            g.frame_scores = t.input(Eigen::MatrixXd::Zero(T, 1));
            g.frame_weights = t.input(Eigen::MatrixXd::Constant(T, 1, 1.0 / T));
            g.r = t.input(Eigen::MatrixXd::Zero(1, 1));
        }

        if (!ab.disable_classification_head) {
            std::tie(g.p, g.c) = classify_from_states(t, g.states);
        } else {
            g.p = t.input(Eigen::MatrixXd::Constant(1, PredictorConfig::num_classes, 0.2));
            g.c = t.input(Eigen::MatrixXd::Constant(1, 1, 3.0));
        }

        g.s = aggregate(t, g.r, g.c);
        return g;
    }

    // s = w1*r + w2*c + b (or the ablation fallbacks).
    nn::Tape::Var aggregate(nn::Tape& t, nn::Tape::Var r, nn::Tape::Var c) const {
        const auto& ab = cfg_.ablations;
        if (ab.disable_regression_head) return c;
        if (ab.disable_classification_head) return r;
        if (ab.disable_aggregation) return t.scale(t.add(r, c), 0.5);
        nn::Tape::Var rc = t.concat_cols({r, c});  // 1 x 2
        return t.add(t.matmul(rc, t.leaf(*agg_w_)), t.leaf(*agg_b_));
    }

    // Classification head over cached states: returns (p, c) vars.
    std::pair<nn::Tape::Var, nn::Tape::Var> classify_from_states(nn::Tape& t,
                                                                 nn::Tape::Var states) const {
        nn::Tape::Var logits = cls_.apply(t, states);
        nn::Tape::Var p = t.softmax_rows(t.mean_rows(logits));
        Eigen::MatrixXd idx(PredictorConfig::num_classes, 1);
        for (int i = 0; i < PredictorConfig::num_classes; ++i) idx(i, 0) = i + 1;
        return {p, t.matmul(p, t.input(idx))};
    }

    static PredictorOutput read_output(const nn::Tape& t, const PredictorGraph& g) {
        PredictorOutput out;
        out.r = t.value(g.r)(0, 0);
        out.c = t.value(g.c)(0, 0);
        out.s = t.value(g.s)(0, 0);
        for (int i = 0; i < PredictorConfig::num_classes; ++i) out.p[size_t(i)] = t.value(g.p)(0, i);
        out.frame_scores = t.value(g.frame_scores).col(0);
        out.frame_weights = t.value(g.frame_weights).col(0);
        return out;
    }

    // Inference-only convenience: forward an assembled feature matrix.
    PredictorOutput forward(const FeatureMatrix& assembled) const {
        validate_feature_matrix(assembled);
        nn::Tape t;
        PredictorGraph g = build(t, t.input(assembled.data));
        return read_output(t, g);
    }

  private:
    PredictorConfig cfg_;
    int input_dim_ = 0;
    nn::BiLstmStack backbone_;
    detail::Mlp reg_score_, reg_weight_, cls_;
    nn::Parameter* agg_w_ = nullptr;
    nn::Parameter* agg_b_ = nullptr;
};

}  // namespace samos
