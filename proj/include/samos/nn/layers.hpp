#pragma once

#include <string>
#include <vector>

#include "samos/nn/params.hpp"
#include "samos/nn/tape.hpp"

namespace samos::nn {

struct Linear {
    Parameter* W = nullptr;  // in x out
    Parameter* b = nullptr;  // 1 x out

    static Linear create(ParameterStore& ps, const std::string& name, const std::string& group,
                         int in, int out, std::mt19937_64& rng) {
        Linear l;
        l.W = &ps.create(name + ".W", group, in, out);
        l.b = &ps.create(name + ".b", group, 1, out);
        init_uniform(*l.W, rng, in);
        init_uniform(*l.b, rng, in);
        return l;
    }

    static Linear lookup(ParameterStore& ps, const std::string& name) {
        return Linear{&ps.at(name + ".W"), &ps.at(name + ".b")};
    }

    Tape::Var apply(Tape& t, Tape::Var x) const {
        return t.add_rowvec(t.matmul(x, t.leaf(*W)), t.leaf(*b));
    }
};

struct LayerNorm {
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;

    static LayerNorm create(ParameterStore& ps, const std::string& name, const std::string& group,
                            int dim) {
        LayerNorm ln;
        ln.gamma = &ps.create(name + ".gamma", group, 1, dim);
        ln.beta = &ps.create(name + ".beta", group, 1, dim);
        ln.gamma->value.setOnes();
        return ln;
    }

    Tape::Var apply(Tape& t, Tape::Var x) const {
        return t.layernorm_rows(x, t.leaf(*gamma), t.leaf(*beta));
    }
};

// One direction of an LSTM layer over a T x I sequence; returns T x H
// hidden states in original time order.
struct LstmDirection {
    Parameter* Wx = nullptr;  // I x 4H
    Parameter* Wh = nullptr;  // H x 4H
    Parameter* b = nullptr;   // 1 x 4H
    int hidden = 0;
    bool reverse = false;

    static LstmDirection create(ParameterStore& ps, const std::string& name,
                                const std::string& group, int in, int hidden, bool reverse,
                                std::mt19937_64& rng) {
        LstmDirection d;
        d.Wx = &ps.create(name + ".Wx", group, in, 4 * hidden);
        d.Wh = &ps.create(name + ".Wh", group, hidden, 4 * hidden);
        d.b = &ps.create(name + ".b", group, 1, 4 * hidden);
        d.hidden = hidden;
        d.reverse = reverse;
        init_uniform(*d.Wx, rng, in);
        init_uniform(*d.Wh, rng, hidden);
        init_uniform(*d.b, rng, hidden);
        return d;
    }

    Tape::Var apply(Tape& t, Tape::Var x) const {
        int T = int(t.value(x).rows());
        int H = hidden;
        Tape::Var wx = t.leaf(*Wx), wh = t.leaf(*Wh), bias = t.leaf(*b);
        Tape::Var h = t.input(Eigen::MatrixXd::Zero(1, H));
        Tape::Var c = t.input(Eigen::MatrixXd::Zero(1, H));
        std::vector<Tape::Var> outs(static_cast<size_t>(T));
        for (int step = 0; step < T; ++step) {
            int ti = reverse ? T - 1 - step : step;
            Tape::Var xt = t.slice_rows(x, ti, 1);
            Tape::Var gates =
                t.add_rowvec(t.add(t.matmul(xt, wx), t.matmul(h, wh)), bias);
            Tape::Var ig = t.sigmoid_(t.slice_cols(gates, 0, H));
            Tape::Var fg = t.sigmoid_(t.slice_cols(gates, H, H));
            Tape::Var gg = t.tanh_(t.slice_cols(gates, 2 * H, H));
            Tape::Var og = t.sigmoid_(t.slice_cols(gates, 3 * H, H));
            c = t.add(t.cmul(fg, c), t.cmul(ig, gg));
            h = t.cmul(og, t.tanh_(c));
            outs[size_t(ti)] = h;
        }
        return t.concat_rows(outs);
    }
};

// Stack of bidirectional LSTM layers; each layer outputs T x 2H.
struct BiLstmStack {
    std::vector<LstmDirection> fw, bw;

    static BiLstmStack create(ParameterStore& ps, const std::string& name,
                              const std::string& group, int in, int hidden, int layers,
                              std::mt19937_64& rng) {
        BiLstmStack s;
        int cur = in;
        for (int l = 0; l < layers; ++l) {
            std::string base = name + ".l" + std::to_string(l);
            s.fw.push_back(LstmDirection::create(ps, base + ".fw", group, cur, hidden, false, rng));
            s.bw.push_back(LstmDirection::create(ps, base + ".bw", group, cur, hidden, true, rng));
            cur = 2 * hidden;
        }
        return s;
    }

    Tape::Var apply(Tape& t, Tape::Var x) const {
        Tape::Var cur = x;
        for (size_t l = 0; l < fw.size(); ++l)
            cur = t.concat_cols({fw[l].apply(t, cur), bw[l].apply(t, cur)});
        return cur;
    }
};

// Multi-head self-attention over a T x D sequence.
struct SelfAttention {
    Linear q, k, v, o;
    int heads = 0;
    int dim = 0;

    static SelfAttention create(ParameterStore& ps, const std::string& name,
                                const std::string& group, int dim, int heads,
                                std::mt19937_64& rng) {
        if (dim % heads != 0)
            throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by " +
                              std::to_string(heads) + " heads");
        SelfAttention a;
        a.q = Linear::create(ps, name + ".q", group, dim, dim, rng);
        a.k = Linear::create(ps, name + ".k", group, dim, dim, rng);
        a.v = Linear::create(ps, name + ".v", group, dim, dim, rng);
        a.o = Linear::create(ps, name + ".o", group, dim, dim, rng);
        a.heads = heads;
        a.dim = dim;
        return a;
    }

    Tape::Var apply(Tape& t, Tape::Var x) const {
        int dh = dim / heads;
        Tape::Var Q = q.apply(t, x), K = k.apply(t, x), V = v.apply(t, x);
        std::vector<Tape::Var> outs;
        for (int h = 0; h < heads; ++h) {
            Tape::Var qh = t.slice_cols(Q, h * dh, dh);
            Tape::Var kh = t.slice_cols(K, h * dh, dh);
            Tape::Var vh = t.slice_cols(V, h * dh, dh);
            Tape::Var scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
            outs.push_back(t.matmul(t.softmax_rows(scores), vh));
        }
        return o.apply(t, t.concat_cols(outs));
    }
};

// Conformer-style context block: macaron feed-forward halves, multi-head
// self-attention, and a depthwise-convolution module, all with residuals
// and a final layer norm.
struct ConformerBlock {
    LayerNorm ln_ff1, ln_att, ln_conv, ln_conv_mid, ln_ff2, ln_out;
    Linear ff1_a, ff1_b, ff2_a, ff2_b;
    SelfAttention att;
    Linear conv_pw1, conv_pw2;
    Parameter* conv_dw = nullptr;  // K x D depthwise kernel
    int dim = 0;

    static ConformerBlock create(ParameterStore& ps, const std::string& name,
                                 const std::string& group, int dim, int heads, int ff_expansion,
                                 int conv_kernel, std::mt19937_64& rng) {
        ConformerBlock c;
        c.dim = dim;
        int ff = dim * ff_expansion;
        c.ln_ff1 = LayerNorm::create(ps, name + ".ln_ff1", group, dim);
        c.ff1_a = Linear::create(ps, name + ".ff1_a", group, dim, ff, rng);
        c.ff1_b = Linear::create(ps, name + ".ff1_b", group, ff, dim, rng);
        c.ln_att = LayerNorm::create(ps, name + ".ln_att", group, dim);
        c.att = SelfAttention::create(ps, name + ".att", group, dim, heads, rng);
        c.ln_conv = LayerNorm::create(ps, name + ".ln_conv", group, dim);
        c.conv_pw1 = Linear::create(ps, name + ".conv_pw1", group, dim, 2 * dim, rng);
        c.conv_dw = &ps.create(name + ".conv_dw", group, conv_kernel, dim);
        init_uniform(*c.conv_dw, rng, conv_kernel);
        c.ln_conv_mid = LayerNorm::create(ps, name + ".ln_conv_mid", group, dim);
        c.conv_pw2 = Linear::create(ps, name + ".conv_pw2", group, dim, dim, rng);
        c.ln_ff2 = LayerNorm::create(ps, name + ".ln_ff2", group, dim);
        c.ff2_a = Linear::create(ps, name + ".ff2_a", group, dim, ff, rng);
        c.ff2_b = Linear::create(ps, name + ".ff2_b", group, ff, dim, rng);
        c.ln_out = LayerNorm::create(ps, name + ".ln_out", group, dim);
        return c;
    }

    Tape::Var apply(Tape& t, Tape::Var x) const {
        // half-step feed-forward
        Tape::Var y = ff1_b.apply(t, t.swish(ff1_a.apply(t, ln_ff1.apply(t, x))));
        x = t.add(x, t.scale(y, 0.5));
        // self-attention
        x = t.add(x, att.apply(t, ln_att.apply(t, x)));
        // convolution module: pointwise -> GLU -> depthwise -> norm -> swish -> pointwise
        Tape::Var c = conv_pw1.apply(t, ln_conv.apply(t, x));
        Tape::Var gated = t.cmul(t.slice_cols(c, 0, dim), t.sigmoid_(t.slice_cols(c, dim, dim)));
        Tape::Var conv = t.dwconv1d(gated, t.leaf(*conv_dw));
        conv = conv_pw2.apply(t, t.swish(ln_conv_mid.apply(t, conv)));
        x = t.add(x, conv);
        // second half-step feed-forward
        y = ff2_b.apply(t, t.swish(ff2_a.apply(t, ln_ff2.apply(t, x))));
        x = t.add(x, t.scale(y, 0.5));
        return ln_out.apply(t, x);
    }
};

}  // namespace samos::nn
