#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "samos/common.hpp"
#include "samos/nn/params.hpp"

namespace samos::nn {

// Reverse-mode autodiff over Eigen matrices. One Tape per forward pass;
// call backward() with a seed gradient on an output node, then read
// accumulated gradients from the ParameterStore leaves.
class Tape {
  public:
    using Var = int;

    const Eigen::MatrixXd& value(Var v) const { return nodes_[size_t(v)].value; }

    Var input(const Eigen::MatrixXd& m) {
        return push(m, false, nullptr, -1, {});
    }

    Var leaf(Parameter& p) { return push(p.value, true, &p, -1, {}); }

    // A single row of an embedding-style parameter; gradient scatters back
    // into that row only.
    Var leaf_row(Parameter& p, int row) {
        if (row < 0 || row >= p.value.rows())
            throw VocabularyError("embedding row out of range: " + std::to_string(row));
        return push(p.value.row(row), true, &p, row, {});
    }

    Var matmul(Var a, Var b) {
        Var y = push(nodes_[size_t(a)].value * nodes_[size_t(b)].value, needs(a) || needs(b));
        record(y, [this, a, b, y] {
            const auto& g = grad(y);
            accum(a, g * nodes_[size_t(b)].value.transpose());
            accum(b, nodes_[size_t(a)].value.transpose() * g);
        });
        return y;
    }

    // A * B^T
    Var matmul_nt(Var a, Var b) {
        Var y = push(nodes_[size_t(a)].value * nodes_[size_t(b)].value.transpose(),
                     needs(a) || needs(b));
        record(y, [this, a, b, y] {
            const auto& g = grad(y);
            accum(a, g * nodes_[size_t(b)].value);
            accum(b, g.transpose() * nodes_[size_t(a)].value);
        });
        return y;
    }

    Var add(Var a, Var b) {
        Var y = push(nodes_[size_t(a)].value + nodes_[size_t(b)].value, needs(a) || needs(b));
        record(y, [this, a, b, y] {
            accum(a, grad(y));
            accum(b, grad(y));
        });
        return y;
    }

    Var sub(Var a, Var b) {
        Var y = push(nodes_[size_t(a)].value - nodes_[size_t(b)].value, needs(a) || needs(b));
        record(y, [this, a, b, y] {
            accum(a, grad(y));
            accum(b, -grad(y));
        });
        return y;
    }

    // rows(a) x cols(a) plus a 1 x cols(a) bias broadcast over rows.
    Var add_rowvec(Var a, Var b) {
        Eigen::MatrixXd v = nodes_[size_t(a)].value;
        v.rowwise() += nodes_[size_t(b)].value.row(0);
        Var y = push(std::move(v), needs(a) || needs(b));
        record(y, [this, a, b, y] {
            accum(a, grad(y));
            accum(b, grad(y).colwise().sum());
        });
        return y;
    }

    Var cmul(Var a, Var b) {
        Var y = push(nodes_[size_t(a)].value.cwiseProduct(nodes_[size_t(b)].value),
                     needs(a) || needs(b));
        record(y, [this, a, b, y] {
            accum(a, grad(y).cwiseProduct(nodes_[size_t(b)].value));
            accum(b, grad(y).cwiseProduct(nodes_[size_t(a)].value));
        });
        return y;
    }

    Var scale(Var a, double k) {
        Var y = push(k * nodes_[size_t(a)].value, needs(a));
        record(y, [this, a, y, k] { accum(a, k * grad(y)); });
        return y;
    }

    Var tanh_(Var a) {
        Var y = push(nodes_[size_t(a)].value.array().tanh().matrix(), needs(a));
        record(y, [this, a, y] {
            const auto& v = nodes_[size_t(y)].value;
            accum(a, grad(y).cwiseProduct((1.0 - v.array().square()).matrix()));
        });
        return y;
    }

    Var sigmoid_(Var a) {
        Eigen::MatrixXd v =
            (1.0 / (1.0 + (-nodes_[size_t(a)].value.array()).exp())).matrix();
        Var y = push(std::move(v), needs(a));
        record(y, [this, a, y] {
            const auto& v = nodes_[size_t(y)].value;
            accum(a, grad(y).cwiseProduct((v.array() * (1.0 - v.array())).matrix()));
        });
        return y;
    }

    // x * sigmoid(x)
    Var swish(Var a) {
        const auto& x = nodes_[size_t(a)].value.array();
        Eigen::ArrayXXd s = 1.0 / (1.0 + (-x).exp());
        Var y = push((x * s).matrix(), needs(a));
        record(y, [this, a, y, s] {
            const auto& x = nodes_[size_t(a)].value.array();
            accum(a, (grad(y).array() * (s + x * s * (1.0 - s))).matrix());
        });
        return y;
    }

    // Softmax independently over each row.
    Var softmax_rows(Var a) {
        const auto& x = nodes_[size_t(a)].value;
        Eigen::MatrixXd y(x.rows(), x.cols());
        for (int r = 0; r < x.rows(); ++r) {
            Eigen::ArrayXd row = x.row(r).array();
            row -= row.maxCoeff();
            Eigen::ArrayXd e = row.exp();
            y.row(r) = (e / e.sum()).matrix().transpose();
        }
        Var out = push(std::move(y), needs(a));
        record(out, [this, a, out] {
            const auto& yv = nodes_[size_t(out)].value;
            const auto& g = grad(out);
            Eigen::MatrixXd da(yv.rows(), yv.cols());
            for (int r = 0; r < yv.rows(); ++r) {
                double dot = g.row(r).dot(yv.row(r));
                da.row(r) = yv.row(r).cwiseProduct(g.row(r) - Eigen::RowVectorXd::Constant(yv.cols(), dot));
            }
            accum(a, da);
        });
        return out;
    }

    // Softmax over the entries of a T x 1 column (frame-weight branch).
    Var softmax_col(Var a) {
        const auto& x = nodes_[size_t(a)].value;
        if (x.cols() != 1) throw InputError("softmax_col expects a column vector");
        Eigen::ArrayXd col = x.col(0).array();
        col -= col.maxCoeff();
        Eigen::ArrayXd e = col.exp();
        Eigen::MatrixXd y = (e / e.sum()).matrix();
        Var out = push(std::move(y), needs(a));
        record(out, [this, a, out] {
            const auto& yv = nodes_[size_t(out)].value;
            const auto& g = grad(out);
            double dot = (g.array() * yv.array()).sum();
            accum(a, (yv.array() * (g.array() - dot)).matrix());
        });
        return out;
    }

    Var concat_cols(const std::vector<Var>& parts) {
        int rows = int(nodes_[size_t(parts.at(0))].value.rows());
        int cols = 0;
        bool ng = false;
        for (Var p : parts) {
            if (nodes_[size_t(p)].value.rows() != rows)
                throw InputError("concat_cols: row mismatch");
            cols += int(nodes_[size_t(p)].value.cols());
            ng = ng || needs(p);
        }
        Eigen::MatrixXd v(rows, cols);
        int off = 0;
        for (Var p : parts) {
            int w = int(nodes_[size_t(p)].value.cols());
            v.middleCols(off, w) = nodes_[size_t(p)].value;
            off += w;
        }
        Var y = push(std::move(v), ng);
        record(y, [this, parts, y] {
            int off = 0;
            for (Var p : parts) {
                int w = int(nodes_[size_t(p)].value.cols());
                accum(p, grad(y).middleCols(off, w));
                off += w;
            }
        });
        return y;
    }

    Var concat_rows(const std::vector<Var>& parts) {
        int cols = int(nodes_[size_t(parts.at(0))].value.cols());
        int rows = 0;
        bool ng = false;
        for (Var p : parts) {
            if (nodes_[size_t(p)].value.cols() != cols)
                throw InputError("concat_rows: column mismatch");
            rows += int(nodes_[size_t(p)].value.rows());
            ng = ng || needs(p);
        }
        Eigen::MatrixXd v(rows, cols);
        int off = 0;
        for (Var p : parts) {
            int h = int(nodes_[size_t(p)].value.rows());
            v.middleRows(off, h) = nodes_[size_t(p)].value;
            off += h;
        }
        Var y = push(std::move(v), ng);
        record(y, [this, parts, y] {
            int off = 0;
            for (Var p : parts) {
                int h = int(nodes_[size_t(p)].value.rows());
                accum(p, grad(y).middleRows(off, h));
                off += h;
            }
        });
        return y;
    }

    Var slice_cols(Var a, int start, int n) {
        Var y = push(nodes_[size_t(a)].value.middleCols(start, n), needs(a));
        record(y, [this, a, y, start, n] {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nodes_[size_t(a)].value.rows(),
                                                      nodes_[size_t(a)].value.cols());
            g.middleCols(start, n) = grad(y);
            accum(a, g);
        });
        return y;
    }

    Var slice_rows(Var a, int start, int n) {
        Var y = push(nodes_[size_t(a)].value.middleRows(start, n), needs(a));
        record(y, [this, a, y, start, n] {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nodes_[size_t(a)].value.rows(),
                                                      nodes_[size_t(a)].value.cols());
            g.middleRows(start, n) = grad(y);
            accum(a, g);
        });
        return y;
    }

    Var sum_all(Var a) {
        Eigen::MatrixXd v(1, 1);
        v(0, 0) = nodes_[size_t(a)].value.sum();
        Var y = push(std::move(v), needs(a));
        record(y, [this, a, y] {
            accum(a, Eigen::MatrixXd::Constant(nodes_[size_t(a)].value.rows(),
                                               nodes_[size_t(a)].value.cols(), grad(y)(0, 0)));
        });
        return y;
    }

    // Column means: T x D -> 1 x D.
    Var mean_rows(Var a) {
        int t = int(nodes_[size_t(a)].value.rows());
        Var y = push(nodes_[size_t(a)].value.colwise().mean(), needs(a));
        record(y, [this, a, y, t] {
            accum(a, grad(y).replicate(t, 1) / double(t));
        });
        return y;
    }

    // 1 x D -> T x D broadcast.
    Var repeat_row(Var a, int t) {
        if (nodes_[size_t(a)].value.rows() != 1) throw InputError("repeat_row expects a row vector");
        Var y = push(nodes_[size_t(a)].value.replicate(t, 1), needs(a));
        record(y, [this, a, y] { accum(a, grad(y).colwise().sum()); });
        return y;
    }

    // Per-row layer norm with learned gain/bias (1 x D each).
    Var layernorm_rows(Var a, Var gamma, Var beta, double eps = 1e-5) {
        const auto& x = nodes_[size_t(a)].value;
        int rows = int(x.rows()), cols = int(x.cols());
        Eigen::MatrixXd xhat(rows, cols);
        Eigen::VectorXd inv_std(rows);
        for (int r = 0; r < rows; ++r) {
            double mu = x.row(r).mean();
            double var = (x.row(r).array() - mu).square().mean();
            inv_std(r) = 1.0 / std::sqrt(var + eps);
            xhat.row(r) = ((x.row(r).array() - mu) * inv_std(r)).matrix();
        }
        Eigen::MatrixXd y = xhat;
        for (int r = 0; r < rows; ++r)
            y.row(r) = xhat.row(r).cwiseProduct(nodes_[size_t(gamma)].value.row(0)) +
                       nodes_[size_t(beta)].value.row(0);
        Var out = push(std::move(y), needs(a) || needs(gamma) || needs(beta));
        record(out, [this, a, gamma, beta, out, xhat, inv_std] {
            const auto& g = grad(out);
            accum(gamma, (g.cwiseProduct(xhat)).colwise().sum());
            accum(beta, g.colwise().sum());
            int rows = int(g.rows()), cols = int(g.cols());
            Eigen::MatrixXd da(rows, cols);
            for (int r = 0; r < rows; ++r) {
                Eigen::RowVectorXd gd = g.row(r).cwiseProduct(nodes_[size_t(gamma)].value.row(0));
                double m1 = gd.mean();
                double m2 = gd.cwiseProduct(xhat.row(r)).mean();
                da.row(r) = inv_std(r) *
                            (gd.array() - m1 - xhat.row(r).array() * m2).matrix();
            }
            accum(a, da);
        });
        return out;
    }

    // Depthwise 1-D convolution along the time axis with same zero padding.
    // a: T x C, kernel: K x C (K odd).
    Var dwconv1d(Var a, Var kernel) {
        const auto& x = nodes_[size_t(a)].value;
        const auto& w = nodes_[size_t(kernel)].value;
        int t = int(x.rows()), c = int(x.cols()), k = int(w.rows());
        if (int(w.cols()) != c) throw InputError("dwconv1d: channel mismatch");
        if (k % 2 == 0) throw InputError("dwconv1d: kernel size must be odd");
        int half = k / 2;
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(t, c);
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < k; ++j) {
                int src = i + j - half;
                if (src < 0 || src >= t) continue;
                y.row(i).array() += x.row(src).array() * w.row(j).array();
            }
        Var out = push(std::move(y), needs(a) || needs(kernel));
        record(out, [this, a, kernel, out, t, c, k, half] {
            const auto& g = grad(out);
            const auto& x = nodes_[size_t(a)].value;
            const auto& w = nodes_[size_t(kernel)].value;
            Eigen::MatrixXd da = Eigen::MatrixXd::Zero(t, c);
            Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(k, c);
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < k; ++j) {
                    int src = i + j - half;
                    if (src < 0 || src >= t) continue;
                    da.row(src).array() += g.row(i).array() * w.row(j).array();
                    dw.row(j).array() += g.row(i).array() * x.row(src).array();
                }
            accum(a, da);
            accum(kernel, dw);
        });
        return out;
    }

    // Seed the output gradient and run the tape backwards. Leaf gradients
    // are accumulated into their parameters.
    void backward(Var out, const Eigen::MatrixXd& seed) {
        if (seed.rows() != nodes_[size_t(out)].value.rows() ||
            seed.cols() != nodes_[size_t(out)].value.cols())
            throw InputError("backward: seed shape mismatch");
        accum(out, seed);
        for (int i = out; i >= 0; --i) {
            auto& n = nodes_[size_t(i)];
            if (!n.requires_grad || n.grad.size() == 0) continue;
            if (n.back) n.back();
            if (n.param) {
                if (n.param_row >= 0)
                    n.param->grad.row(n.param_row) += n.grad.row(0);
                else
                    n.param->grad += n.grad;
            }
        }
    }

    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Eigen::MatrixXd value;
        Eigen::MatrixXd grad;  // empty until touched
        std::function<void()> back;
        Parameter* param = nullptr;
        int param_row = -1;
        bool requires_grad = false;
    };

    bool needs(Var v) const { return nodes_[size_t(v)].requires_grad; }

    const Eigen::MatrixXd& grad(Var v) const { return nodes_[size_t(v)].grad; }

    template <typename M>
    void accum(Var v, const M& g) {
        auto& n = nodes_[size_t(v)];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0)
            n.grad = g;
        else
            n.grad += g;
    }

    template <typename M>
    Var push(M&& value, bool requires_grad, Parameter* p = nullptr, int row = -1,
             std::function<void()> back = {}) {
        Node n;
        n.value = std::forward<M>(value);
        n.requires_grad = requires_grad;
        n.param = p;
        n.param_row = row;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var(nodes_.size() - 1);
    }

    void record(Var v, std::function<void()> back) {
        if (nodes_[size_t(v)].requires_grad) nodes_[size_t(v)].back = std::move(back);
    }

    std::vector<Node> nodes_;
};

}  // namespace samos::nn
