#include <catch2/catch_amalgamated.hpp>
#include <functional>
#include <random>

#include "samos/nn/layers.hpp"
#include "samos/nn/params.hpp"
#include "samos/nn/tape.hpp"

using namespace samos;
using nn::Tape;

namespace {

// Forward builder: constructs a graph on the given tape and returns a
// scalar (1x1) output node.
using Builder = std::function<Tape::Var(Tape&)>;

double eval_scalar(const Builder& build) {
    Tape t;
    return t.value(build(t))(0, 0);
}

// Checks d(out)/d(param) for every entry of every parameter in the store
// against central finite differences.
void check_param_grads(nn::ParameterStore& ps, const Builder& build, double h = 1e-6,
                       double tol = 1e-5) {
    ps.zero_grads();
    Tape t;
    Tape::Var out = build(t);
    t.backward(out, Eigen::MatrixXd::Ones(1, 1));
    for (nn::Parameter* p : ps.all()) {
        for (int i = 0; i < p->value.rows(); ++i)
            for (int j = 0; j < p->value.cols(); ++j) {
                double save = p->value(i, j);
                p->value(i, j) = save + h;
                double hi = eval_scalar(build);
                p->value(i, j) = save - h;
                double lo = eval_scalar(build);
                p->value(i, j) = save;
                double numeric = (hi - lo) / (2.0 * h);
                double analytic = p->grad(i, j);
                double denom = std::max({std::abs(numeric), std::abs(analytic), 1.0});
                INFO(p->name << "(" << i << "," << j << ")");
                CHECK(std::abs(numeric - analytic) / denom < tol);
            }
    }
}

Eigen::MatrixXd random_matrix(int r, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

}  // namespace

TEST_CASE("tape forward values for elementary ops") {
    Tape t;
    Eigen::MatrixXd a = random_matrix(3, 4, 1), b = random_matrix(4, 2, 2);
    Tape::Var va = t.input(a), vb = t.input(b);
    CHECK(t.value(t.matmul(va, vb)) == a * b);
    CHECK(t.value(t.tanh_(va)) == a.array().tanh().matrix());
    CHECK(t.value(t.scale(va, 2.5)) == 2.5 * a);
    CHECK(t.value(t.sum_all(va))(0, 0) == Catch::Approx(a.sum()));
    CHECK(t.value(t.mean_rows(va)) == a.colwise().mean());

    // Row softmaxes sum to 1.
    Eigen::MatrixXd sm = t.value(t.softmax_rows(va));
    for (int r = 0; r < sm.rows(); ++r) CHECK(sm.row(r).sum() == Catch::Approx(1.0));
    Eigen::MatrixXd col = random_matrix(5, 1, 3);
    Eigen::MatrixXd sc = t.value(t.softmax_col(t.input(col)));
    CHECK(sc.sum() == Catch::Approx(1.0));
    for (int r = 0; r < 5; ++r) CHECK(sc(r, 0) > 0.0);
}

TEST_CASE("gradients of elementary ops match finite differences") {
    nn::ParameterStore ps;
    auto& A = ps.create("A", "g", 3, 4);
    auto& B = ps.create("B", "g", 4, 3);
    auto& c = ps.create("c", "g", 1, 4);
    A.value = random_matrix(3, 4, 11);
    B.value = random_matrix(4, 3, 12);
    c.value = random_matrix(1, 4, 13);

    SECTION("matmul / add / tanh / sum") {
        check_param_grads(ps, [&](Tape& t) {
            Tape::Var y = t.tanh_(t.matmul(t.leaf(A), t.leaf(B)));
            return t.sum_all(y);
        });
    }
    SECTION("add_rowvec / sigmoid / cmul") {
        check_param_grads(ps, [&](Tape& t) {
            Tape::Var x = t.add_rowvec(t.leaf(A), t.leaf(c));
            return t.sum_all(t.cmul(t.sigmoid_(x), x));
        });
    }
    SECTION("matmul_nt / softmax_rows / swish") {
        check_param_grads(ps, [&](Tape& t) {
            Tape::Var s = t.softmax_rows(t.matmul_nt(t.leaf(A), t.leaf(A)));
            return t.sum_all(t.swish(t.matmul(s, t.leaf(A))));
        });
    }
    SECTION("slice / concat / sub / scale / mean_rows") {
        check_param_grads(ps, [&](Tape& t) {
            Tape::Var a = t.leaf(A);
            Tape::Var left = t.slice_cols(a, 0, 2), right = t.slice_cols(a, 2, 2);
            Tape::Var cat = t.concat_cols({t.sub(left, right), t.scale(right, 0.3)});
            Tape::Var rows = t.concat_rows({t.slice_rows(cat, 0, 1), t.slice_rows(cat, 1, 2)});
            return t.sum_all(t.mean_rows(rows));
        });
    }
    SECTION("softmax_col weighting") {
        nn::ParameterStore ps2;
        auto& w = ps2.create("w", "g", 5, 1);
        auto& s = ps2.create("s", "g", 5, 1);
        w.value = random_matrix(5, 1, 14);
        s.value = random_matrix(5, 1, 15);
        check_param_grads(ps2, [&](Tape& t) {
            return t.sum_all(t.cmul(t.softmax_col(t.leaf(w)), t.leaf(s)));
        });
    }
    SECTION("repeat_row broadcast") {
        check_param_grads(ps, [&](Tape& t) {
            Tape::Var rep = t.repeat_row(t.leaf(c), 4);
            return t.sum_all(t.tanh_(t.cmul(rep, t.matmul(t.leaf(B), t.leaf(A)))));
        });
    }
}

TEST_CASE("leaf_row scatters gradient into one embedding row") {
    nn::ParameterStore ps;
    auto& E = ps.create("E", "g", 4, 3);
    E.value = random_matrix(4, 3, 21);
    CHECK_THROWS_AS(
        [&] {
            Tape t;
            t.leaf_row(E, 4);
        }(),
        VocabularyError);

    ps.zero_grads();
    Tape t;
    Tape::Var out = t.sum_all(t.tanh_(t.leaf_row(E, 2)));
    t.backward(out, Eigen::MatrixXd::Ones(1, 1));
    CHECK(E.grad.row(0).norm() == 0.0);
    CHECK(E.grad.row(1).norm() == 0.0);
    CHECK(E.grad.row(3).norm() == 0.0);
    CHECK(E.grad.row(2).norm() > 0.0);

    check_param_grads(ps, [&](Tape& tt) {
        return tt.sum_all(tt.tanh_(tt.leaf_row(E, 2)));
    });
}

TEST_CASE("layernorm gradient matches finite differences") {
    nn::ParameterStore ps;
    auto& X = ps.create("X", "g", 3, 6);
    X.value = random_matrix(3, 6, 31);
    std::mt19937_64 rng(32);
    nn::LayerNorm ln = nn::LayerNorm::create(ps, "ln", "g", 6);
    nn::init_uniform(*ln.beta, rng, 6);
    ln.gamma->value = (random_matrix(1, 6, 33).array().abs() + 0.5).matrix();
    check_param_grads(ps, [&](Tape& t) {
        return t.sum_all(t.tanh_(ln.apply(t, t.leaf(X))));
    });
}

TEST_CASE("depthwise conv gradient matches finite differences") {
    nn::ParameterStore ps;
    auto& X = ps.create("X", "g", 6, 3);
    auto& K = ps.create("K", "g", 5, 3);
    X.value = random_matrix(6, 3, 41);
    K.value = random_matrix(5, 3, 42);
    check_param_grads(ps, [&](Tape& t) {
        return t.sum_all(t.tanh_(t.dwconv1d(t.leaf(X), t.leaf(K))));
    });

    Tape t;
    CHECK_THROWS_AS(t.dwconv1d(t.input(random_matrix(6, 3, 1)), t.input(random_matrix(4, 3, 2))),
                    InputError);
    CHECK_THROWS_AS(t.dwconv1d(t.input(random_matrix(6, 3, 1)), t.input(random_matrix(5, 2, 2))),
                    InputError);
}

TEST_CASE("linear layer gradient matches finite differences") {
    nn::ParameterStore ps;
    std::mt19937_64 rng(51);
    auto& X = ps.create("X", "g", 4, 5);
    X.value = random_matrix(4, 5, 52);
    nn::Linear lin = nn::Linear::create(ps, "lin", "g", 5, 3, rng);
    check_param_grads(ps, [&](Tape& t) {
        return t.sum_all(t.tanh_(lin.apply(t, t.leaf(X))));
    });
}

TEST_CASE("lstm direction gradient matches finite differences") {
    nn::ParameterStore ps;
    std::mt19937_64 rng(61);
    auto& X = ps.create("X", "g", 4, 3);
    X.value = random_matrix(4, 3, 62);
    nn::LstmDirection fw = nn::LstmDirection::create(ps, "fw", "g", 3, 2, false, rng);
    nn::LstmDirection bw = nn::LstmDirection::create(ps, "bw", "g", 3, 2, true, rng);
    check_param_grads(ps, [&](Tape& t) {
        Tape::Var x = t.leaf(X);
        return t.sum_all(t.concat_cols({fw.apply(t, x), bw.apply(t, x)}));
    });
}

TEST_CASE("reverse lstm output is forward lstm on reversed input, reversed") {
    nn::ParameterStore ps;
    std::mt19937_64 rng(71);
    nn::LstmDirection fw = nn::LstmDirection::create(ps, "d", "g", 3, 2, false, rng);
    nn::LstmDirection bw = fw;
    bw.reverse = true;

    Eigen::MatrixXd x = random_matrix(5, 3, 72);
    Eigen::MatrixXd xr = x.colwise().reverse();
    Tape t;
    Eigen::MatrixXd out_bw = t.value(bw.apply(t, t.input(x)));
    Eigen::MatrixXd out_fw_rev = t.value(fw.apply(t, t.input(xr)));
    CHECK((out_bw - out_fw_rev.colwise().reverse()).norm() < 1e-12);
}

TEST_CASE("bilstm stack shape and gradient") {
    nn::ParameterStore ps;
    std::mt19937_64 rng(81);
    auto& X = ps.create("X", "g", 4, 3);
    X.value = random_matrix(4, 3, 82);
    nn::BiLstmStack stack = nn::BiLstmStack::create(ps, "bb", "g", 3, 2, 2, rng);
    {
        Tape t;
        CHECK(t.value(stack.apply(t, t.leaf(X))).cols() == 4);
        CHECK(t.value(stack.apply(t, t.leaf(X))).rows() == 4);
    }
    check_param_grads(ps, [&](Tape& t) { return t.sum_all(stack.apply(t, t.leaf(X))); },
                      1e-6, 2e-5);
}

TEST_CASE("self attention gradient matches finite differences") {
    nn::ParameterStore ps;
    std::mt19937_64 rng(91);
    auto& X = ps.create("X", "g", 4, 4);
    X.value = random_matrix(4, 4, 92);
    nn::SelfAttention att = nn::SelfAttention::create(ps, "att", "g", 4, 2, rng);
    check_param_grads(ps, [&](Tape& t) { return t.sum_all(att.apply(t, t.leaf(X))); });
    CHECK_THROWS_AS(nn::SelfAttention::create(ps, "bad", "g", 5, 2, rng), ConfigError);
}

TEST_CASE("conformer block gradient matches finite differences") {
    nn::ParameterStore ps;
    std::mt19937_64 rng(101);
    auto& X = ps.create("X", "g", 5, 4);
    X.value = random_matrix(5, 4, 102);
    nn::ConformerBlock blk = nn::ConformerBlock::create(ps, "cf", "g", 4, 2, 2, 3, rng);
    {
        Tape t;
        Eigen::MatrixXd y = t.value(blk.apply(t, t.leaf(X)));
        CHECK(y.rows() == 5);
        CHECK(y.cols() == 4);
    }
    check_param_grads(ps, [&](Tape& t) { return t.sum_all(blk.apply(t, t.leaf(X))); },
                      1e-6, 2e-5);
}

TEST_CASE("parameter store basics") {
    nn::ParameterStore ps;
    ps.create("a", "g1", 2, 2).value.setOnes();
    CHECK_THROWS_AS(ps.create("a", "g1", 2, 2), ConfigError);
    CHECK_THROWS_AS(ps.at("missing"), ConfigError);
    CHECK(ps.has("a"));

    auto& b = ps.create("b", "g2", 2, 2);
    b.value.setOnes();
    ps.at("a").grad.setOnes();
    b.grad.setOnes();
    ps.sgd_step(0.5, {"g2"});
    CHECK(ps.at("a").value == Eigen::MatrixXd::Constant(2, 2, 0.5));
    CHECK(b.value == Eigen::MatrixXd::Ones(2, 2));  // frozen group untouched

    ps.zero_grads();
    CHECK(ps.at("a").grad.norm() == 0.0);
}

TEST_CASE("backward rejects seed shape mismatch") {
    Tape t;
    Tape::Var x = t.input(Eigen::MatrixXd::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(x, Eigen::MatrixXd::Ones(1, 1)), InputError);
}
