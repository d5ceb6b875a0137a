#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "seqnp/autodiff.hpp"
#include "seqnp/rng.hpp"
#include "seqnp/tensor.hpp"

using namespace seqnp;

TEST_CASE("matmul forward", "[tensor]") {
    Tape tape;
    SECTION("identity passes a column through") {
        Var i2 = tape.constant(Tensor::identity(2));
        Var col = tape.constant(Tensor({2, 1}, {3, 4}));
        Var out = matmul(i2, col);
        REQUIRE(out.value() == Tensor({2, 1}, {3, 4}));
    }
    SECTION("hand multiplied row times column") {
        Var a = tape.constant(Tensor({1, 2}, {1, 2}));
        Var b = tape.constant(Tensor({2, 1}, {3, 4}));
        REQUIRE(matmul(a, b).value() == Tensor({1, 1}, {11}));
    }
    SECTION("zero matrix annihilates") {
        Var z = tape.constant(Tensor::zeros({2, 3}));
        Var b = tape.constant(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
        REQUIRE(matmul(z, b).value() == Tensor::zeros({2, 2}));
    }
    SECTION("shape mismatch names both shapes") {
        Var a = tape.constant(Tensor::zeros({2, 3}));
        Var b = tape.constant(Tensor::zeros({4, 5}));
        try {
            matmul(a, b);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            const std::string msg = e.what();
            REQUIRE(msg.find("[2x3]") != std::string::npos);
            REQUIRE(msg.find("[4x5]") != std::string::npos);
        }
    }
}

TEST_CASE("elementwise forward values", "[tensor]") {
    Tape tape;
    Var x = tape.constant(Tensor({1, 3}, {-2.0, 0.0, 1.5}));
    SECTION("relu clamps negatives") {
        REQUIRE(relu(x).value() == Tensor({1, 3}, {0.0, 0.0, 1.5}));
    }
    SECTION("softplus(0) is log 2") {
        Var y = softplus(tape.constant(Tensor::scalar(0.0)));
        REQUIRE_THAT(y.value().scalar_value(),
                     Catch::Matchers::WithinAbs(std::log(2.0), 1e-15));
    }
    SECTION("exp(0) = 1") {
        REQUIRE(seqnp::exp(tape.constant(Tensor::scalar(0.0))).value().scalar_value() == 1.0);
    }
    SECTION("log rejects non-positive input") {
        REQUIRE_THROWS_AS(seqnp::log(tape.constant(Tensor::scalar(0.0))), DomainError);
        REQUIRE_THROWS_AS(seqnp::log(tape.constant(Tensor::scalar(-1.0))), DomainError);
    }
    SECTION("binary ops reject non-broadcastable shapes") {
        Var a = tape.constant(Tensor::zeros({2, 2}));
        Var b = tape.constant(Tensor::zeros({1, 2}));
        REQUIRE_THROWS_AS(add(a, b), ShapeError);
    }
    SECTION("scalar operand broadcasts") {
        Var s = tape.constant(Tensor::scalar(2.0));
        REQUIRE(mul(x, s).value() == Tensor({1, 3}, {-4.0, 0.0, 3.0}));
        REQUIRE(add(s, x).value() == Tensor({1, 3}, {0.0, 2.0, 3.5}));
    }
}

TEST_CASE("backward basics", "[tensor]") {
    SECTION("power rule: d(x^2)/dx at 3 is 6") {
        Tape tape;
        Var x = tape.leaf(Tensor::scalar(3.0), "x");
        Var loss = square(x);
        tape.backward(loss);
        REQUIRE(tape.leaf_gradients().at("x").scalar_value() == 6.0);
    }
    SECTION("sum(W v) gradient w.r.t. W is ones * v^T") {
        Tape tape;
        Var w = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), "W");
        Var v = tape.constant(Tensor({3, 1}, {7, 8, 9}));
        tape.backward(sum_all(matmul(w, v)));
        REQUIRE(tape.leaf_gradients().at("W") == Tensor({2, 3}, {7, 8, 9, 7, 8, 9}));
    }
    SECTION("parameter unused by the loss gets a zero gradient") {
        Tape tape;
        Var x = tape.leaf(Tensor::scalar(2.0), "x");
        Var unused = tape.leaf(Tensor({1, 2}, {1, 1}), "unused");
        tape.backward(square(x));
        REQUIRE(tape.leaf_gradients().at("unused") == Tensor::zeros({1, 2}));
    }
    SECTION("non-scalar loss is rejected") {
        Tape tape;
        Var x = tape.leaf(Tensor({1, 2}, {1, 2}), "x");
        REQUIRE_THROWS_AS(tape.backward(square(x)), ContractError);
    }
}

TEST_CASE("gradient_check harness", "[tensor]") {
    SECTION("quadratic is exact for central differences") {
        NamedTensors params{{"x", Tensor::scalar(3.0)}};
        const double err = gradient_check(
            [](Tape&, const std::map<std::string, Var>& p) { return square(p.at("x")); },
            params, 1e-5);
        REQUIRE(err < 1e-8);
    }
    SECTION("constant function has zero error") {
        NamedTensors params{{"x", Tensor::scalar(1.0)}};
        const double err = gradient_check(
            [](Tape& t, const std::map<std::string, Var>& p) {
                return mul(sum_all(p.at("x")), 0.0);
            },
            params, 1e-5);
        REQUIRE(err == 0.0);
    }
}

namespace {

enum class BinKind { add, sub, mul, divk };

// One gradient check per primitive on random inputs in [-2, 2] (restricted
// where the domain demands it). The scalar loss mixes coordinates so every
// input entry matters.
double check_primitive(const GraphFn& f, const NamedTensors& params) {
    return gradient_check(f, params, 1e-6);
}

Var mix_to_scalar(Tape& tape, const Var& v) {
    std::mt19937_64 rng = make_engine(99, v.value().numel());
    Tensor w = uniform_tensor(rng, v.value().shape(), 0.5, 1.5);
    return sum_all(mul(v, tape.constant(w)));
}

}  // namespace

TEST_CASE("per-primitive gradients match finite differences to 1e-6", "[tensor][gradcheck]") {
    std::mt19937_64 rng = make_engine(7, 0);
    const double tol = 1e-6;

    NamedTensors mats{{"a", uniform_tensor(rng, {3, 4}, -2, 2)},
                      {"b", uniform_tensor(rng, {4, 2}, -2, 2)}};
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, matmul(p.at("a"), p.at("b")));
                },
                mats) < tol);

    NamedTensors pair{{"a", uniform_tensor(rng, {2, 3}, -2, 2)},
                      {"b", uniform_tensor(rng, {2, 3}, 0.2, 2)}};
    for (auto op : {BinKind::add, BinKind::sub, BinKind::mul, BinKind::divk}) {
        REQUIRE(check_primitive(
                    [op](Tape& t, const std::map<std::string, Var>& p) {
                        Var a = p.at("a"), b = p.at("b");
                        Var r = op == BinKind::add   ? add(a, b)
                                : op == BinKind::sub ? sub(a, b)
                                : op == BinKind::mul ? mul(a, b)
                                                     : div(a, b);
                        return mix_to_scalar(t, r);
                    },
                    pair) < tol);
    }

    // scalar-with-tensor broadcasting path
    NamedTensors scalar_mix{{"a", uniform_tensor(rng, {2, 2}, -2, 2)},
                            {"s", uniform_tensor(rng, {1}, 0.5, 1.5)}};
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, mul(add(p.at("a"), p.at("s")), p.at("s")));
                },
                scalar_mix) < tol);

    // unary ops; inputs kept away from relu's kink and log's boundary
    NamedTensors away{{"x", uniform_tensor(rng, {2, 3}, 0.1, 2)}};
    for (int which = 0; which < 5; ++which) {
        REQUIRE(check_primitive(
                    [which](Tape& t, const std::map<std::string, Var>& p) {
                        Var x = p.at("x");
                        Var r = which == 0   ? relu(x)
                                : which == 1 ? softplus(x)
                                : which == 2 ? seqnp::exp(x)
                                : which == 3 ? seqnp::log(x)
                                             : square(x);
                        return mix_to_scalar(t, r);
                    },
                    away) < tol);
    }
    NamedTensors negside{{"x", uniform_tensor(rng, {2, 3}, -2, -0.1)}};
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, relu(p.at("x")));
                },
                negside) < tol);

    NamedTensors lin{{"x", uniform_tensor(rng, {3, 4}, -2, 2)},
                     {"w", uniform_tensor(rng, {4, 2}, -2, 2)},
                     {"b", uniform_tensor(rng, {1, 2}, -2, 2)}};
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, linear(p.at("x"), p.at("w"), p.at("b")));
                },
                lin) < tol);

    NamedTensors single{{"x", uniform_tensor(rng, {3, 4}, -2, 2)}};
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, transpose(p.at("x")));
                },
                single) < tol);
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, gather_rows(p.at("x"), {2, 0, 2}));
                },
                single) < tol);
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, mean_rows(p.at("x")));
                },
                single) < tol);
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, softmax_rows(p.at("x")));
                },
                single) < tol);
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mean_all(square(p.at("x")));
                },
                single) < tol);

    NamedTensors rowp{{"r", uniform_tensor(rng, {1, 4}, -2, 2)}};
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, broadcast_rows(p.at("r"), 5));
                },
                rowp) < tol);

    NamedTensors cat{{"a", uniform_tensor(rng, {2, 3}, -2, 2)},
                     {"b", uniform_tensor(rng, {2, 2}, -2, 2)}};
    REQUIRE(check_primitive(
                [](Tape& t, const std::map<std::string, Var>& p) {
                    return mix_to_scalar(t, concat_cols(p.at("a"), p.at("b")));
                },
                cat) < tol);
}

TEST_CASE("forward determinism is bit exact", "[tensor]") {
    std::mt19937_64 rng = make_engine(21, 0);
    const Tensor a = uniform_tensor(rng, {4, 5}, -2, 2);
    const Tensor b = uniform_tensor(rng, {5, 3}, -2, 2);
    auto compute = [&]() {
        Tape tape;
        Var out = softmax_rows(relu(matmul(tape.constant(a), tape.constant(b))));
        return out.value();
    };
    const Tensor first = compute();
    const Tensor second = compute();
    REQUIRE(std::memcmp(first.data(), second.data(), first.numel() * sizeof(double)) == 0);
}

TEST_CASE("backward is linear in the loss", "[tensor]") {
    std::mt19937_64 rng = make_engine(31, 0);
    NamedTensors params{{"x", uniform_tensor(rng, {2, 3}, 0.2, 2)}};
    const double a = 1.7, b = -0.6;

    GraphFn f = [](Tape&, const std::map<std::string, Var>& p) {
        return sum_all(square(p.at("x")));
    };
    GraphFn g = [](Tape&, const std::map<std::string, Var>& p) {
        return sum_all(softplus(p.at("x")));
    };
    GraphFn combo = [&](Tape& t, const std::map<std::string, Var>& p) {
        return add(mul(f(t, p), a), mul(g(t, p), b));
    };

    const Tensor gf = graph_gradients(f, params).at("x");
    const Tensor gg = graph_gradients(g, params).at("x");
    const Tensor gc = graph_gradients(combo, params).at("x");
    for (std::size_t i = 0; i < gc.numel(); ++i) {
        REQUIRE_THAT(gc[i], Catch::Matchers::WithinAbs(a * gf[i] + b * gg[i], 1e-12));
    }
}
