#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "seqnp/distributions.hpp"
#include "seqnp/rng.hpp"

using namespace seqnp;
using Catch::Matchers::WithinAbs;

TEST_CASE("rsample", "[distributions]") {
    SECTION("degenerate std collapses onto the mean") {
        DiagonalGaussian g{Tensor({1, 2}, {1.0, -0.5}), Tensor({1, 2}, {1e-12, 1e-12})};
        const Tensor s = rsample(g, Tensor({1, 2}, {3.0, -4.0}));
        REQUIRE_THAT(s[0], WithinAbs(1.0, 1e-11));
        REQUIRE_THAT(s[1], WithinAbs(-0.5, 1e-11));
    }
    SECTION("standard normal passes the noise through") {
        DiagonalGaussian g{Tensor({1, 3}, {0, 0, 0}), Tensor({1, 3}, {1, 1, 1})};
        const Tensor noise({1, 3}, {0.3, -1.2, 2.0});
        REQUIRE(rsample(g, noise) == noise);
    }
    SECTION("shape mismatch is rejected") {
        DiagonalGaussian g{Tensor({1, 2}, {0, 0}), Tensor({1, 2}, {1, 1})};
        REQUIRE_THROWS_AS(rsample(g, Tensor({1, 3}, {0, 0, 0})), ShapeError);
    }
    SECTION("Monte Carlo moments over 1e5 seeded draws") {
        DiagonalGaussian g{Tensor({1, 1}, {2.0}), Tensor({1, 1}, {3.0})};
        std::mt19937_64 rng = make_engine(2024, 0);
        const std::size_t n = 100000;
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = rsample(g, normal_tensor(rng, {1, 1}))[0];
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / n;
        const double stddev = std::sqrt(sumsq / n - mean * mean);
        REQUIRE_THAT(mean, WithinAbs(2.0, 0.05));
        REQUIRE_THAT(stddev, WithinAbs(3.0, 0.05));
    }
}

TEST_CASE("log_prob closed forms", "[distributions]") {
    SECTION("standard normal at the mean") {
        DiagonalGaussian g{Tensor({1, 1}, {0.0}), Tensor({1, 1}, {1.0})};
        REQUIRE_THAT(log_prob(g, Tensor({1, 1}, {0.0})),
                     WithinAbs(-0.5 * std::log(2.0 * 3.14159265358979323846), 1e-12));
    }
    SECTION("at the mean only the normalizer remains") {
        DiagonalGaussian g{Tensor({1, 3}, {1, 2, 3}), Tensor({1, 3}, {0.5, 1.0, 2.0})};
        const double expected = -3.0 * kHalfLogTwoPi -
                                (std::log(0.5) + std::log(1.0) + std::log(2.0));
        REQUIRE_THAT(log_prob(g, g.mean), WithinAbs(expected, 1e-12));
    }
    SECTION("doubling sigma at the mean costs d log 2") {
        DiagonalGaussian g1{Tensor({1, 4}, {0, 0, 0, 0}), Tensor::full({1, 4}, 1.0)};
        DiagonalGaussian g2{Tensor({1, 4}, {0, 0, 0, 0}), Tensor::full({1, 4}, 2.0)};
        const double drop = log_prob(g1, g1.mean) - log_prob(g2, g2.mean);
        REQUIRE_THAT(drop, WithinAbs(4.0 * std::log(2.0), 1e-12));
    }
}

TEST_CASE("kl_divergence closed forms", "[distributions]") {
    SECTION("identical distributions") {
        DiagonalGaussian g{Tensor({1, 2}, {0.3, -1.0}), Tensor({1, 2}, {0.7, 1.3})};
        REQUIRE_THAT(kl_divergence(g, g), WithinAbs(0.0, 1e-15));
    }
    SECTION("N(1,1) vs N(0,1) is 0.5") {
        DiagonalGaussian q{Tensor({1, 1}, {1.0}), Tensor({1, 1}, {1.0})};
        DiagonalGaussian p{Tensor({1, 1}, {0.0}), Tensor({1, 1}, {1.0})};
        REQUIRE_THAT(kl_divergence(q, p), WithinAbs(0.5, 1e-12));
    }
    SECTION("N(0,2) vs N(0,1) is -log 2 + 2 - 1/2") {
        DiagonalGaussian q{Tensor({1, 1}, {0.0}), Tensor({1, 1}, {2.0})};
        DiagonalGaussian p{Tensor({1, 1}, {0.0}), Tensor({1, 1}, {1.0})};
        REQUIRE_THAT(kl_divergence(q, p), WithinAbs(-std::log(2.0) + 2.0 - 0.5, 1e-12));
    }
}

TEST_CASE("kl is nonnegative and zero only at coincidence", "[distributions][property]") {
    std::mt19937_64 rng = make_engine(5150, 0);
    for (int trial = 0; trial < 200; ++trial) {
        DiagonalGaussian q{normal_tensor(rng, {1, 5}), uniform_tensor(rng, {1, 5}, 0.1, 3.0)};
        DiagonalGaussian p{normal_tensor(rng, {1, 5}), uniform_tensor(rng, {1, 5}, 0.1, 3.0)};
        const double kl = kl_divergence(q, p);
        REQUIRE(kl >= 0.0);
        REQUIRE(kl_divergence(q, q) <= 1e-12);
    }
}

TEST_CASE("log_prob peaks at the mean (finite-difference gradient)", "[distributions]") {
    DiagonalGaussian g{Tensor({1, 3}, {0.4, -0.2, 1.1}), Tensor({1, 3}, {0.5, 1.0, 2.0})};
    const double eps = 1e-6;
    for (std::size_t i = 0; i < 3; ++i) {
        Tensor hi = g.mean, lo = g.mean;
        hi[i] += eps;
        lo[i] -= eps;
        const double grad = (log_prob(g, hi) - log_prob(g, lo)) / (2 * eps);
        REQUIRE_THAT(grad, WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("graph and value versions agree", "[distributions]") {
    std::mt19937_64 rng = make_engine(77, 0);
    DiagonalGaussian q{normal_tensor(rng, {1, 4}), uniform_tensor(rng, {1, 4}, 0.2, 2.0)};
    DiagonalGaussian p{normal_tensor(rng, {1, 4}), uniform_tensor(rng, {1, 4}, 0.2, 2.0)};
    const Tensor y = normal_tensor(rng, {1, 4});
    const Tensor noise = normal_tensor(rng, {1, 4});

    Tape tape;
    GaussianVar qv{tape.constant(q.mean), tape.constant(q.std)};
    GaussianVar pv{tape.constant(p.mean), tape.constant(p.std)};
    REQUIRE_THAT(kl_divergence(qv, pv).value().scalar_value(),
                 WithinAbs(kl_divergence(q, p), 1e-12));
    REQUIRE_THAT(log_prob(qv, tape.constant(y)).value().scalar_value(),
                 WithinAbs(log_prob(q, y), 1e-12));
    REQUIRE(rsample(qv, tape.constant(noise)).value() == rsample(q, noise));
}

TEST_CASE("rsample gradients: d/dmean = 1, d/dstd = noise", "[distributions][gradcheck]") {
    std::mt19937_64 rng = make_engine(88, 0);
    const Tensor noise = normal_tensor(rng, {1, 3});
    NamedTensors params{{"mean", normal_tensor(rng, {1, 3})},
                        {"std", uniform_tensor(rng, {1, 3}, 0.2, 2.0)}};

    Tape tape;
    auto leaves = register_leaves(tape, params);
    GaussianVar g{leaves.at("mean"), leaves.at("std")};
    Var s = rsample(g, tape.constant(noise));
    tape.backward(sum_all(s));
    auto grads = tape.leaf_gradients();
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE_THAT(grads.at("mean")[i], WithinAbs(1.0, 1e-14));
        REQUIRE_THAT(grads.at("std")[i], WithinAbs(noise[i], 1e-14));
    }

    const double err = gradient_check(
        [&noise](Tape& t, const std::map<std::string, Var>& p) {
            GaussianVar gv{p.at("mean"), p.at("std")};
            return mean_all(square(rsample(gv, t.constant(noise))));
        },
        params, 1e-6);
    REQUIRE(err < 1e-6);
}

TEST_CASE("DiagonalGaussian invariants are enforced", "[distributions]") {
    DiagonalGaussian bad_std{Tensor({1, 2}, {0, 0}), Tensor({1, 2}, {1.0, 0.0})};
    REQUIRE_THROWS_AS(bad_std.validate(), ContractError);
    DiagonalGaussian bad_shape{Tensor({1, 2}, {0, 0}), Tensor({1, 3}, {1, 1, 1})};
    REQUIRE_THROWS_AS(bad_shape.validate(), ShapeError);
}
