#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "seqnp/context.hpp"
#include "seqnp/rng.hpp"
#include "test_util.hpp"

using namespace seqnp;
using testutil::toy_config;
using testutil::toy_sequence;

TEST_CASE("select_random", "[context]") {
    std::mt19937_64 rng = make_engine(101, 0);
    SECTION("exhaustive count selects every index") {
        ContextTargetSplit s = select_random(6, 6, rng);
        REQUIRE(s.context_indices == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
    }
    SECTION("singleton stays in range") {
        for (int i = 0; i < 50; ++i) {
            ContextTargetSplit s = select_random(9, 1, rng);
            REQUIRE(s.context_indices.size() == 1);
            REQUIRE(s.context_indices[0] < 9);
        }
    }
    SECTION("sampling is without replacement") {
        for (int i = 0; i < 50; ++i) {
            ContextTargetSplit s = select_random(12, 7, rng);
            std::set<std::size_t> unique(s.context_indices.begin(), s.context_indices.end());
            REQUIRE(unique.size() == 7);
        }
    }
    SECTION("fixed seed reproduces the index set") {
        std::mt19937_64 a = make_engine(55, 1), b = make_engine(55, 1);
        REQUIRE(select_random(40, 11, a).context_indices ==
                select_random(40, 11, b).context_indices);
    }
    SECTION("out-of-range count is a contract error") {
        REQUIRE_THROWS_AS(select_random(5, 6, rng), ContractError);
        REQUIRE_THROWS_AS(select_random(5, 0, rng), ContractError);
    }
    SECTION("target set is the whole sequence") {
        ContextTargetSplit s = select_random(4, 2, rng);
        REQUIRE(s.target_indices() == std::vector<std::size_t>{0, 1, 2, 3});
    }
}

TEST_CASE("select_top_k ordering", "[context]") {
    const std::vector<double> scores{0.5, 0.2, 0.9, 0.1};
    SECTION("lowest two") {
        REQUIRE(select_top_k(scores, 2, SelectionDirection::lowest) ==
                std::vector<std::size_t>{1, 3});
    }
    SECTION("highest two") {
        REQUIRE(select_top_k(scores, 2, SelectionDirection::highest) ==
                std::vector<std::size_t>{0, 2});
    }
    SECTION("exhaustive selection is direction-independent") {
        REQUIRE(select_top_k(scores, 4, SelectionDirection::lowest) ==
                select_top_k(scores, 4, SelectionDirection::highest));
    }
    SECTION("ties break toward the smaller frame index") {
        const std::vector<double> tied{0.3, 0.1, 0.1, 0.3};
        REQUIRE(select_top_k(tied, 1, SelectionDirection::lowest) ==
                std::vector<std::size_t>{1});
        REQUIRE(select_top_k(tied, 1, SelectionDirection::highest) ==
                std::vector<std::size_t>{0});
        REQUIRE(select_top_k(tied, 3, SelectionDirection::lowest) ==
                std::vector<std::size_t>{0, 1, 2});
    }
}

TEST_CASE("select_by_uncertainty", "[context]") {
    ModelConfig cfg = toy_config(Variant::latent);
    NamedTensors params = init_params(cfg, 31);
    std::mt19937_64 rng = make_engine(32, 0);
    Sequence seq = toy_sequence(rng, 12, cfg);

    SECTION("deterministic given params and sequence") {
        ContextTargetSplit a = select_by_uncertainty(params, cfg, seq, 5,
                                                     SelectionDirection::lowest);
        ContextTargetSplit b = select_by_uncertainty(params, cfg, seq, 5,
                                                     SelectionDirection::lowest);
        REQUIRE(a.context_indices == b.context_indices);
        REQUIRE(a.context_label_source == LabelSource::pseudo_label);
    }
    SECTION("every selected score bounds every unselected score") {
        const std::vector<double> scores = uncertainty_scores(params, cfg, seq);
        ContextTargetSplit s = select_by_uncertainty(params, cfg, seq, 4,
                                                     SelectionDirection::lowest);
        std::set<std::size_t> chosen(s.context_indices.begin(), s.context_indices.end());
        double max_sel = -1e300, min_unsel = 1e300;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (chosen.count(i)) {
                max_sel = std::max(max_sel, scores[i]);
            } else {
                min_unsel = std::min(min_unsel, scores[i]);
            }
        }
        REQUIRE(max_sel <= min_unsel);
    }
    SECTION("exhaustive count returns all indices in both directions") {
        ContextTargetSplit lo =
            select_by_uncertainty(params, cfg, seq, 12, SelectionDirection::lowest);
        ContextTargetSplit hi =
            select_by_uncertainty(params, cfg, seq, 12, SelectionDirection::highest);
        REQUIRE(lo.context_indices == hi.context_indices);
        REQUIRE(lo.context_indices.size() == 12);
    }
    SECTION("count beyond the sequence is a contract error") {
        REQUIRE_THROWS_AS(
            select_by_uncertainty(params, cfg, seq, 13, SelectionDirection::lowest),
            ContractError);
    }
    SECTION("lowest and highest pick opposite extremes") {
        const std::vector<double> scores = uncertainty_scores(params, cfg, seq);
        const auto lo = select_by_uncertainty(params, cfg, seq, 1, SelectionDirection::lowest);
        const auto hi = select_by_uncertainty(params, cfg, seq, 1, SelectionDirection::highest);
        const auto lo_it = std::min_element(scores.begin(), scores.end());
        const auto hi_it = std::max_element(scores.begin(), scores.end());
        REQUIRE(scores[lo.context_indices[0]] == *lo_it);
        REQUIRE(scores[hi.context_indices[0]] == *hi_it);
    }
}
