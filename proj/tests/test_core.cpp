#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "oatk/core.hpp"

using namespace oatk;

TEST_CASE("query image validates its range") {
    CHECK_NOTHROW(QueryImage({0.0, 0.5, 1.0}));
    CHECK_THROWS_AS(QueryImage({}), std::invalid_argument);
    CHECK_THROWS_AS(QueryImage({0.5, 1.2}), std::invalid_argument);
    CHECK_THROWS_AS(QueryImage({-0.1}), std::invalid_argument);
}

TEST_CASE("clamp_to_feasible pins the worked examples") {
    const double eps4 = 4.0 / 255.0;

    QueryImage mid(std::vector<double>(8, 0.5));
    auto zero = clamp_to_feasible(mid, std::vector<double>(8, 0.0), eps4);
    for (double v : zero.delta) CHECK(v == 0.0);

    auto full = clamp_to_feasible(mid, std::vector<double>(8, 1.0), eps4);
    for (double v : full.delta) CHECK(v == doctest::Approx(eps4));

    // at the image bounds the box constraint dominates
    QueryImage edge({0.0, 1.0});
    auto boxed = clamp_to_feasible(edge, std::vector<double>{-0.01, 0.01}, 8.0 / 255.0);
    CHECK(boxed.delta[0] == 0.0);
    CHECK(boxed.delta[1] == 0.0);
}

TEST_CASE("clamp_to_feasible example verified by brute-force projection") {
    // the feasible set is a box, so projecting coordinate-wise over a grid
    // must find nothing closer than the clamp output
    QueryImage q({0.0, 1.0});
    const std::vector<double> raw{-0.01, 0.01};
    const double eps = 8.0 / 255.0;
    const auto clamped = clamp_to_feasible(q, raw, eps);
    for (std::size_t i = 0; i < 2; ++i) {
        double best = 1e9, best_d = 0.0;
        for (int g = -1000; g <= 1000; ++g) {
            const double d = g * 1e-3 * eps;
            if (std::abs(d) > eps) continue;
            const double px = q.pixels()[i] + d;
            if (px < 0.0 || px > 1.0) continue;
            const double dist = std::abs(d - raw[i]);
            if (dist < best) {
                best = dist;
                best_d = d;
            }
        }
        CHECK(clamped.delta[i] == doctest::Approx(best_d).epsilon(1e-9));
    }
}

TEST_CASE("clamp_to_feasible is idempotent and feasible on random inputs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> upix(0.0, 1.0);
    std::uniform_real_distribution<double> uraw(-2.0, 2.0);
    std::uniform_real_distribution<double> ueps(0.0, 0.2);
    for (int it = 0; it < 10000; ++it) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng() % 6);
        std::vector<double> px(d), raw(d);
        for (auto& v : px) v = upix(rng);
        for (auto& v : raw) v = uraw(rng);
        const double eps = ueps(rng);
        const QueryImage q(px);
        const Perturbation once = clamp_to_feasible(q, raw, eps);
        const Perturbation twice = clamp_to_feasible(q, once.delta, eps);
        for (std::size_t i = 0; i < d; ++i) {
            CHECK(once.delta[i] == twice.delta[i]);
            CHECK(std::abs(once.delta[i]) <= eps + 1e-15);
            const double v = px[i] + once.delta[i];
            CHECK(v >= -1e-15);
            CHECK(v <= 1.0 + 1e-15);
        }
    }
}

TEST_CASE("clamp_to_feasible rejects dimension mismatch") {
    QueryImage q({0.5, 0.5});
    CHECK_THROWS_AS(clamp_to_feasible(q, std::vector<double>{0.0}, 0.1),
                    std::invalid_argument);
}

TEST_CASE("mean_rank on clean prefixes and singletons") {
    std::vector<CandidateId> ids;
    for (int i = 0; i < 30; ++i) ids.push_back("c" + std::to_string(i));
    const RankingList x(ids);

    // mean rank of the clean top-k is (k-1)/2 exactly
    for (std::size_t k : {2u, 5u, 10u, 25u}) {
        std::vector<CandidateId> top(ids.begin(), ids.begin() + k);
        const auto mr = mean_rank(x, top, std::nullopt);
        REQUIRE(mr.has_value());
        CHECK(*mr == doctest::Approx((k - 1) / 2.0));
    }
    CHECK(*mean_rank(x, std::vector<CandidateId>{"c7"}, std::nullopt) == 7.0);

    // top-5 of a clean ranking averages to 2.0, top-25 to 12.0
    CHECK(*mean_rank(x, std::vector<CandidateId>(ids.begin(), ids.begin() + 5),
                     std::nullopt) == 2.0);
    CHECK(*mean_rank(x, std::vector<CandidateId>(ids.begin(), ids.begin() + 25),
                     std::nullopt) == 12.0);
}

TEST_CASE("mean_rank is undefined under a bounded range with absentees") {
    const RankingList x({"a", "b", "c"});
    CHECK_FALSE(mean_rank(x, std::vector<CandidateId>{"a", "zzz"}, VisibleRange{3}).has_value());
    // an absentee under an unbounded range is a caller bug
    CHECK_THROWS_AS(mean_rank(x, std::vector<CandidateId>{"zzz"}, std::nullopt),
                    std::invalid_argument);
    CHECK_THROWS_AS(mean_rank(x, std::vector<CandidateId>{}, std::nullopt),
                    std::invalid_argument);
}

TEST_CASE("attack spec validation") {
    AttackSpec spec;
    spec.candidates = {"a", "b", "c"};
    spec.permutation = {2, 1, 3};
    spec.epsilon = 0.05;
    CHECK_NOTHROW(spec.validate());

    AttackSpec dup = spec;
    dup.candidates = {"a", "b", "a"};
    CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

    AttackSpec badp = spec;
    badp.permutation = {1, 1, 3};
    CHECK_THROWS_AS(badp.validate(), std::invalid_argument);

    AttackSpec badn = spec;
    badn.visible_range = 2;  // k = 3 > N
    CHECK_THROWS_AS(badn.validate(), std::invalid_argument);
}

TEST_CASE("ranking list rejects duplicates only on the checked path") {
    CHECK_THROWS_AS(RankingList::checked({"a", "b", "a"}), ProtocolError);
    const RankingList x = RankingList::checked({"a", "b"});
    CHECK(x.rank_of("b") == 1);
    CHECK_FALSE(x.rank_of("z").has_value());
}
