#ifndef OATK_TESTS_WORLDS_HPP
#define OATK_TESTS_WORLDS_HPP

#include <memory>
#include <random>
#include <vector>

#include "oatk/harness.hpp"
#include "oatk/oracle.hpp"

// Shared test fixtures: tiny hand-built worlds with known geometry.

namespace testworlds {

struct TinyWorld {
    std::shared_ptr<const oatk::EmbeddingDatabase> db;
    std::shared_ptr<const oatk::RankingModel> model;
    oatk::QueryImage query{std::vector<double>{0.5}};
};

/// Three embeddings on a straight line: e1 = e2 - o, e3 = e2 + o. No query
/// embedding can realize the order c1 < c3 < c2; the best reachable tau for
/// the permutation [1, 3, 2] is 1/3.
inline TinyWorld collinear_triple(std::size_t query_dim = 16, std::uint64_t seed = 7) {
    TinyWorld world;
    const std::size_t e_dim = 4;
    auto model = std::make_shared<oatk::RankingModel>(
        oatk::make_random_model(e_dim, query_dim, seed));

    std::vector<double> e2 = {0.15, -0.05, 0.1, 0.0};
    std::vector<double> o = {0.12, 0.08, -0.05, 0.1};
    std::vector<double> e1(e_dim), e3(e_dim);
    for (std::size_t i = 0; i < e_dim; ++i) {
        e1[i] = e2[i] - o[i];
        e3[i] = e2[i] + o[i];
    }
    auto db = std::make_shared<oatk::EmbeddingDatabase>(e_dim);
    db->add("c1", e1, 0);
    db->add("c2", e2, 0);
    db->add("c3", e3, 0);

    // query sits near the middle embedding, slightly off the tie point
    std::vector<double> target = e2;
    target[0] += 0.01;
    world.query = oatk::preimage_query(*model, target);
    world.db = std::move(db);
    world.model = std::move(model);
    return world;
}

/// A small, fully attackable world for fast optimizer tests: low query
/// dimension, a handful of classes.
inline oatk::SyntheticWorld small_world(std::uint64_t seed = 3,
                                        std::size_t query_dim = 48) {
    oatk::SyntheticConfig cfg;
    cfg.classes = 4;
    cfg.per_class = 10;
    cfg.embed_dim = 8;
    cfg.query_dim = query_dim;
    cfg.intra_class_std = 0.25;
    cfg.seed = seed;
    return oatk::gen_synthetic_db(cfg);
}

}  // namespace testworlds

#endif
