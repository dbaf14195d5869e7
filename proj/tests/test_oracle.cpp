#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "doctest.h"
#include "oatk/harness.hpp"
#include "oatk/oracle.hpp"
#include "support/worlds.hpp"

using namespace oatk;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

std::shared_ptr<RankingModel> identity_model(std::size_t dim) {
    std::vector<double> w(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) w[i * dim + i] = 1.0;
    return std::make_shared<RankingModel>(dim, dim, std::move(w));
}

}  // namespace

TEST_CASE("rank orders by distance with id tie-break") {
    auto model = identity_model(2);
    auto db = std::make_shared<EmbeddingDatabase>(2);
    // collinear embeddings: e1 = e2 - o, e3 = e2 + o (o exactly representable
    // so the two distances tie bit-exactly)
    db->add("c2", std::vector<double>{0.5, 0.5});
    db->add("c1", std::vector<double>{0.25, 0.5});
    db->add("c3", std::vector<double>{0.75, 0.5});

    // query at e2: c1 and c3 are equidistant, id order breaks the tie
    const QueryImage q({0.5, 0.5});
    const RankingList r = rank(*model, *db, q, std::nullopt);
    CHECK(r.entries() == std::vector<CandidateId>{"c2", "c1", "c3"});

    // single entry and exact-preimage cases
    auto one = std::make_shared<EmbeddingDatabase>(2);
    one->add("only", std::vector<double>{0.2, 0.9});
    CHECK(rank(*model, *one, q, std::nullopt).size() == 1);
    CHECK(rank(*model, *db, QueryImage({0.25, 0.5}), std::nullopt).entries().front() == "c1");
}

TEST_CASE("rank truncates to the visible range and stays deterministic") {
    auto world = testworlds::small_world();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> px(world.model->query_dim());
    for (auto& v : px) v = u(rng);
    const QueryImage q(px);

    const RankingList five = rank(*world.model, *world.db, q, VisibleRange{5});
    CHECK(five.size() == 5);
    const RankingList full = rank(*world.model, *world.db, q, std::nullopt);
    CHECK(full.size() == world.db->size());
    // the truncated list is a prefix of the full order
    for (std::size_t i = 0; i < 5; ++i) CHECK(five.entries()[i] == full.entries()[i]);
    // determinism
    CHECK(rank(*world.model, *world.db, q, std::nullopt) == full);

    CHECK_THROWS_AS(rank(*world.model, EmbeddingDatabase(3), q, std::nullopt),
                    std::invalid_argument);
}

TEST_CASE("query budget is exact under concurrency") {
    QueryBudget budget(1000);
    std::vector<std::thread> threads;
    std::atomic<std::uint64_t> granted{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&]() {
            for (int i = 0; i < 400; ++i) {
                if (budget.try_consume()) granted.fetch_add(1);
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(granted.load() == 1000);
    CHECK(budget.used() == 1000);
    CHECK_FALSE(budget.try_consume());
}

TEST_CASE("local oracle charges one unit per query and then refuses") {
    auto world = testworlds::small_world();
    LocalOracle oracle(world.model, world.db, VisibleRange{5}, 1);
    const QueryImage q = preimage_query(*world.model, world.db->embedding_at(0));
    CHECK(oracle.query(q).size() == 5);
    CHECK(oracle.queries_used() == 1);
    CHECK_THROWS_AS(oracle.query(q), BudgetExhausted);
    CHECK(oracle.queries_used() == 1);
}

TEST_CASE("embedding file round-trips") {
    auto world = testworlds::small_world();
    TempFile file("oatk_roundtrip.txt");
    save_db(*world.db, file.path);
    const EmbeddingDatabase loaded = load_db(file.path);
    REQUIRE(loaded.size() == world.db->size());
    REQUIRE(loaded.dim() == world.db->dim());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded.id_at(i) == world.db->id_at(i));
        CHECK(loaded.label_at(i) == world.db->label_at(i));
        const auto a = loaded.embedding_at(i);
        const auto b = world.db->embedding_at(i);
        for (std::size_t j = 0; j < a.size(); ++j) {
            CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-6));
        }
    }
}

TEST_CASE("labels are optional in the file format") {
    TempFile file("oatk_nolabel.txt");
    {
        std::ofstream out(file.path);
        out << "dim 2\n";
        out << "a\t\t0.5,1.5\n";
        out << "b\t3\t-1,2\n";
    }
    const EmbeddingDatabase db = load_db(file.path);
    CHECK_FALSE(db.label_at(0).has_value());
    CHECK(db.label_at(1) == 3);

    TempFile out2("oatk_nolabel2.txt");
    save_db(db, out2.path);
    const EmbeddingDatabase again = load_db(out2.path);
    CHECK_FALSE(again.label_at(0).has_value());
    CHECK(again.label_at(1) == 3);
}

TEST_CASE("malformed embedding files name the offending line") {
    TempFile file("oatk_bad.txt");

    const auto expect_error = [&](const std::string& content, std::size_t line) {
        std::ofstream out(file.path);
        out << content;
        out.close();
        try {
            (void)load_db(file.path);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == line);
        }
    };

    expect_error("dimension 3\nx\t0\t1,2,3\n", 1);           // bad header
    expect_error("dim 2\nx\t0\t1\n", 2);                      // missing value
    expect_error("dim 2\nx\t0\t1,2\nx\t0\t3,4\n", 3);         // duplicate id
    expect_error("dim 2\nx\t0\t1,2,9\n", 2);                  // trailing junk
    expect_error("dim 2\nx\tabc\t1,2\n", 2);                  // bad label
    expect_error("dim 2\nmissing-tabs\n", 2);                 // no fields
}

TEST_CASE("database rejects duplicates and dimension mismatches") {
    EmbeddingDatabase db(2);
    db.add("a", std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(db.add("a", std::vector<double>{0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(db.add("b", std::vector<double>{1.0}), std::invalid_argument);
    CHECK(db.index_of("a") == 0);
    CHECK_FALSE(db.index_of("zz").has_value());
}
