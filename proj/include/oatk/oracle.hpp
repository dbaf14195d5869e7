#ifndef OATK_ORACLE_HPP
#define OATK_ORACLE_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oatk/core.hpp"

// The ranking system under attack: an embedding database, a linear embedder,
// and the truncated-ranking oracle contract (ids only, never scores, one
// budget unit per query).

namespace oatk {

/// Candidate ids with fixed embedding vectors; the oracle's ground truth.
/// Immutable once built, safe to share across threads.
class EmbeddingDatabase {
public:
    explicit EmbeddingDatabase(std::size_t dim);

    /// Throws std::invalid_argument on duplicate id or dimension mismatch.
    void add(CandidateId id, std::span<const double> embedding,
             std::optional<int> label = std::nullopt);

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    bool empty() const { return ids_.empty(); }

    const CandidateId& id_at(std::size_t i) const { return ids_[i]; }
    std::span<const double> embedding_at(std::size_t i) const {
        return {flat_.data() + i * dim_, dim_};
    }
    std::optional<int> label_at(std::size_t i) const { return labels_[i]; }
    std::optional<std::size_t> index_of(const CandidateId& id) const;

private:
    std::size_t dim_;
    std::vector<CandidateId> ids_;
    std::vector<double> flat_;  // size() x dim_, row-major
    std::vector<std::optional<int>> labels_;
    std::unordered_map<CandidateId, std::size_t> index_;
};

/// Linear embedder g(q) = W q with Euclidean candidate distances
/// f(q, c) = ||W q - e_c||_2.
class RankingModel {
public:
    /// weights is E x D row-major.
    RankingModel(std::size_t embed_dim, std::size_t query_dim, std::vector<double> weights);

    std::size_t embed_dim() const { return embed_dim_; }
    std::size_t query_dim() const { return query_dim_; }
    std::span<const double> weights() const { return weights_; }
    std::span<const double> weights_row(std::size_t r) const {
        return {weights_.data() + r * query_dim_, query_dim_};
    }

    /// W q.
    std::vector<double> embed(std::span<const double> q) const;

    /// f(q, c) given a precomputed query embedding.
    double distance(std::span<const double> query_embedding,
                    std::span<const double> candidate_embedding) const;

private:
    std::size_t embed_dim_;
    std::size_t query_dim_;
    std::vector<double> weights_;
};

/// Full ranking of the database for q, truncated to n entries. Candidates are
/// ordered by ascending distance; exact ties break by ascending id so the
/// result is deterministic. Throws std::invalid_argument on an empty database
/// or dimension mismatch.
RankingList rank(const RankingModel& model, const EmbeddingDatabase& db, const QueryImage& q,
                 VisibleRange n);

/// Same ordering as rank() but yields database indices; used by internal
/// callers that want to avoid id copies.
std::vector<std::size_t> rank_indices(const RankingModel& model, const EmbeddingDatabase& db,
                                      const QueryImage& q, VisibleRange n);

/// Monotone query ledger. used() never decreases and never passes limit();
/// increments are linearizable.
class QueryBudget {
public:
    explicit QueryBudget(std::uint64_t limit) : limit_(limit), used_(0) {}

    std::uint64_t limit() const { return limit_; }
    std::uint64_t used() const { return used_.load(std::memory_order_relaxed); }

    /// Consumes one unit; false when the budget is already exhausted.
    bool try_consume();

private:
    std::uint64_t limit_;
    std::atomic<std::uint64_t> used_;
};

/// The black-box interface every attack runs against: truncated id lists,
/// no scores, one budget unit per call. query() throws BudgetExhausted once
/// the ledger is spent.
class Oracle {
public:
    virtual ~Oracle() = default;
    virtual RankingList query(const QueryImage& q) = 0;
    virtual std::uint64_t queries_used() const = 0;
    virtual VisibleRange visible_range() const = 0;
};

class LocalOracle final : public Oracle {
public:
    LocalOracle(std::shared_ptr<const RankingModel> model,
                std::shared_ptr<const EmbeddingDatabase> db, VisibleRange n,
                std::uint64_t query_budget);

    RankingList query(const QueryImage& q) override;
    std::uint64_t queries_used() const override { return budget_.used(); }
    VisibleRange visible_range() const override { return n_; }

    const QueryBudget& budget() const { return budget_; }

private:
    std::shared_ptr<const RankingModel> model_;
    std::shared_ptr<const EmbeddingDatabase> db_;
    VisibleRange n_;
    QueryBudget budget_;
};

// --- embedding file format -------------------------------------------------
//
// UTF-8 text. Line 1: "dim E". Every further line:
//   id<TAB>label<TAB>v1,v2,...,vE
// label may be empty. Values are decimal floats; a round-trip preserves ids
// exactly and values within 1e-6.

/// Throws ParseError (with file and line) on malformed input, duplicate ids,
/// or inconsistent dimensions.
EmbeddingDatabase load_db(const std::string& path);

void save_db(const EmbeddingDatabase& db, const std::string& path);

}  // namespace oatk

#endif
