#include "oatk/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace oatk {

EmbeddingDatabase::EmbeddingDatabase(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) {
        throw std::invalid_argument("EmbeddingDatabase: embedding dimension must be positive");
    }
}

void EmbeddingDatabase::add(CandidateId id, std::span<const double> embedding,
                            std::optional<int> label) {
    if (embedding.size() != dim_) {
        throw std::invalid_argument("EmbeddingDatabase: embedding dimension mismatch for '" +
                                    id + "'");
    }
    if (index_.contains(id)) {
        throw std::invalid_argument("EmbeddingDatabase: duplicate id '" + id + "'");
    }
    index_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    flat_.insert(flat_.end(), embedding.begin(), embedding.end());
    labels_.push_back(label);
}

std::optional<std::size_t> EmbeddingDatabase::index_of(const CandidateId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

RankingModel::RankingModel(std::size_t embed_dim, std::size_t query_dim,
                           std::vector<double> weights)
    : embed_dim_(embed_dim), query_dim_(query_dim), weights_(std::move(weights)) {
    if (embed_dim_ == 0 || query_dim_ == 0 || weights_.size() != embed_dim_ * query_dim_) {
        throw std::invalid_argument("RankingModel: weights must be embed_dim x query_dim");
    }
}

std::vector<double> RankingModel::embed(std::span<const double> q) const {
    if (q.size() != query_dim_) {
        throw std::invalid_argument("RankingModel: query dimension mismatch");
    }
    std::vector<double> out(embed_dim_, 0.0);
    for (std::size_t r = 0; r < embed_dim_; ++r) {
        const double* w = weights_.data() + r * query_dim_;
        double acc = 0.0;
        for (std::size_t c = 0; c < query_dim_; ++c) acc += w[c] * q[c];
        out[r] = acc;
    }
    return out;
}

double RankingModel::distance(std::span<const double> query_embedding,
                              std::span<const double> candidate_embedding) const {
    if (query_embedding.size() != embed_dim_ || candidate_embedding.size() != embed_dim_) {
        throw std::invalid_argument("RankingModel: embedding dimension mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < embed_dim_; ++i) {
        const double d = query_embedding[i] - candidate_embedding[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

std::vector<std::size_t> rank_indices(const RankingModel& model, const EmbeddingDatabase& db,
                                      const QueryImage& q, VisibleRange n) {
    if (db.empty()) {
        throw std::invalid_argument("rank: empty database");
    }
    if (db.dim() != model.embed_dim()) {
        throw std::invalid_argument("rank: database/model embedding dimensions differ");
    }
    const std::vector<double> qe = model.embed(q.pixels());

    std::vector<double> d2(db.size());
    for (std::size_t i = 0; i < db.size(); ++i) {
        const auto e = db.embedding_at(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < e.size(); ++j) {
            const double d = qe[j] - e[j];
            acc += d * d;
        }
        d2[i] = acc;  // squared distance; monotone in f
    }

    std::vector<std::size_t> order(db.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto cmp = [&](std::size_t a, std::size_t b) {
        if (d2[a] != d2[b]) return d2[a] < d2[b];
        return db.id_at(a) < db.id_at(b);  // deterministic tie-break
    };
    const std::size_t take = n ? std::min(*n, order.size()) : order.size();
    if (take < order.size()) {
        std::partial_sort(order.begin(), order.begin() + take, order.end(), cmp);
        order.resize(take);
    } else {
        std::sort(order.begin(), order.end(), cmp);
    }
    return order;
}

RankingList rank(const RankingModel& model, const EmbeddingDatabase& db, const QueryImage& q,
                 VisibleRange n) {
    const auto order = rank_indices(model, db, q, n);
    std::vector<CandidateId> ids;
    ids.reserve(order.size());
    for (std::size_t i : order) ids.push_back(db.id_at(i));
    return RankingList(std::move(ids));
}

bool QueryBudget::try_consume() {
    std::uint64_t cur = used_.load(std::memory_order_relaxed);
    while (cur < limit_) {
        if (used_.compare_exchange_weak(cur, cur + 1, std::memory_order_relaxed)) {
            return true;
        }
    }
    return false;
}

LocalOracle::LocalOracle(std::shared_ptr<const RankingModel> model,
                         std::shared_ptr<const EmbeddingDatabase> db, VisibleRange n,
                         std::uint64_t query_budget)
    : model_(std::move(model)), db_(std::move(db)), n_(n), budget_(query_budget) {
    if (!model_ || !db_) {
        throw std::invalid_argument("LocalOracle: model and database are required");
    }
}

RankingList LocalOracle::query(const QueryImage& q) {
    if (!budget_.try_consume()) {
        throw BudgetExhausted("query budget of " + std::to_string(budget_.limit()) +
                              " exhausted");
    }
    return rank(*model_, *db_, q, n_);
}

// --- embedding file io -------------------------------------------------------

EmbeddingDatabase load_db(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) {
        throw ParseError(path, 1, "missing 'dim E' header");
    }
    std::size_t dim = 0;
    {
        std::istringstream hs(line);
        std::string word;
        if (!(hs >> word) || word != "dim" || !(hs >> dim) || dim == 0 || (hs >> word)) {
            throw ParseError(path, 1, "expected header 'dim E' with E > 0");
        }
    }
    EmbeddingDatabase db(dim);
    std::vector<double> values(dim);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos
                                                    : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos) {
            throw ParseError(path, lineno, "expected id<TAB>label<TAB>values");
        }
        std::string id = line.substr(0, tab1);
        if (id.empty()) {
            throw ParseError(path, lineno, "empty id");
        }
        std::optional<int> label;
        const std::string label_str = line.substr(tab1 + 1, tab2 - tab1 - 1);
        if (!label_str.empty()) {
            std::size_t used = 0;
            try {
                label = std::stoi(label_str, &used);
            } catch (const std::exception&) {
                throw ParseError(path, lineno, "bad label '" + label_str + "'");
            }
            if (used != label_str.size()) {
                throw ParseError(path, lineno, "bad label '" + label_str + "'");
            }
        }
        const char* p = line.c_str() + tab2 + 1;
        for (std::size_t i = 0; i < dim; ++i) {
            char* end = nullptr;
            values[i] = std::strtod(p, &end);
            if (end == p) {
                throw ParseError(path, lineno,
                                 "expected " + std::to_string(dim) + " values, got " +
                                     std::to_string(i));
            }
            p = end;
            if (*p == ',') ++p;
        }
        while (*p == ' ') ++p;
        if (*p != '\0' && *p != '\r') {
            throw ParseError(path, lineno, "trailing junk after " + std::to_string(dim) +
                                               " values");
        }
        try {
            db.add(std::move(id), values, label);
        } catch (const std::invalid_argument& e) {
            throw ParseError(path, lineno, e.what());
        }
    }
    return db;
}

void save_db(const EmbeddingDatabase& db, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_db: cannot open '" + path + "' for writing");
    }
    out << "dim " << db.dim() << "\n";
    char buf[32];
    for (std::size_t i = 0; i < db.size(); ++i) {
        out << db.id_at(i) << '\t';
        if (auto label = db.label_at(i)) out << *label;
        out << '\t';
        const auto e = db.embedding_at(i);
        for (std::size_t j = 0; j < e.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", e[j]);
            if (j) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("save_db: write to '" + path + "' failed");
    }
}

}  // namespace oatk
