#include "oatk/whitebox.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "oatk/numeric.hpp"
#include "oatk/src_metric.hpp"

namespace oatk {

namespace {

// Distances from the embedded query to a set of database entries, plus the
// unit difference vectors needed for the analytic gradient.
struct DistanceSet {
    std::vector<double> query_embedding;     // W q
    std::vector<double> f;                   // distances, one per index
    std::vector<std::size_t> db_index;
};

DistanceSet distances_for(const RankingModel& model, const EmbeddingDatabase& db,
                          std::span<const double> q_tilde,
                          std::span<const std::size_t> indices) {
    DistanceSet out;
    out.query_embedding = model.embed(q_tilde);
    out.db_index.assign(indices.begin(), indices.end());
    out.f.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.f[i] = model.distance(out.query_embedding, db.embedding_at(indices[i]));
    }
    return out;
}

std::vector<std::size_t> resolve_indices(const EmbeddingDatabase& db,
                                         std::span<const CandidateId> ids,
                                         const char* who) {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto idx = db.index_of(id);
        if (!idx) {
            throw std::invalid_argument(std::string(who) + ": candidate '" + id +
                                        "' not in database");
        }
        out.push_back(*idx);
    }
    return out;
}

// Turns per-candidate hinge coefficients into a gradient w.r.t. the query:
// grad_q = W^T sum_i coef_i * (W q - e_i) / f_i. Entries with f_i == 0 get a
// zero subgradient.
std::vector<double> assemble_gradient(const RankingModel& model, const EmbeddingDatabase& db,
                                      const DistanceSet& ds, std::span<const double> coef) {
    const std::size_t e_dim = model.embed_dim();
    std::vector<double> grad_emb(e_dim, 0.0);
    for (std::size_t i = 0; i < coef.size(); ++i) {
        if (coef[i] == 0.0 || ds.f[i] == 0.0) continue;
        const double scale = coef[i] / ds.f[i];
        const auto e = db.embedding_at(ds.db_index[i]);
        for (std::size_t r = 0; r < e_dim; ++r) {
            grad_emb[r] += scale * (ds.query_embedding[r] - e[r]);
        }
    }
    std::vector<double> grad(model.query_dim(), 0.0);
    for (std::size_t r = 0; r < e_dim; ++r) {
        if (grad_emb[r] == 0.0) continue;
        const auto w = model.weights_row(r);
        const double g = grad_emb[r];
        for (std::size_t c = 0; c < w.size(); ++c) grad[c] += g * w[c];
    }
    return grad;
}

}  // namespace

void PgdConfig::validate() const {
    if (!(eta > 0.0) || steps < 1) {
        throw std::invalid_argument("PgdConfig: eta must be > 0 and steps >= 1");
    }
    if (epsilon > 0.0 && eta > epsilon) {
        throw std::invalid_argument("PgdConfig: eta must not exceed epsilon");
    }
    if (epsilon < 0.0) {
        throw std::invalid_argument("PgdConfig: epsilon must be >= 0");
    }
}

LossValue loss_reo(const RankingModel& model, const EmbeddingDatabase& db,
                   std::span<const double> q_tilde, std::span<const CandidateId> candidates,
                   std::span<const int> permutation, double margin_gamma) {
    const std::size_t k = candidates.size();
    if (k < 2) {
        throw std::invalid_argument("loss_reo: need k >= 2");
    }
    if (permutation.size() != k || !is_permutation_1based(permutation)) {
        throw std::invalid_argument("loss_reo: permutation is not a bijection on {1..k}");
    }
    // distances in permuted (target) order
    std::vector<CandidateId> permuted(k);
    for (std::size_t i = 0; i < k; ++i) permuted[i] = candidates[permutation[i] - 1];
    const auto indices = resolve_indices(db, permuted, "loss_reo");
    const auto ds = distances_for(model, db, q_tilde, indices);

    LossValue out;
    std::vector<double> coef(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double hinge = margin_gamma + ds.f[i] - ds.f[j];
            if (hinge > 0.0) {
                out.value += hinge;
                coef[i] += 1.0;
                coef[j] -= 1.0;
            }
        }
    }
    out.gradient = assemble_gradient(model, db, ds, coef);
    return out;
}

LossValue loss_qa_plus(const RankingModel& model, const EmbeddingDatabase& db,
                       std::span<const double> q_tilde, std::span<const CandidateId> candidates,
                       std::span<const CandidateId> distractors) {
    LossValue out;
    if (distractors.empty()) {
        out.gradient.assign(model.query_dim(), 0.0);
        return out;
    }
    std::vector<CandidateId> all(candidates.begin(), candidates.end());
    all.insert(all.end(), distractors.begin(), distractors.end());
    const auto indices = resolve_indices(db, all, "loss_qa_plus");
    const auto ds = distances_for(model, db, q_tilde, indices);

    const std::size_t k = candidates.size();
    std::vector<double> coef(all.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = k; j < all.size(); ++j) {
            const double hinge = ds.f[i] - ds.f[j];
            if (hinge > 0.0) {
                out.value += hinge;
                coef[i] += 1.0;
                coef[j] -= 1.0;
            }
        }
    }
    out.gradient = assemble_gradient(model, db, ds, coef);
    return out;
}

LossValue loss_oa(const RankingModel& model, const EmbeddingDatabase& db,
                  std::span<const double> q_tilde, std::span<const CandidateId> candidates,
                  std::span<const int> permutation, const WhiteboxLossConfig& cfg,
                  std::span<const CandidateId> distractors) {
    LossValue reo = loss_reo(model, db, q_tilde, candidates, permutation, cfg.margin_gamma);
    if (cfg.xi == 0.0) return reo;
    const LossValue qa = loss_qa_plus(model, db, q_tilde, candidates, distractors);
    reo.value += cfg.xi * qa.value;
    for (std::size_t i = 0; i < reo.gradient.size(); ++i) {
        reo.gradient[i] += cfg.xi * qa.gradient[i];
    }
    return reo;
}

AttackResult pgd_attack(const RankingModel& model, const EmbeddingDatabase& db,
                        const QueryImage& q, const AttackSpec& spec, const PgdConfig& pgd,
                        const WhiteboxLossConfig& cfg, std::uint64_t seed) {
    spec.validate();
    pgd.validate();
    if (pgd.epsilon != spec.epsilon) {
        throw std::invalid_argument(
            "pgd_attack: PgdConfig.epsilon disagrees with AttackSpec.epsilon");
    }
    const std::size_t k = spec.k();

    // Distractors for the guard term: one seeded draw from db \ C, fixed for
    // the whole attack.
    std::vector<CandidateId> distractors;
    if (cfg.xi > 0.0 && cfg.qa_distractor_count > 0) {
        if (cfg.qa_distractor_count > db.size() - k) {
            throw std::invalid_argument("pgd_attack: distractor count exceeds db size - k");
        }
        std::vector<std::size_t> pool;
        pool.reserve(db.size());
        const auto member_indices = resolve_indices(db, spec.candidates, "pgd_attack");
        std::vector<bool> is_member(db.size(), false);
        for (std::size_t idx : member_indices) is_member[idx] = true;
        for (std::size_t i = 0; i < db.size(); ++i) {
            if (!is_member[i]) pool.push_back(i);
        }
        std::mt19937_64 rng(seed);
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(cfg.qa_distractor_count);
        for (std::size_t idx : pool) distractors.push_back(db.id_at(idx));
    }

    const std::size_t d = q.dim();
    Perturbation r = clamp_to_feasible(q, std::vector<double>(d, 0.0), spec.epsilon);
    std::vector<double> raw(d);

    AttackResult result;
    for (int t = 1; t <= pgd.steps; ++t) {
        const QueryImage q_tilde = apply_perturbation(q, r);
        const LossValue loss = loss_oa(model, db, q_tilde.pixels(), spec.candidates,
                                       spec.permutation, cfg, distractors);
        for (std::size_t i = 0; i < d; ++i) {
            raw[i] = r.delta[i] - pgd.eta * sign(loss.gradient[i]);
        }
        r = clamp_to_feasible(q, raw, spec.epsilon);
        if (pgd.record_trace) {
            const RankingList x = rank(model, db, apply_perturbation(q, r), std::nullopt);
            result.trace.emplace_back(static_cast<std::uint64_t>(t),
                                      compute_src(spec.candidates, spec.permutation, x).tau_s);
        }
    }

    if (pgd.quantize) {
        // 8-bit pipelines only carry multiples of 1/255; keep the quantized
        // vector inside the shrunken L-inf ball, then restore the box
        // constraint (which wins at image edges)
        const double eps_q = std::floor(spec.epsilon * 255.0) / 255.0;
        for (std::size_t i = 0; i < d; ++i) {
            raw[i] = std::clamp(std::round(r.delta[i] * 255.0) / 255.0, -eps_q, eps_q);
        }
        r = clamp_to_feasible(q, raw, spec.epsilon);
    }

    const QueryImage q_final = apply_perturbation(q, r);
    const RankingList x_full = rank(model, db, q_final, std::nullopt);
    result.perturbation = std::move(r);
    result.tau_s = compute_src(spec.candidates, spec.permutation, x_full).tau_s;
    result.mean_rank = mean_rank(x_full, spec.candidates, std::nullopt);
    result.queries_used = 0;
    return result;
}

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& fn, std::span<const double> point,
    double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite_difference_gradient: h must be > 0");
    }
    std::vector<double> x(point.begin(), point.end());
    std::vector<double> grad(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = fn(x);
        x[i] = saved - h;
        const double down = fn(x);
        x[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace oatk
