#include "oatk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "oatk/src_metric.hpp"

namespace oatk {

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
    auto mix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return mix(seed ^ mix(index + 1));
}

const char* to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::None: return "none";
        case AttackMethod::Whitebox: return "whitebox";
        case AttackMethod::Rand: return "rand";
        case AttackMethod::Beta: return "beta";
        case AttackMethod::Pso: return "pso";
        case AttackMethod::Nes: return "nes";
        case AttackMethod::Spsa: return "spsa";
    }
    return "?";
}

std::optional<AttackMethod> attack_method_from_string(const std::string& name) {
    if (name == "none") return AttackMethod::None;
    if (name == "whitebox") return AttackMethod::Whitebox;
    if (auto k = optimizer_kind_from_string(name)) {
        switch (*k) {
            case OptimizerKind::Rand: return AttackMethod::Rand;
            case OptimizerKind::Beta: return AttackMethod::Beta;
            case OptimizerKind::Pso: return AttackMethod::Pso;
            case OptimizerKind::Nes: return AttackMethod::Nes;
            case OptimizerKind::Spsa: return AttackMethod::Spsa;
        }
    }
    return std::nullopt;
}

RankingModel make_random_model(std::size_t embed_dim, std::size_t query_dim,
                               std::uint64_t seed) {
    if (embed_dim == 0 || query_dim == 0 || embed_dim >= query_dim) {
        throw std::invalid_argument("make_random_model: need 0 < embed_dim < query_dim");
    }
    std::mt19937_64 rng(split_seed(seed, 0xfeedULL));
    std::normal_distribution<double> normal(0.0, 1.0);

    // Rows are orthonormalized Gaussian draws, additionally orthogonal to the
    // constant vector: the embedder ignores uniform brightness and maps the
    // box center to the embedding origin, which keeps embedding preimages
    // inside the box.
    const double ones_entry = 1.0 / std::sqrt(static_cast<double>(query_dim));
    std::vector<double> w(embed_dim * query_dim);
    for (std::size_t r = 0; r < embed_dim; ++r) {
        double* row = w.data() + r * query_dim;
        for (int attempt = 0;; ++attempt) {
            for (std::size_t c = 0; c < query_dim; ++c) row[c] = normal(rng);
            double ones_dot = 0.0;
            for (std::size_t c = 0; c < query_dim; ++c) ones_dot += row[c] * ones_entry;
            for (std::size_t c = 0; c < query_dim; ++c) row[c] -= ones_dot * ones_entry;
            for (std::size_t p = 0; p < r; ++p) {
                const double* prev = w.data() + p * query_dim;
                double dot = 0.0;
                for (std::size_t c = 0; c < query_dim; ++c) dot += row[c] * prev[c];
                for (std::size_t c = 0; c < query_dim; ++c) row[c] -= dot * prev[c];
            }
            double norm = 0.0;
            for (std::size_t c = 0; c < query_dim; ++c) norm += row[c] * row[c];
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (std::size_t c = 0; c < query_dim; ++c) row[c] /= norm;
                break;
            }
            if (attempt > 8) {
                throw std::runtime_error("make_random_model: degenerate draw");
            }
        }
    }
    return RankingModel(embed_dim, query_dim, std::move(w));
}

SyntheticWorld gen_synthetic_db(const SyntheticConfig& cfg) {
    if (cfg.classes == 0 || cfg.per_class == 0 || cfg.embed_dim == 0 || cfg.query_dim == 0) {
        throw std::invalid_argument("gen_synthetic_db: counts must be positive");
    }
    if (cfg.intra_class_std < 0.0 || cfg.center_scale <= 0.0) {
        throw std::invalid_argument("gen_synthetic_db: bad scale parameters");
    }
    std::mt19937_64 rng(split_seed(cfg.seed, 0xdbULL));
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticWorld world;
    world.class_centers.resize(cfg.classes);
    for (auto& center : world.class_centers) {
        center.resize(cfg.embed_dim);
        for (auto& v : center) v = cfg.center_scale * normal(rng);
    }

    auto db = std::make_shared<EmbeddingDatabase>(cfg.embed_dim);
    const std::size_t total = cfg.classes * cfg.per_class;
    int width = 1;
    for (std::size_t t = total > 0 ? total - 1 : 0; t >= 10; t /= 10) ++width;
    std::vector<double> e(cfg.embed_dim);
    char idbuf[32];
    std::size_t idx = 0;
    for (std::size_t cls = 0; cls < cfg.classes; ++cls) {
        for (std::size_t m = 0; m < cfg.per_class; ++m, ++idx) {
            for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
                e[j] = world.class_centers[cls][j] + cfg.intra_class_std * normal(rng);
            }
            std::snprintf(idbuf, sizeof idbuf, "c%0*zu", width, idx);
            db->add(idbuf, e, static_cast<int>(cls));
        }
    }
    world.db = std::move(db);
    world.model = std::make_shared<RankingModel>(
        make_random_model(cfg.embed_dim, cfg.query_dim, split_seed(cfg.seed, 0x3adeULL)));
    return world;
}

QueryImage preimage_query(const RankingModel& model, std::span<const double> target) {
    if (target.size() != model.embed_dim()) {
        throw std::invalid_argument("preimage_query: embedding dimension mismatch");
    }
    const std::size_t d = model.query_dim();
    // q = 0.5 + W^T (e - b) where b = W * (0.5 * ones). With the rows of
    // make_random_model b is zero and W q equals the target exactly unless
    // the box clamps an entry.
    std::vector<double> y(target.begin(), target.end());
    for (std::size_t r = 0; r < model.embed_dim(); ++r) {
        const auto row = model.weights_row(r);
        double half_sum = 0.0;
        for (double v : row) half_sum += v;
        y[r] -= 0.5 * half_sum;
    }
    std::vector<double> q(d, 0.5);
    for (std::size_t r = 0; r < model.embed_dim(); ++r) {
        const auto row = model.weights_row(r);
        const double yr = y[r];
        if (yr == 0.0) continue;
        for (std::size_t c = 0; c < d; ++c) q[c] += yr * row[c];
    }
    for (auto& v : q) v = std::clamp(v, 0.0, 1.0);
    return QueryImage(std::move(q));
}

void ExperimentConfig::validate() const {
    if (k < 2) {
        throw std::invalid_argument("ExperimentConfig: k must be >= 2");
    }
    if (n && *n < k) {
        throw std::invalid_argument("ExperimentConfig: k exceeds N");
    }
    if (trials < 1) {
        throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
    }
    if (!(epsilon >= 0.0)) {
        throw std::invalid_argument("ExperimentConfig: epsilon must be >= 0");
    }
    if (method != AttackMethod::None && method != AttackMethod::Whitebox && query_budget < 1) {
        throw std::invalid_argument("ExperimentConfig: query budget must be >= 1");
    }
    if (dataset.path && dataset.synthetic) {
        throw std::invalid_argument("ExperimentConfig: dataset is either a file or synthetic");
    }
}

StatSummary StatSummary::of(std::span<const double> values) {
    StatSummary s;
    if (values.empty()) return s;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    s.mean = sum / static_cast<double>(sorted.size());
    double sq = 0.0;
    for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
    s.stdev = sorted.size() > 1 ? std::sqrt(sq / static_cast<double>(sorted.size() - 1)) : 0.0;
    s.min = sorted.front();
    s.max = sorted.back();
    const std::size_t mid = sorted.size() / 2;
    s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return s;
}

namespace {

struct World {
    std::shared_ptr<const EmbeddingDatabase> db;
    std::shared_ptr<const RankingModel> model;
};

World resolve_world(const DatasetSource& src) {
    if (src.path) {
        auto db = std::make_shared<EmbeddingDatabase>(load_db(*src.path));
        auto model = std::make_shared<RankingModel>(
            make_random_model(db->dim(), src.query_dim, split_seed(src.model_seed, 0x3adeULL)));
        return {std::move(db), std::move(model)};
    }
    const SyntheticConfig cfg = src.synthetic.value_or(SyntheticConfig{});
    auto world = gen_synthetic_db(cfg);
    return {world.db, world.model};
}

}  // namespace

std::vector<int> random_permutation_1based(std::size_t k, std::mt19937_64& rng) {
    std::vector<int> p(k);
    for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<int>(i + 1);
    for (std::size_t i = k; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(p[i - 1], p[pick(rng)]);
    }
    return p;
}

AttackResult single_attack(Oracle& oracle, const QueryImage& q, const SingleAttackConfig& cfg,
                           AttackSpec* resolved_spec) {
    AttackSpec spec;
    spec.visible_range = oracle.visible_range();
    spec.epsilon = cfg.epsilon;
    spec.query_budget = cfg.query_budget;
    spec.candidates = cfg.candidates;
    spec.permutation = cfg.permutation;
    if (spec.candidates.empty()) {
        // one charged query resolves the clean top-k
        const RankingList clean = oracle.query(q);
        if (clean.size() < cfg.k) {
            throw std::invalid_argument("single_attack: oracle returned fewer than k entries");
        }
        spec.candidates.assign(clean.entries().begin(), clean.entries().begin() + cfg.k);
    }
    if (spec.permutation.empty()) {
        std::mt19937_64 rng(split_seed(cfg.seed, 0x9e37ULL));
        spec.permutation = random_permutation_1based(spec.candidates.size(), rng);
    }
    spec.validate();
    if (resolved_spec) *resolved_spec = spec;

    OptimizerConfig oc = cfg.optimizer;
    oc.seed = cfg.seed;
    switch (cfg.method) {
        case AttackMethod::Rand: oc.kind = OptimizerKind::Rand; break;
        case AttackMethod::Beta: oc.kind = OptimizerKind::Beta; break;
        case AttackMethod::Pso: oc.kind = OptimizerKind::Pso; break;
        case AttackMethod::Nes: oc.kind = OptimizerKind::Nes; break;
        case AttackMethod::Spsa: oc.kind = OptimizerKind::Spsa; break;
        default:
            throw std::invalid_argument("single_attack: method must be a black-box optimizer");
    }
    return optimize(oracle, q, spec, oc);
}

ExperimentReport run_kn_oa(const ExperimentConfig& cfg) {
    cfg.validate();
    const World world = resolve_world(cfg.dataset);
    const EmbeddingDatabase& db = *world.db;
    const RankingModel& model = *world.model;

    if (cfg.n && db.size() < *cfg.n) {
        throw std::invalid_argument("run_kn_oa: dataset smaller than N");
    }
    if (db.size() < cfg.k) {
        throw std::invalid_argument("run_kn_oa: dataset smaller than k");
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<TrialRecord> records(cfg.trials);

    const auto run_trial = [&](std::size_t t) {
        const std::uint64_t trial_seed = split_seed(cfg.seed, t);
        std::mt19937_64 rng(trial_seed);

        std::uniform_int_distribution<std::size_t> pick(0, db.size() - 1);
        const std::size_t query_idx = pick(rng);
        const QueryImage q = preimage_query(model, db.embedding_at(query_idx));

        const RankingList clean = rank(model, db, q, cfg.n);
        AttackSpec spec;
        spec.candidates.assign(clean.entries().begin(), clean.entries().begin() + cfg.k);
        spec.permutation = random_permutation_1based(cfg.k, rng);
        spec.visible_range = cfg.n;
        spec.epsilon = cfg.epsilon;
        spec.query_budget = cfg.query_budget;
        spec.xi = cfg.whitebox.xi;
        spec.margin_gamma = cfg.whitebox.margin_gamma;

        const std::uint64_t attack_seed = split_seed(trial_seed, 0xa77aULL);
        AttackResult result;
        switch (cfg.method) {
            case AttackMethod::None: {
                result.perturbation =
                    clamp_to_feasible(q, std::vector<double>(q.dim(), 0.0), cfg.epsilon);
                break;
            }
            case AttackMethod::Whitebox: {
                PgdConfig pgd = cfg.pgd;
                pgd.epsilon = cfg.epsilon;
                result = pgd_attack(model, db, q, spec, pgd, cfg.whitebox, attack_seed);
                break;
            }
            default: {
                LocalOracle oracle(world.model, world.db, cfg.n, cfg.query_budget);
                OptimizerConfig oc = cfg.optimizer;
                oc.seed = attack_seed;
                switch (cfg.method) {
                    case AttackMethod::Rand: oc.kind = OptimizerKind::Rand; break;
                    case AttackMethod::Beta: oc.kind = OptimizerKind::Beta; break;
                    case AttackMethod::Pso: oc.kind = OptimizerKind::Pso; break;
                    case AttackMethod::Nes: oc.kind = OptimizerKind::Nes; break;
                    case AttackMethod::Spsa: oc.kind = OptimizerKind::Spsa; break;
                    default: break;
                }
                result = optimize(oracle, q, spec, oc);
                break;
            }
        }

        // Fresh evaluation of the final perturbation; not charged to the
        // attack budget (it is scoring, not attacking).
        const QueryImage q_final = apply_perturbation(q, result.perturbation);
        const RankingList x_eval = rank(model, db, q_final, cfg.n);
        const double tau = compute_src(spec.candidates, spec.permutation, x_eval).tau_s;

        // Guard against optimizer bookkeeping bugs: against the local oracle
        // the recomputed value must match the attack's own claim. (White-box
        // claims are full-ranking values, so they are comparable only when N
        // is unbounded.)
        const bool comparable =
            cfg.method == AttackMethod::Whitebox ? !cfg.n : cfg.method != AttackMethod::None;
        if (comparable && tau != result.tau_s) {
            throw std::logic_error("run_kn_oa: fresh evaluation disagrees with the optimizer");
        }

        TrialRecord rec;
        rec.trial = t;
        rec.tau_s = tau;
        rec.queries_used = result.queries_used;
        rec.seed = trial_seed;
        if (!cfg.n) {
            rec.mean_rank = mean_rank(x_eval, spec.candidates, cfg.n);
        }
        records[t] = rec;
    };

    if (cfg.jobs > 1 && cfg.trials > 1) {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_mu;
        const std::size_t workers = std::min<std::size_t>(cfg.jobs, cfg.trials);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t t = next.fetch_add(1);
                    if (t >= cfg.trials) return;
                    try {
                        run_trial(t);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mu);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    } else {
        for (std::size_t t = 0; t < cfg.trials; ++t) run_trial(t);
    }

    const auto t1 = std::chrono::steady_clock::now();

    ExperimentReport report;
    report.config_echo =
        cfg.config_echo.empty() ? experiment_config_to_json(cfg) : cfg.config_echo;
    report.trials = std::move(records);
    std::vector<double> taus, ranks, queries;
    taus.reserve(report.trials.size());
    for (const auto& r : report.trials) {
        taus.push_back(r.tau_s);
        queries.push_back(static_cast<double>(r.queries_used));
        if (r.mean_rank) ranks.push_back(*r.mean_rank);
    }
    report.tau_s = StatSummary::of(taus);
    if (!cfg.n && ranks.size() == report.trials.size()) {
        report.mean_rank = StatSummary::of(ranks);
    }
    report.mean_queries_used = StatSummary::of(queries).mean;
    report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    report.per_trial_seconds = report.wall_seconds / static_cast<double>(cfg.trials);
    return report;
}

}  // namespace oatk
