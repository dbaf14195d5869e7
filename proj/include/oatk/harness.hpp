#ifndef OATK_HARNESS_HPP
#define OATK_HARNESS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oatk/blackbox.hpp"
#include "oatk/core.hpp"
#include "oatk/oracle.hpp"
#include "oatk/whitebox.hpp"

// The (k,N) experiment protocol: draw a query, take its clean top-k as the
// candidate set, draw a random target permutation, attack, then score the
// final perturbation with a fresh evaluation. Plus synthetic database
// generation so everything runs at desk scale.

namespace oatk {

struct SyntheticConfig {
    std::size_t classes = 10;
    std::size_t per_class = 100;
    std::size_t embed_dim = 32;
    std::size_t query_dim = 3 * 32 * 32;
    double intra_class_std = 0.3;
    double center_scale = 1.0;
    std::uint64_t seed = 1;
};

struct SyntheticWorld {
    std::shared_ptr<const EmbeddingDatabase> db;
    std::shared_ptr<const RankingModel> model;
    std::vector<std::vector<double>> class_centers;  // kept for diagnostics
};

/// Class centers are i.i.d. scaled Gaussians, members are centers plus
/// intra_class_std noise, the embedder has orthonormalized Gaussian rows.
/// Deterministic per seed.
SyntheticWorld gen_synthetic_db(const SyntheticConfig& cfg);

/// The embedder used for synthetic worlds and for file-backed databases
/// (which store only embeddings): rows are Gram-Schmidt-orthonormalized
/// Gaussian draws, deterministic per seed.
RankingModel make_random_model(std::size_t embed_dim, std::size_t query_dim,
                               std::uint64_t seed);

/// A query image whose embedding is (up to box clamping) a given target, so
/// drawn queries land inside the database's neighborhood structure.
QueryImage preimage_query(const RankingModel& model, std::span<const double> target_embedding);

enum class AttackMethod { None, Whitebox, Rand, Beta, Pso, Nes, Spsa };

const char* to_string(AttackMethod m);
std::optional<AttackMethod> attack_method_from_string(const std::string& name);

struct DatasetSource {
    std::optional<SyntheticConfig> synthetic;  // default when path is unset
    std::optional<std::string> path;           // embedding file
    std::uint64_t model_seed = 1;              // embedder seed for file-backed data
    std::size_t query_dim = 3 * 32 * 32;       // query dimension for file-backed data
};

struct ExperimentConfig {
    std::size_t k = 5;
    VisibleRange n;  // N; nullopt = unbounded
    double epsilon = 4.0 / 255.0;
    std::uint64_t query_budget = 1000;
    std::size_t trials = 200;
    AttackMethod method = AttackMethod::Nes;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    PgdConfig pgd;
    WhiteboxLossConfig whitebox;
    OptimizerConfig optimizer;
    DatasetSource dataset;

    /// Resolved-config echo embedded in every report. Parsers fill it with
    /// the original value spellings; when empty it is regenerated from the
    /// struct.
    std::string config_echo;

    void validate() const;
};

struct TrialRecord {
    std::size_t trial = 0;
    double tau_s = 0.0;
    std::optional<double> mean_rank;
    std::uint64_t queries_used = 0;
    std::uint64_t seed = 0;
};

struct StatSummary {
    double mean = 0.0, stdev = 0.0, min = 0.0, max = 0.0, median = 0.0;

    static StatSummary of(std::span<const double> values);
};

struct ExperimentReport {
    std::string config_echo;  // fully-resolved config, JSON
    std::vector<TrialRecord> trials;
    StatSummary tau_s;
    std::optional<StatSummary> mean_rank;  // reported only when N is unbounded
    double mean_queries_used = 0.0;
    double wall_seconds = 0.0;
    double per_trial_seconds = 0.0;
};

/// Runs the full protocol. Per trial: a query is drawn from the database
/// (via its embedding preimage), its clean top-k become the candidate set,
/// a uniform random permutation is drawn, the selected attack runs, and the
/// final perturbation is re-scored with a fresh ranking evaluation. Neither
/// the setup ranking nor the final scoring is charged to the attack budget.
/// Trials own independent generators derived from (seed, trial), so serial
/// and parallel runs agree.
ExperimentReport run_kn_oa(const ExperimentConfig& cfg);

/// Deterministic (seed, index) stream splitter used for per-trial seeding.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

/// Uniform draw from the symmetric group on {1..k} (Fisher-Yates).
std::vector<int> random_permutation_1based(std::size_t k, std::mt19937_64& rng);

std::string experiment_config_to_json(const ExperimentConfig& cfg);
std::string report_to_json(const ExperimentReport& report);
std::string report_to_csv(const ExperimentReport& report);
std::string report_to_text(const ExperimentReport& report);

/// One attack on one query; the single-shot path behind the CLI. The
/// candidate set defaults to the clean top-k obtained through one charged
/// oracle query when the spec's candidates are empty.
struct SingleAttackConfig {
    std::size_t k = 5;
    double epsilon = 4.0 / 255.0;
    std::uint64_t query_budget = 1000;
    std::uint64_t seed = 1;
    AttackMethod method = AttackMethod::Spsa;
    OptimizerConfig optimizer;
    std::vector<CandidateId> candidates;  // explicit C; empty = clean top-k
    std::vector<int> permutation;         // explicit p; empty = seeded random
};

AttackResult single_attack(Oracle& oracle, const QueryImage& q, const SingleAttackConfig& cfg,
                           AttackSpec* resolved_spec = nullptr);

}  // namespace oatk

#endif
