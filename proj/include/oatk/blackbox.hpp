#ifndef OATK_BLACKBOX_HPP
#define OATK_BLACKBOX_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "oatk/core.hpp"
#include "oatk/oracle.hpp"

// Black-box attack: five gradient-free optimizers maximizing the truncated
// ranking correlation through the oracle interface, plus the search-space
// dimension-reduction transform.
//
// All optimizers share the same contract: the first evaluated candidate is
// the zero perturbation (random-init mode replaces it for the ablation), the
// reported result is the best candidate ever observed, every evaluated
// candidate is feasible, and the attack never issues more than Q queries.

namespace oatk {

enum class OptimizerKind { Rand, Beta, Pso, Nes, Spsa };

const char* to_string(OptimizerKind k);
std::optional<OptimizerKind> optimizer_kind_from_string(const std::string& name);

struct ReducedDims {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t count() const { return channels * height * width; }
    bool operator==(const ReducedDims&) const = default;
};

struct PsoParams {
    double omega = 1.1;
    double phi_p = 0.57;
    double phi_g = 0.44;
    std::size_t swarm = 40;
};

enum class InitMode { Zero, UniformRandom };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Nes;
    std::size_t batch = 50;                // H evaluations per step
    double learning_rate = 2.0 / 255.0;    // NES/SPSA sign-step size
    std::optional<double> sigma;           // NES sampling scale; defaults to 2 * epsilon
    double spsa_delta = 2.0 / 255.0;       // SPSA probe magnitude
    double beta_lr = 3.0;
    PsoParams pso;
    std::uint64_t seed = 1;
    std::optional<ReducedDims> reduced_dims;  // optimize here, upsample to the query
    std::optional<ReducedDims> query_dims;    // full query shape; required with reduced_dims
    InitMode init = InitMode::Zero;           // UniformRandom exists for the init ablation

    double resolved_sigma(double epsilon) const { return sigma ? *sigma : 2.0 * epsilon; }
    /// Checks the fields the selected kind uses; throws std::invalid_argument.
    void validate(std::size_t query_dim) const;
};

/// Nearest-neighbor upsampling of a low-dimensional perturbation onto the
/// full query shape. When the low dims divide the full dims evenly every
/// value is replicated over a block; otherwise indices are resampled by
/// floor scaling. Throws std::invalid_argument on incompatible shapes.
std::vector<double> expand_reduced(std::span<const double> r_low, const ReducedDims& low,
                                   const ReducedDims& full);

/// tau_S of an adversarial query, evaluated through one oracle call.
/// Each evaluate() consumes exactly one budget unit (the oracle's ledger);
/// it rethrows the oracle's BudgetExhausted untouched.
class SurrogateObjective {
public:
    SurrogateObjective(Oracle& oracle, std::vector<CandidateId> candidates,
                       std::vector<int> permutation);

    double evaluate(const QueryImage& q_tilde);
    std::uint64_t evaluations() const { return evaluations_; }
    const RankingList& last_ranking() const { return last_ranking_; }
    std::span<const CandidateId> candidates() const { return candidates_; }
    std::span<const int> permutation() const { return permutation_; }

private:
    Oracle& oracle_;
    std::vector<CandidateId> candidates_;
    std::vector<int> permutation_;
    std::uint64_t evaluations_ = 0;
    RankingList last_ranking_;
};

/// Runs the configured optimizer against the oracle. Stops when the attack
/// budget (spec.query_budget, or the oracle's own ledger if tighter) is
/// spent, or early once a candidate reaches tau_S = 1 and no improvement is
/// possible. Returns the best observed candidate, never the last iterate.
AttackResult optimize(Oracle& oracle, const QueryImage& q, const AttackSpec& spec,
                      const OptimizerConfig& cfg);

// --- step-level machinery (exposed for tests) --------------------------------

/// Evaluates one search-space candidate; nullopt means the budget ended and
/// the optimizer must stop.
using EvalFn = std::function<std::optional<double>(std::span<const double>)>;

/// Projects a search-space iterate back onto its feasible set, in place.
using ProjectFn = std::function<void(std::span<double>)>;

class RandSearchState {
public:
    RandSearchState(std::size_t dim, double epsilon, std::size_t batch, std::uint64_t seed);

    /// One i.i.d. uniform draw on [-eps, +eps]^dim.
    std::vector<double> propose();

    /// Evaluates one batch; false once the budget ends.
    bool step(const EvalFn& eval);

private:
    std::size_t dim_;
    double epsilon_;
    std::size_t batch_;
    std::mt19937_64 rng_;
};

/// Per-dimension Beta search distribution over z in [0,1], r = eps*(2z - 1),
/// updated by the score-function gradient of the expected tau.
class BetaAttackState {
public:
    BetaAttackState(std::size_t dim, double epsilon, double learning_rate, std::size_t batch,
                    std::uint64_t seed);

    std::vector<double> sample_z();
    bool step(const EvalFn& eval);

    std::span<const double> alpha() const { return a_; }
    std::span<const double> beta() const { return b_; }

    /// d/da log Beta(z | a, b) and d/db counterpart.
    static double log_density_grad_a(double a, double b, double z);
    static double log_density_grad_b(double a, double b, double z);

    static constexpr double kParamFloor = 1e-3;  // keeps the digamma terms finite

private:
    std::size_t dim_;
    double epsilon_;
    double lr_;
    std::size_t batch_;
    std::mt19937_64 rng_;
    std::vector<double> a_, b_;
};

/// Velocity formula of standard PSO with scalar per-term randomness. Pure so
/// the contraction properties can be tested with pinned draws.
void pso_velocity_update(std::span<double> velocity, std::span<const double> position,
                         std::span<const double> personal_best,
                         std::span<const double> global_best, const PsoParams& params,
                         double rand_p, double rand_g);

class PsoState {
public:
    PsoState(std::size_t dim, double epsilon, PsoParams params, std::uint64_t seed,
             ProjectFn project);

    /// First call evaluates the random initial swarm; later calls apply the
    /// velocity update, project every particle, and re-evaluate.
    bool step(const EvalFn& eval);

    std::size_t swarm_size() const { return positions_.size(); }
    std::span<const double> position(std::size_t i) const { return positions_[i]; }
    std::span<const double> global_best() const { return global_best_; }
    double global_best_tau() const { return global_best_tau_; }

private:
    double epsilon_;
    PsoParams params_;
    std::mt19937_64 rng_;
    ProjectFn project_;
    bool initialized_ = false;
    std::vector<std::vector<double>> positions_, velocities_, personal_best_;
    std::vector<double> personal_best_tau_;
    std::vector<double> global_best_;
    double global_best_tau_;
};

/// Shared NES/SPSA loop: antithetic probes around the current iterate, a
/// score-difference gradient estimate, then a projected sign step. The two
/// algorithms differ only in how probe directions are sampled.
class GradientSignState {
public:
    enum class Sampling { Gaussian, Rademacher };

    GradientSignState(std::size_t dim, Sampling sampling, double probe_scale,
                      double learning_rate, std::size_t batch, std::uint64_t seed,
                      ProjectFn project, std::vector<double> initial);

    /// Gradient estimate from up to batch/2 antithetic probe pairs around
    /// the current iterate; unscaled (callers use the sign). Sets *alive to
    /// false when the budget ended. Pairs cut short by the budget are
    /// dropped from the estimate; the lone probe still counts as a query.
    std::vector<double> estimate_gradient(const EvalFn& eval, bool* alive);

    bool step(const EvalFn& eval);

    std::span<const double> current() const { return current_; }

private:
    std::vector<double> draw_direction();

    std::size_t dim_;
    Sampling sampling_;
    double probe_scale_;
    double lr_;
    std::size_t batch_;
    std::mt19937_64 rng_;
    ProjectFn project_;
    std::vector<double> current_;
};

}  // namespace oatk

#endif
