#include "oatk/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "oatk/numeric.hpp"
#include "oatk/src_metric.hpp"

namespace oatk {

const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Rand: return "rand";
        case OptimizerKind::Beta: return "beta";
        case OptimizerKind::Pso: return "pso";
        case OptimizerKind::Nes: return "nes";
        case OptimizerKind::Spsa: return "spsa";
    }
    return "?";
}

std::optional<OptimizerKind> optimizer_kind_from_string(const std::string& name) {
    if (name == "rand") return OptimizerKind::Rand;
    if (name == "beta") return OptimizerKind::Beta;
    if (name == "pso") return OptimizerKind::Pso;
    if (name == "nes") return OptimizerKind::Nes;
    if (name == "spsa") return OptimizerKind::Spsa;
    return std::nullopt;
}

void OptimizerConfig::validate(std::size_t query_dim) const {
    if (batch < 1) {
        throw std::invalid_argument("OptimizerConfig: batch must be >= 1");
    }
    switch (kind) {
        case OptimizerKind::Nes:
            if (sigma && !(*sigma > 0.0)) {
                throw std::invalid_argument("OptimizerConfig: sigma must be > 0");
            }
            [[fallthrough]];
        case OptimizerKind::Spsa:
            if (!(learning_rate > 0.0)) {
                throw std::invalid_argument("OptimizerConfig: learning_rate must be > 0");
            }
            if (kind == OptimizerKind::Spsa && !(spsa_delta > 0.0)) {
                throw std::invalid_argument("OptimizerConfig: spsa_delta must be > 0");
            }
            break;
        case OptimizerKind::Beta:
            if (!(beta_lr > 0.0)) {
                throw std::invalid_argument("OptimizerConfig: beta_lr must be > 0");
            }
            break;
        case OptimizerKind::Pso:
            if (!(pso.omega >= 0.0) || !(pso.phi_p >= 0.0) || !(pso.phi_g >= 0.0) ||
                pso.swarm < 1) {
                throw std::invalid_argument("OptimizerConfig: bad PSO parameters");
            }
            break;
        case OptimizerKind::Rand:
            break;
    }
    if (reduced_dims) {
        if (!query_dims) {
            throw std::invalid_argument(
                "OptimizerConfig: reduced_dims requires query_dims for the upsample target");
        }
        if (query_dims->count() != query_dim) {
            throw std::invalid_argument("OptimizerConfig: query_dims do not match the query");
        }
        if (reduced_dims->count() == 0 || reduced_dims->count() > query_dim) {
            throw std::invalid_argument("OptimizerConfig: reduced dimension must be in [1, D]");
        }
        if (reduced_dims->channels > query_dims->channels ||
            reduced_dims->height > query_dims->height ||
            reduced_dims->width > query_dims->width) {
            throw std::invalid_argument("OptimizerConfig: reduced dims exceed query dims");
        }
    }
}

std::vector<double> expand_reduced(std::span<const double> r_low, const ReducedDims& low,
                                   const ReducedDims& full) {
    if (low.count() == 0 || full.count() == 0 || r_low.size() != low.count()) {
        throw std::invalid_argument("expand_reduced: shape does not match input length");
    }
    if (low.channels > full.channels || low.height > full.height || low.width > full.width) {
        throw std::invalid_argument("expand_reduced: reduced dims exceed target dims");
    }
    std::vector<double> out(full.count());
    for (std::size_t c = 0; c < full.channels; ++c) {
        const std::size_t sc = c * low.channels / full.channels;
        for (std::size_t y = 0; y < full.height; ++y) {
            const std::size_t sy = y * low.height / full.height;
            for (std::size_t x = 0; x < full.width; ++x) {
                const std::size_t sx = x * low.width / full.width;
                out[(c * full.height + y) * full.width + x] =
                    r_low[(sc * low.height + sy) * low.width + sx];
            }
        }
    }
    return out;
}

SurrogateObjective::SurrogateObjective(Oracle& oracle, std::vector<CandidateId> candidates,
                                       std::vector<int> permutation)
    : oracle_(oracle),
      candidates_(std::move(candidates)),
      permutation_(std::move(permutation)) {
    if (candidates_.size() < 2 || permutation_.size() != candidates_.size() ||
        !is_permutation_1based(permutation_)) {
        throw std::invalid_argument("SurrogateObjective: bad candidate set or permutation");
    }
}

double SurrogateObjective::evaluate(const QueryImage& q_tilde) {
    last_ranking_ = oracle_.query(q_tilde);
    ++evaluations_;
    return compute_src(candidates_, permutation_, last_ranking_).tau_s;
}

// --- Rand --------------------------------------------------------------------

RandSearchState::RandSearchState(std::size_t dim, double epsilon, std::size_t batch,
                                 std::uint64_t seed)
    : dim_(dim), epsilon_(epsilon), batch_(std::max<std::size_t>(1, batch)), rng_(seed) {}

std::vector<double> RandSearchState::propose() {
    std::uniform_real_distribution<double> u(-epsilon_, epsilon_);
    std::vector<double> r(dim_);
    for (auto& v : r) v = u(rng_);
    return r;
}

bool RandSearchState::step(const EvalFn& eval) {
    for (std::size_t i = 0; i < batch_; ++i) {
        if (!eval(propose())) return false;
    }
    return true;
}

// --- Beta --------------------------------------------------------------------

BetaAttackState::BetaAttackState(std::size_t dim, double epsilon, double learning_rate,
                                 std::size_t batch, std::uint64_t seed)
    : dim_(dim),
      epsilon_(epsilon),
      lr_(learning_rate),
      batch_(std::max<std::size_t>(1, batch)),
      rng_(seed),
      a_(dim, 1.0),  // Beta(1,1) is uniform: starts as random search
      b_(dim, 1.0) {
    if (lr_ < 0.0) {
        throw std::invalid_argument("BetaAttackState: learning rate must be >= 0");
    }
}

std::vector<double> BetaAttackState::sample_z() {
    std::vector<double> z(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        std::gamma_distribution<double> ga(a_[i], 1.0), gb(b_[i], 1.0);
        const double x = ga(rng_);
        const double y = gb(rng_);
        const double denom = x + y;
        double v = denom > 0.0 ? x / denom : 0.5;
        // keep log z and log(1-z) finite for the score function
        z[i] = std::clamp(v, 1e-12, 1.0 - 1e-12);
    }
    return z;
}

double BetaAttackState::log_density_grad_a(double a, double b, double z) {
    return digamma(a + b) - digamma(a) + std::log(z);
}

double BetaAttackState::log_density_grad_b(double a, double b, double z) {
    return digamma(a + b) - digamma(b) + std::log(1.0 - z);
}

bool BetaAttackState::step(const EvalFn& eval) {
    std::vector<double> grad_a(dim_, 0.0), grad_b(dim_, 0.0), r(dim_);
    std::size_t evaluated = 0;
    bool alive = true;
    for (std::size_t h = 0; h < batch_; ++h) {
        const std::vector<double> z = sample_z();
        for (std::size_t i = 0; i < dim_; ++i) r[i] = epsilon_ * (2.0 * z[i] - 1.0);
        const auto tau = eval(r);
        if (!tau) {
            alive = false;
            break;
        }
        ++evaluated;
        for (std::size_t i = 0; i < dim_; ++i) {
            grad_a[i] += *tau * log_density_grad_a(a_[i], b_[i], z[i]);
            grad_b[i] += *tau * log_density_grad_b(a_[i], b_[i], z[i]);
        }
    }
    if (evaluated > 0 && lr_ > 0.0) {
        const double scale = lr_ / static_cast<double>(evaluated);
        for (std::size_t i = 0; i < dim_; ++i) {
            a_[i] = std::max(kParamFloor, a_[i] + scale * grad_a[i]);
            b_[i] = std::max(kParamFloor, b_[i] + scale * grad_b[i]);
        }
    }
    return alive;
}

// --- PSO ---------------------------------------------------------------------

void pso_velocity_update(std::span<double> velocity, std::span<const double> position,
                         std::span<const double> personal_best,
                         std::span<const double> global_best, const PsoParams& params,
                         double rand_p, double rand_g) {
    for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = params.omega * velocity[i] +
                      rand_p * params.phi_p * (personal_best[i] - position[i]) +
                      rand_g * params.phi_g * (global_best[i] - position[i]);
    }
}

PsoState::PsoState(std::size_t dim, double epsilon, PsoParams params, std::uint64_t seed,
                   ProjectFn project)
    : epsilon_(epsilon),
      params_(params),
      rng_(seed),
      project_(std::move(project)),
      global_best_(dim, 0.0),
      global_best_tau_(-std::numeric_limits<double>::infinity()) {
    if (params_.swarm < 1) {
        throw std::invalid_argument("PsoState: swarm must be >= 1");
    }
    std::uniform_real_distribution<double> u(-epsilon_, epsilon_);
    positions_.resize(params_.swarm);
    velocities_.assign(params_.swarm, std::vector<double>(dim, 0.0));
    personal_best_.resize(params_.swarm);
    personal_best_tau_.assign(params_.swarm, -std::numeric_limits<double>::infinity());
    for (auto& y : positions_) {
        y.resize(dim);
        for (auto& v : y) v = u(rng_);
        if (project_) project_(y);
    }
}

bool PsoState::step(const EvalFn& eval) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        if (initialized_) {
            const double rp = unit(rng_);
            const double rg = unit(rng_);
            pso_velocity_update(velocities_[i], positions_[i], personal_best_[i], global_best_,
                                params_, rp, rg);
            for (std::size_t d = 0; d < positions_[i].size(); ++d) {
                positions_[i][d] += velocities_[i][d];
            }
            if (project_) project_(positions_[i]);
        }
        const auto tau = eval(positions_[i]);
        if (!tau) return false;
        if (*tau > personal_best_tau_[i]) {
            personal_best_tau_[i] = *tau;
            personal_best_[i] = positions_[i];
        }
        if (*tau > global_best_tau_) {
            global_best_tau_ = *tau;
            global_best_ = positions_[i];
        }
    }
    initialized_ = true;
    return true;
}

// --- NES / SPSA ----------------------------------------------------------------

GradientSignState::GradientSignState(std::size_t dim, Sampling sampling, double probe_scale,
                                     double learning_rate, std::size_t batch,
                                     std::uint64_t seed, ProjectFn project,
                                     std::vector<double> initial)
    : dim_(dim),
      sampling_(sampling),
      probe_scale_(probe_scale),
      lr_(learning_rate),
      batch_(batch),
      rng_(seed),
      project_(std::move(project)),
      current_(std::move(initial)) {
    if (current_.size() != dim_) {
        throw std::invalid_argument("GradientSignState: initial iterate has wrong dimension");
    }
    if (lr_ < 0.0 || probe_scale_ < 0.0) {
        throw std::invalid_argument("GradientSignState: negative step or probe scale");
    }
    if (project_) project_(current_);
}

std::vector<double> GradientSignState::draw_direction() {
    std::vector<double> u(dim_);
    if (sampling_ == Sampling::Gaussian) {
        std::normal_distribution<double> n(0.0, 1.0);
        for (auto& v : u) v = n(rng_);
    } else {
        std::bernoulli_distribution coin(0.5);
        for (auto& v : u) v = coin(rng_) ? 1.0 : -1.0;
    }
    return u;
}

std::vector<double> GradientSignState::estimate_gradient(const EvalFn& eval, bool* alive) {
    *alive = true;
    std::vector<double> g(dim_, 0.0), probe(dim_);
    const std::size_t pairs = std::max<std::size_t>(1, batch_ / 2);
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::vector<double> u = draw_direction();
        for (std::size_t i = 0; i < dim_; ++i) probe[i] = current_[i] + probe_scale_ * u[i];
        const auto up = eval(probe);
        if (!up) {
            *alive = false;
            break;
        }
        for (std::size_t i = 0; i < dim_; ++i) probe[i] = current_[i] - probe_scale_ * u[i];
        const auto down = eval(probe);
        if (!down) {
            // the unpaired probe is dropped from the estimate
            *alive = false;
            break;
        }
        const double diff = *up - *down;
        if (diff != 0.0) {
            for (std::size_t i = 0; i < dim_; ++i) g[i] += diff * u[i];
        }
    }
    return g;
}

bool GradientSignState::step(const EvalFn& eval) {
    bool alive = true;
    const std::vector<double> g = estimate_gradient(eval, &alive);
    for (std::size_t i = 0; i < dim_; ++i) {
        current_[i] += lr_ * sign(g[i]);
    }
    if (project_) project_(current_);
    return alive;
}

// --- driver --------------------------------------------------------------------

namespace {

// Lifts a search-space candidate to a feasible perturbation and tracks the
// best observed evaluation; also caps the attack at its own budget so a
// laxer oracle (e.g. a remote one with a larger per-client limit) can never
// make the attack overspend.
class BudgetedEvaluator {
public:
    BudgetedEvaluator(SurrogateObjective& objective, const QueryImage& q, double epsilon,
                      std::uint64_t budget, const std::optional<ReducedDims>& reduced,
                      const std::optional<ReducedDims>& full)
        : objective_(objective),
          q_(q),
          epsilon_(epsilon),
          budget_(budget),
          reduced_(reduced),
          full_(full) {}

    Perturbation lift(std::span<const double> r_search) const {
        if (reduced_) {
            return clamp_to_feasible(q_, expand_reduced(r_search, *reduced_, *full_), epsilon_);
        }
        return clamp_to_feasible(q_, r_search, epsilon_);
    }

    std::optional<double> operator()(std::span<const double> r_search) {
        if (stopped_ || used_ >= budget_) {
            stopped_ = true;
            return std::nullopt;
        }
        const Perturbation p = lift(r_search);
        double tau;
        try {
            tau = objective_.evaluate(apply_perturbation(q_, p));
        } catch (const BudgetExhausted&) {
            stopped_ = true;
            return std::nullopt;
        }
        ++used_;
        if (tau > best_tau_) {
            best_tau_ = tau;
            best_.assign(r_search.begin(), r_search.end());
            best_ranking_ = objective_.last_ranking();
        }
        if (tau >= 1.0) {
            stopped_ = true;  // a perfect candidate cannot be improved
        }
        return tau;
    }

    bool stopped() const { return stopped_; }
    std::uint64_t used() const { return used_; }
    double best_tau() const { return best_tau_; }
    std::span<const double> best() const { return best_; }
    const RankingList& best_ranking() const { return best_ranking_; }

private:
    SurrogateObjective& objective_;
    const QueryImage& q_;
    double epsilon_;
    std::uint64_t budget_;
    std::optional<ReducedDims> reduced_, full_;
    bool stopped_ = false;
    std::uint64_t used_ = 0;
    double best_tau_ = -std::numeric_limits<double>::infinity();
    std::vector<double> best_;
    RankingList best_ranking_;
};

}  // namespace

AttackResult optimize(Oracle& oracle, const QueryImage& q, const AttackSpec& spec,
                      const OptimizerConfig& cfg) {
    spec.validate();
    cfg.validate(q.dim());
    if (spec.query_budget < 1) {
        throw std::invalid_argument("optimize: query budget must be >= 1");
    }

    SurrogateObjective objective(oracle, spec.candidates, spec.permutation);
    BudgetedEvaluator evaluate(objective, q, spec.epsilon, spec.query_budget, cfg.reduced_dims,
                               cfg.query_dims);
    const std::size_t sdim = cfg.reduced_dims ? cfg.reduced_dims->count() : q.dim();

    // The search-space projection: the L-inf ball always, plus the image box
    // when the search space is the query space itself. Reduced-space iterates
    // meet the box constraint after upsampling, inside lift().
    ProjectFn project;
    if (cfg.reduced_dims) {
        const double eps = spec.epsilon;
        project = [eps](std::span<double> r) {
            for (auto& v : r) v = std::clamp(v, -eps, eps);
        };
    } else {
        const double eps = spec.epsilon;
        const QueryImage* qp = &q;
        project = [eps, qp](std::span<double> r) {
            const auto clamped = clamp_to_feasible(*qp, r, eps);
            std::copy(clamped.delta.begin(), clamped.delta.end(), r.begin());
        };
    }

    // First query: the zero perturbation (or the random point under the
    // init-mode ablation). With Q = 1 this is the whole attack.
    std::mt19937_64 init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> initial(sdim, 0.0);
    if (cfg.init == InitMode::UniformRandom) {
        std::uniform_real_distribution<double> u(-spec.epsilon, spec.epsilon);
        for (auto& v : initial) v = u(init_rng);
        project(initial);
    }
    AttackResult result;
    evaluate(initial);
    result.trace.emplace_back(0, evaluate.best_tau());

    std::uint64_t iteration = 0;
    const auto record = [&]() { result.trace.emplace_back(++iteration, evaluate.best_tau()); };
    const EvalFn eval_fn = [&](std::span<const double> r) { return evaluate(r); };

    switch (cfg.kind) {
        case OptimizerKind::Rand: {
            RandSearchState state(sdim, spec.epsilon, cfg.batch, cfg.seed);
            while (!evaluate.stopped() && state.step(eval_fn)) record();
            break;
        }
        case OptimizerKind::Beta: {
            BetaAttackState state(sdim, spec.epsilon, cfg.beta_lr, cfg.batch, cfg.seed);
            while (!evaluate.stopped() && state.step(eval_fn)) record();
            break;
        }
        case OptimizerKind::Pso: {
            PsoState state(sdim, spec.epsilon, cfg.pso, cfg.seed, project);
            while (!evaluate.stopped() && state.step(eval_fn)) record();
            break;
        }
        case OptimizerKind::Nes:
        case OptimizerKind::Spsa: {
            const bool nes = cfg.kind == OptimizerKind::Nes;
            GradientSignState state(
                sdim, nes ? GradientSignState::Sampling::Gaussian
                          : GradientSignState::Sampling::Rademacher,
                nes ? cfg.resolved_sigma(spec.epsilon) : cfg.spsa_delta, cfg.learning_rate,
                cfg.batch, cfg.seed, project, std::move(initial));
            while (!evaluate.stopped() && state.step(eval_fn)) record();
            break;
        }
    }

    if (evaluate.used() == 0) {
        throw BudgetExhausted("optimize: the oracle refused even the baseline query");
    }
    if (result.trace.back().second != evaluate.best_tau()) {
        // the best candidate arrived in a step the budget cut short
        result.trace.emplace_back(iteration + 1, evaluate.best_tau());
    }
    result.queries_used = evaluate.used();
    result.tau_s = evaluate.best_tau();
    result.perturbation = evaluate.lift(evaluate.best());
    result.mean_rank = [&]() -> std::optional<double> {
        try {
            return mean_rank(evaluate.best_ranking(), spec.candidates, spec.visible_range);
        } catch (const std::invalid_argument&) {
            return std::nullopt;
        }
    }();
    return result;
}

}  // namespace oatk
