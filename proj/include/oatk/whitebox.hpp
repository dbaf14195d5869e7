#ifndef OATK_WHITEBOX_HPP
#define OATK_WHITEBOX_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "oatk/core.hpp"
#include "oatk/oracle.hpp"

// White-box attack: the pairwise relative-order hinge loss, the absolute-rank
// guard term, their weighted combination, and the projected sign-gradient
// loop that minimizes them under the L-inf / box constraints.

namespace oatk {

struct WhiteboxLossConfig {
    double xi = 0.0;            // weight of the absolute-rank guard term
    double margin_gamma = 0.0;  // hinge margin inside the relative-order loss
    std::size_t qa_distractor_count = 10;
};

struct PgdConfig {
    double eta = 1.0 / 255.0;  // step size
    int steps = 24;            // T
    double epsilon = 0.0;
    bool record_trace = false;  // per-step tau trace costs one ranking per step
    bool quantize = false;      // snap the final perturbation to 1/255 steps

    /// eta must be positive and, unless epsilon is 0 (degenerate no-op
    /// attack), no larger than epsilon.
    void validate() const;
};

struct LossValue {
    double value = 0.0;
    std::vector<double> gradient;  // d value / d q_tilde, length D
};

/// Relative-order loss: sum over pairs i < j of the permuted candidate list
/// of [gamma + f(q,c_pi) - f(q,c_pj)]^+. Zero (with gamma = 0) exactly when
/// the full distance chain holds. The gradient is the analytic derivative
/// through the linear embedder; a candidate whose distance is exactly zero
/// contributes a zero subgradient.
///
/// q_tilde is the adversarial query as a raw vector; the loss is defined on
/// all of R^D, feasibility is the caller's concern.
LossValue loss_reo(const RankingModel& model, const EmbeddingDatabase& db,
                   std::span<const double> q_tilde, std::span<const CandidateId> candidates,
                   std::span<const int> permutation, double margin_gamma = 0.0);

/// Absolute-rank guard: sum over c in C, x in distractors of
/// [f(q,c) - f(q,x)]^+. Empty distractor set gives 0 with a zero gradient.
LossValue loss_qa_plus(const RankingModel& model, const EmbeddingDatabase& db,
                       std::span<const double> q_tilde, std::span<const CandidateId> candidates,
                       std::span<const CandidateId> distractors);

/// loss_reo + xi * loss_qa_plus, gradient combined the same way.
LossValue loss_oa(const RankingModel& model, const EmbeddingDatabase& db,
                  std::span<const double> q_tilde, std::span<const CandidateId> candidates,
                  std::span<const int> permutation, const WhiteboxLossConfig& cfg,
                  std::span<const CandidateId> distractors);

/// Projected sign-gradient descent on loss_oa, starting from a zero
/// perturbation and clipping every iterate back into the feasible set.
/// Distractors for the guard term are drawn once (uniformly from the
/// database minus C, seeded) and held fixed across all steps; none are drawn
/// when cfg.xi == 0.
///
/// The returned tau_s and mean_rank are evaluated against the model's full
/// (untruncated) ranking. queries_used is 0: the white-box attacker never
/// touches the oracle interface.
AttackResult pgd_attack(const RankingModel& model, const EmbeddingDatabase& db,
                        const QueryImage& q, const AttackSpec& spec, const PgdConfig& pgd,
                        const WhiteboxLossConfig& cfg, std::uint64_t seed = 1);

/// Central-difference gradient of fn at point, step h per coordinate. Test
/// oracle for the analytic gradients; deliberately knows nothing about the
/// loss implementations.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& fn, std::span<const double> point,
    double h);

}  // namespace oatk

#endif
