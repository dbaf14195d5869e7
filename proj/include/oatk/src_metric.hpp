#ifndef OATK_SRC_METRIC_HPP
#define OATK_SRC_METRIC_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "oatk/core.hpp"

// Short-range Ranking Correlation (SRC, tau_S): a Kendall-style correlation
// between the attacker's target permutation and the order actually observed
// in a truncated ranking, with a -1 penalty for every pair that has a member
// missing from the visible range.

namespace oatk {

/// k x k pair-score matrix. Only the strict lower triangle carries scores
/// (each in {-1,+1}); the diagonal and upper triangle stay 0.
class ScoreMatrix {
public:
    explicit ScoreMatrix(std::size_t k) : k_(k), s_(k * k, 0) {}

    std::size_t k() const { return k_; }
    int at(std::size_t i, std::size_t j) const { return s_[i * k_ + j]; }
    void set(std::size_t i, std::size_t j, int v) { s_[i * k_ + j] = static_cast<std::int8_t>(v); }

    std::span<const std::int8_t> raw() const { return s_; }

private:
    std::size_t k_;
    std::vector<std::int8_t> s_;
};

struct SrcResult {
    double tau_s = 0.0;
    ScoreMatrix matrix{0};
};

/// tau_S over the truncated ranking x. Candidates are first permuted by the
/// 1-based permutation p; pair (i,j), i > j, of the permuted list scores +1
/// when their observed order agrees with the permuted order, -1 when it
/// disagrees, and -1 when either member is absent from x. tau_S is the sum
/// over the strict lower triangle divided by k(k-1)/2.
///
/// Complexity O(|x| + k^2) via a hash index over the candidates.
/// Throws std::invalid_argument when k < 2, candidates contain duplicates,
/// or p is not a bijection on {1..k}.
SrcResult compute_src(std::span<const CandidateId> candidates, std::span<const int> permutation,
                      const RankingList& x);

/// Classical Kendall tau between two orderings of the same item set, given
/// as sequences of item tokens: (n_concordant - n_discordant) / (k(k-1)/2).
/// Symmetric in its arguments. Throws std::invalid_argument when the sizes
/// differ, size < 2, or the item sets are not identical.
double kendall_tau(std::span<const int> order_a, std::span<const int> order_b);

/// Fraction of concordant pairs implied by a tau value with no out-of-range
/// pairs: (tau + 1) / 2.
double concordant_fraction(double tau_s);

}  // namespace oatk

#endif
