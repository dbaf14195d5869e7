#include "oatk/src_metric.hpp"

#include <limits>
#include <stdexcept>
#include <string_view>
#include <unordered_map>

namespace oatk {

SrcResult compute_src(std::span<const CandidateId> candidates, std::span<const int> permutation,
                      const RankingList& x) {
    const std::size_t k = candidates.size();
    if (k < 2) {
        throw std::invalid_argument("compute_src: need k >= 2 to score pairs");
    }
    if (permutation.size() != k || !is_permutation_1based(permutation)) {
        throw std::invalid_argument("compute_src: permutation is not a bijection on {1..k}");
    }

    // Index the permuted candidates; one scan over x resolves their ranks.
    constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();
    std::unordered_map<std::string_view, std::size_t> pos;  // id -> index in C_p
    pos.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const CandidateId& id = candidates[permutation[i] - 1];
        if (!pos.emplace(id, i).second) {
            throw std::invalid_argument("compute_src: duplicate candidate '" + id + "'");
        }
    }
    std::vector<std::size_t> rank_in_x(k, kAbsent);
    const auto& entries = x.entries();
    for (std::size_t m = 0; m < entries.size(); ++m) {
        auto it = pos.find(entries[m]);
        if (it != pos.end()) rank_in_x[it->second] = m;
    }

    SrcResult out{0.0, ScoreMatrix(k)};
    long sum = 0;
    for (std::size_t i = 1; i < k; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            int s;
            if (rank_in_x[i] == kAbsent || rank_in_x[j] == kAbsent) {
                s = -1;  // out-of-range penalty
            } else {
                // Positions in C_p are i > j by loop construction, so the
                // pair is concordant exactly when the observed ranks agree.
                s = rank_in_x[i] > rank_in_x[j] ? +1 : -1;
            }
            out.matrix.set(i, j, s);
            sum += s;
        }
    }
    const double pairs = static_cast<double>(k) * static_cast<double>(k - 1) / 2.0;
    out.tau_s = static_cast<double>(sum) / pairs;
    return out;
}

double kendall_tau(std::span<const int> order_a, std::span<const int> order_b) {
    const std::size_t k = order_a.size();
    if (k != order_b.size()) {
        throw std::invalid_argument("kendall_tau: size mismatch");
    }
    if (k < 2) {
        throw std::invalid_argument("kendall_tau: need size >= 2");
    }
    std::unordered_map<int, std::size_t> pos_b;
    pos_b.reserve(k);
    for (std::size_t m = 0; m < k; ++m) {
        if (!pos_b.emplace(order_b[m], m).second) {
            throw std::invalid_argument("kendall_tau: duplicate item in order_b");
        }
    }
    std::vector<std::size_t> b_of_a(k);
    std::vector<bool> used(k, false);
    for (std::size_t m = 0; m < k; ++m) {
        auto it = pos_b.find(order_a[m]);
        if (it == pos_b.end() || used[it->second]) {
            throw std::invalid_argument("kendall_tau: orders are over different item sets");
        }
        used[it->second] = true;
        b_of_a[m] = it->second;
    }

    long concordant = 0, discordant = 0;
    for (std::size_t i = 1; i < k; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            // item at position i vs j of order_a: a-ranks already satisfy i > j
            if (b_of_a[i] > b_of_a[j]) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const double pairs = static_cast<double>(k) * static_cast<double>(k - 1) / 2.0;
    return static_cast<double>(concordant - discordant) / pairs;
}

double concordant_fraction(double tau_s) {
    if (!(tau_s >= -1.0 && tau_s <= 1.0)) {
        throw std::invalid_argument("concordant_fraction: tau outside [-1,1]");
    }
    return (tau_s + 1.0) / 2.0;
}

}  // namespace oatk
