#include "oatk/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace oatk {

QueryImage::QueryImage(std::vector<double> pixels) : pixels_(std::move(pixels)) {
    if (pixels_.empty()) {
        throw std::invalid_argument("QueryImage: dimension must be positive");
    }
    for (double v : pixels_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("QueryImage: element out of [0,1]");
        }
    }
}

double Perturbation::linf_norm() const {
    double m = 0.0;
    for (double v : delta) m = std::max(m, std::abs(v));
    return m;
}

Perturbation clamp_to_feasible(const QueryImage& q, std::span<const double> raw,
                               double epsilon) {
    if (raw.size() != q.dim()) {
        throw std::invalid_argument("clamp_to_feasible: dimension mismatch");
    }
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw std::invalid_argument("clamp_to_feasible: epsilon must be finite and >= 0");
    }
    Perturbation out;
    out.epsilon = epsilon;
    out.delta.resize(raw.size());
    const auto& px = q.pixels();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        double d = std::clamp(raw[i], -epsilon, epsilon);
        // box constraint: q + d must stay in [0,1]
        d = std::clamp(d, -px[i], 1.0 - px[i]);
        out.delta[i] = d;
    }
    return out;
}

QueryImage apply_perturbation(const QueryImage& q, const Perturbation& p) {
    if (p.delta.size() != q.dim()) {
        throw std::invalid_argument("apply_perturbation: dimension mismatch");
    }
    std::vector<double> px = q.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = std::clamp(px[i] + p.delta[i], 0.0, 1.0);
    }
    return QueryImage(std::move(px));
}

RankingList RankingList::checked(std::vector<CandidateId> entries) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(entries.size());
    for (const auto& id : entries) {
        if (!seen.insert(id).second) {
            throw ProtocolError("ranking list contains duplicate id '" + id + "'");
        }
    }
    return RankingList(std::move(entries));
}

std::optional<std::size_t> RankingList::rank_of(const CandidateId& id) const {
    for (std::size_t m = 0; m < entries_.size(); ++m) {
        if (entries_[m] == id) return m;
    }
    return std::nullopt;
}

bool is_permutation_1based(std::span<const int> p) {
    std::vector<bool> seen(p.size(), false);
    for (int v : p) {
        if (v < 1 || static_cast<std::size_t>(v) > p.size() || seen[v - 1]) return false;
        seen[v - 1] = true;
    }
    return true;
}

void AttackSpec::validate() const {
    if (candidates.empty()) {
        throw std::invalid_argument("AttackSpec: candidate set is empty");
    }
    std::unordered_set<std::string_view> ids;
    for (const auto& c : candidates) {
        if (!ids.insert(c).second) {
            throw std::invalid_argument("AttackSpec: duplicate candidate '" + c + "'");
        }
    }
    if (permutation.size() != candidates.size() || !is_permutation_1based(permutation)) {
        throw std::invalid_argument("AttackSpec: permutation is not a bijection on {1..k}");
    }
    if (visible_range && *visible_range < candidates.size()) {
        throw std::invalid_argument("AttackSpec: k exceeds visible range N");
    }
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw std::invalid_argument("AttackSpec: epsilon must be finite and >= 0");
    }
    if (!(margin_gamma >= 0.0) || !(xi >= 0.0)) {
        throw std::invalid_argument("AttackSpec: margin_gamma and xi must be >= 0");
    }
}

std::optional<double> mean_rank(const RankingList& x, std::span<const CandidateId> candidates,
                                VisibleRange n) {
    if (candidates.empty()) {
        throw std::invalid_argument("mean_rank: candidate set is empty");
    }
    double sum = 0.0;
    for (const auto& c : candidates) {
        auto r = x.rank_of(c);
        if (!r) {
            if (n) return std::nullopt;  // out of the bounded visible range
            throw std::invalid_argument("mean_rank: candidate '" + c +
                                        "' missing from an unbounded ranking");
        }
        sum += static_cast<double>(*r);
    }
    return sum / static_cast<double>(candidates.size());
}

}  // namespace oatk
