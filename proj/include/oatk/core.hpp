#ifndef OATK_CORE_HPP
#define OATK_CORE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Core domain types shared by every other module.
//
// Conventions used across the library:
//  - rank values are zero-based everywhere (the entry at position m of a
//    ranking list has rank m),
//  - permutation vectors are 1-based bijections on {1..k}, matching the
//    notation used in attack configs and on the wire,
//  - queries are flat vectors of intensities in [0,1]; no image codecs.

namespace oatk {

using CandidateId = std::string;

/// Visible range N of a truncated ranking. nullopt means unbounded (the full
/// ranking is returned).
using VisibleRange = std::optional<std::size_t>;

class BudgetExhausted : public std::runtime_error {
public:
    explicit BudgetExhausted(const std::string& what) : std::runtime_error(what) {}
};

class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

/// Parse failure for on-disk formats; message carries file and line context.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// A query in image space: a flat vector with every element in [0,1].
class QueryImage {
public:
    /// Throws std::invalid_argument if empty or any element is outside [0,1].
    explicit QueryImage(std::vector<double> pixels);

    const std::vector<double>& pixels() const { return pixels_; }
    std::size_t dim() const { return pixels_.size(); }

    bool operator==(const QueryImage&) const = default;

private:
    std::vector<double> pixels_;
};

/// A feasible perturbation r: ||r||_inf <= epsilon and q + r in [0,1]^D for
/// the query it was clamped against. Construct via clamp_to_feasible.
struct Perturbation {
    std::vector<double> delta;
    double epsilon = 0.0;

    double linf_norm() const;
};

/// Projects a raw vector onto the feasible set {r : ||r||_inf <= eps,
/// q + r in [0,1]^D}. Idempotent.
Perturbation clamp_to_feasible(const QueryImage& q, std::span<const double> raw,
                               double epsilon);

/// q + delta, guaranteed in [0,1]^D when delta came from clamp_to_feasible
/// against the same q.
QueryImage apply_perturbation(const QueryImage& q, const Perturbation& p);

/// Ordered, truncated list of candidate ids as returned by a ranking oracle.
/// Invariant (upheld by all construction sites): no duplicate ids.
class RankingList {
public:
    RankingList() = default;
    explicit RankingList(std::vector<CandidateId> entries) : entries_(std::move(entries)) {}

    /// Validating constructor for untrusted input; throws ProtocolError on
    /// duplicate ids.
    static RankingList checked(std::vector<CandidateId> entries);

    const std::vector<CandidateId>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Zero-based rank of id, nullopt when absent. Linear scan; callers on a
    /// hot path build their own index.
    std::optional<std::size_t> rank_of(const CandidateId& id) const;

    bool operator==(const RankingList&) const = default;

private:
    std::vector<CandidateId> entries_;
};

/// One attack instance: the selected candidates C, the target permutation p,
/// and the threat-model knobs.
struct AttackSpec {
    std::vector<CandidateId> candidates;  // C, length k, no duplicates
    std::vector<int> permutation;         // p, 1-based bijection on {1..k}
    VisibleRange visible_range;           // N
    double epsilon = 0.0;                 // L-inf budget
    std::uint64_t query_budget = 0;       // Q
    double margin_gamma = 0.0;
    double xi = 0.0;

    std::size_t k() const { return candidates.size(); }

    /// Throws std::invalid_argument when any invariant is broken
    /// (permutation not a bijection, duplicate candidates, k > N, ...).
    void validate() const;
};

/// True iff p is a 1-based bijection on {1..k}.
bool is_permutation_1based(std::span<const int> p);

struct AttackResult {
    Perturbation perturbation;
    double tau_s = 0.0;
    std::optional<double> mean_rank;  // undefined when a candidate left a bounded range
    std::uint64_t queries_used = 0;
    std::vector<std::pair<std::uint64_t, double>> trace;  // (iteration, best tau_s)
};

/// Average zero-based rank of C's members in X. Returns nullopt when any
/// member is absent and the range is bounded; throws std::invalid_argument
/// when a member is absent under an unbounded range (caller bug: C not in
/// the database) or when C is empty.
std::optional<double> mean_rank(const RankingList& x, std::span<const CandidateId> candidates,
                                VisibleRange n);

}  // namespace oatk

#endif
