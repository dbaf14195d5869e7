#ifndef OATK_REMOTE_HPP
#define OATK_REMOTE_HPP

#include <cstdint>
#include <memory>
#include <string>

#include "oatk/core.hpp"
#include "oatk/oracle.hpp"

namespace oatk {

/// Client side of the truncated-ranking wire protocol (see server.hpp).
/// Transport failures are retried a bounded number of times and then
/// surfaced as TransportError; a budget_exhausted response becomes
/// BudgetExhausted; anything off-schema becomes ProtocolError.
class RemoteOracle final : public Oracle {
public:
    struct Config {
        std::string endpoint;  // e.g. "http://127.0.0.1:8964"
        std::string token;
        std::size_t top_k = 50;  // requested visible range; must be >= 1
        int max_retries = 3;
        double timeout_seconds = 10.0;
    };

    explicit RemoteOracle(Config cfg);
    ~RemoteOracle() override;

    RankingList query(const QueryImage& q) override;
    std::uint64_t queries_used() const override { return used_; }
    VisibleRange visible_range() const override { return top_k_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t top_k_;
    std::uint64_t used_ = 0;
};

}  // namespace oatk

#endif
