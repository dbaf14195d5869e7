#ifndef OATK_SERVER_HPP
#define OATK_SERVER_HPP

#include <cstdint>
#include <memory>
#include <string>

#include "oatk/core.hpp"
#include "oatk/oracle.hpp"

// A local stand-in for a commercial retrieval API: truncated id-only
// rankings over HTTP, per-client query budgets, no scores on the wire.
//
// Protocol. Request: POST /v1/query with body
//   {"token": string, "query": [float; D], "top_k": int}
// Response 200: {"ranking": [string, ...]} in rank order.
// Errors: {"error": "budget_exhausted" | "bad_request", "detail": string}
// with status 429 / 400. Unknown request keys are rejected.

namespace oatk {

struct ServerConfig {
    std::string bind_address = "127.0.0.1";
    int port = 0;  // 0 picks an ephemeral port
    VisibleRange visible_range;
    std::uint64_t per_client_budget = 500;  // per token
};

class OracleServer {
public:
    OracleServer(std::shared_ptr<const RankingModel> model,
                 std::shared_ptr<const EmbeddingDatabase> db, ServerConfig cfg);
    ~OracleServer();

    OracleServer(const OracleServer&) = delete;
    OracleServer& operator=(const OracleServer&) = delete;

    /// Binds and serves on a background thread. Throws TransportError when
    /// the address cannot be bound.
    void start();
    void stop();

    /// The bound port (useful with port 0).
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace oatk

#endif
