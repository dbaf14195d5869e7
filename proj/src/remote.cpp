#include "oatk/remote.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace oatk {

using nlohmann::json;

struct RemoteOracle::Impl {
    Config cfg;
    httplib::Client client;

    explicit Impl(Config c) : cfg(std::move(c)), client(cfg.endpoint) {
        client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
    }
};

RemoteOracle::RemoteOracle(Config cfg) : top_k_(cfg.top_k) {
    if (cfg.endpoint.empty() || cfg.token.empty()) {
        throw std::invalid_argument("RemoteOracle: endpoint and token are required");
    }
    if (cfg.top_k < 1) {
        throw std::invalid_argument("RemoteOracle: top_k must be >= 1");
    }
    if (cfg.max_retries < 0) {
        throw std::invalid_argument("RemoteOracle: max_retries must be >= 0");
    }
    impl_ = std::make_unique<Impl>(std::move(cfg));
}

RemoteOracle::~RemoteOracle() = default;

RankingList RemoteOracle::query(const QueryImage& q) {
    json body;
    body["token"] = impl_->cfg.token;
    body["top_k"] = top_k_;
    json arr = json::array();
    for (double v : q.pixels()) arr.push_back(v);
    body["query"] = std::move(arr);
    const std::string payload = body.dump();

    httplib::Result res;
    for (int attempt = 0;; ++attempt) {
        res = impl_->client.Post("/v1/query", payload, "application/json");
        if (res) break;
        if (attempt >= impl_->cfg.max_retries) {
            throw TransportError("remote oracle unreachable after " +
                                 std::to_string(attempt + 1) + " attempts: " +
                                 httplib::to_string(res.error()));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20 * (attempt + 1)));
    }

    json parsed;
    try {
        parsed = json::parse(res->body);
    } catch (const json::exception&) {
        throw ProtocolError("remote oracle sent a non-JSON body (status " +
                            std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
        const std::string code = parsed.is_object() ? parsed.value("error", "") : "";
        const std::string detail = parsed.is_object() ? parsed.value("detail", "") : "";
        if (code == "budget_exhausted") {
            throw BudgetExhausted("remote oracle: " + detail);
        }
        throw ProtocolError("remote oracle error '" + code + "' (status " +
                            std::to_string(res->status) + "): " + detail);
    }
    if (!parsed.is_object() || !parsed.contains("ranking") || !parsed["ranking"].is_array()) {
        throw ProtocolError("remote oracle response lacks a 'ranking' array");
    }
    std::vector<CandidateId> ids;
    ids.reserve(parsed["ranking"].size());
    for (const auto& v : parsed["ranking"]) {
        if (!v.is_string()) {
            throw ProtocolError("remote oracle ranking entries must be strings");
        }
        ids.push_back(v.get<std::string>());
    }
    if (ids.size() > top_k_) {
        throw ProtocolError("remote oracle returned more entries than requested");
    }
    RankingList out = RankingList::checked(std::move(ids));  // rejects duplicate ids
    ++used_;
    return out;
}

}  // namespace oatk
