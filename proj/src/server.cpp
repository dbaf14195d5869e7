#include "oatk/server.hpp"

#include <mutex>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"

namespace oatk {

using nlohmann::json;

struct OracleServer::Impl {
    std::shared_ptr<const RankingModel> model;
    std::shared_ptr<const EmbeddingDatabase> db;
    ServerConfig cfg;

    httplib::Server server;
    std::thread worker;
    int bound_port = 0;
    bool running = false;

    std::mutex budgets_mu;
    std::unordered_map<std::string, std::unique_ptr<QueryBudget>> budgets;  // by token

    QueryBudget& budget_for(const std::string& token) {
        std::lock_guard<std::mutex> lock(budgets_mu);
        auto it = budgets.find(token);
        if (it == budgets.end()) {
            it = budgets.emplace(token, std::make_unique<QueryBudget>(cfg.per_client_budget))
                     .first;
        }
        return *it->second;
    }
};

namespace {

void reply_error(httplib::Response& res, int status, const char* code,
                 const std::string& detail) {
    res.status = status;
    res.set_content(json{{"error", code}, {"detail", detail}}.dump(), "application/json");
}

}  // namespace

OracleServer::OracleServer(std::shared_ptr<const RankingModel> model,
                           std::shared_ptr<const EmbeddingDatabase> db, ServerConfig cfg)
    : impl_(std::make_unique<Impl>()) {
    if (!model || !db) {
        throw std::invalid_argument("OracleServer: model and database are required");
    }
    impl_->model = std::move(model);
    impl_->db = std::move(db);
    impl_->cfg = std::move(cfg);

    impl_->server.Post("/v1/query", [impl = impl_.get()](const httplib::Request& req,
                                                         httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            reply_error(res, 400, "bad_request", "body is not valid JSON");
            return;
        }
        if (!body.is_object()) {
            reply_error(res, 400, "bad_request", "body must be a JSON object");
            return;
        }
        for (const auto& item : body.items()) {
            if (item.key() != "token" && item.key() != "query" && item.key() != "top_k") {
                reply_error(res, 400, "bad_request", "unknown key '" + item.key() + "'");
                return;
            }
        }
        if (!body.contains("token") || !body["token"].is_string() ||
            body["token"].get<std::string>().empty()) {
            reply_error(res, 400, "bad_request", "missing or empty 'token'");
            return;
        }
        if (!body.contains("top_k") || !body["top_k"].is_number_integer() ||
            body["top_k"].get<long long>() < 1) {
            reply_error(res, 400, "bad_request", "'top_k' must be an integer >= 1");
            return;
        }
        if (!body.contains("query") || !body["query"].is_array()) {
            reply_error(res, 400, "bad_request", "'query' must be an array of floats");
            return;
        }
        const auto& arr = body["query"];
        if (arr.size() != impl->model->query_dim()) {
            reply_error(res, 400, "bad_request",
                        "'query' must have " + std::to_string(impl->model->query_dim()) +
                            " elements");
            return;
        }
        std::vector<double> pixels;
        pixels.reserve(arr.size());
        for (const auto& v : arr) {
            if (!v.is_number()) {
                reply_error(res, 400, "bad_request", "'query' must contain only numbers");
                return;
            }
            const double x = v.get<double>();
            if (!(x >= 0.0 && x <= 1.0)) {
                reply_error(res, 400, "bad_request", "'query' values must lie in [0,1]");
                return;
            }
            pixels.push_back(x);
        }

        QueryBudget& budget = impl->budget_for(body["token"].get<std::string>());
        if (!budget.try_consume()) {
            reply_error(res, 429, "budget_exhausted",
                        "client budget of " + std::to_string(budget.limit()) + " spent");
            return;
        }

        // effective range: the client's top_k capped by the server's own N
        std::size_t n = static_cast<std::size_t>(body["top_k"].get<long long>());
        if (impl->cfg.visible_range) n = std::min(n, *impl->cfg.visible_range);

        const RankingList ranking =
            rank(*impl->model, *impl->db, QueryImage(std::move(pixels)), n);
        json ids = json::array();
        for (const auto& id : ranking.entries()) ids.push_back(id);
        res.set_content(json{{"ranking", std::move(ids)}}.dump(), "application/json");
    });
}

OracleServer::~OracleServer() {
    try {
        stop();
    } catch (...) {
    }
}

void OracleServer::start() {
    if (impl_->running) return;
    if (impl_->cfg.port == 0) {
        impl_->bound_port = impl_->server.bind_to_any_port(impl_->cfg.bind_address);
        if (impl_->bound_port <= 0) {
            throw TransportError("cannot bind to " + impl_->cfg.bind_address);
        }
    } else {
        if (!impl_->server.bind_to_port(impl_->cfg.bind_address, impl_->cfg.port)) {
            throw TransportError("cannot bind to " + impl_->cfg.bind_address + ":" +
                                 std::to_string(impl_->cfg.port));
        }
        impl_->bound_port = impl_->cfg.port;
    }
    impl_->worker = std::thread([impl = impl_.get()]() { impl->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    impl_->running = true;
}

void OracleServer::stop() {
    if (!impl_->running) return;
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
    impl_->running = false;
}

int OracleServer::port() const { return impl_->bound_port; }

}  // namespace oatk
