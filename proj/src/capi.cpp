#include "oatk.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <random>
#include <string>

#include "config_json.hpp"
#include "json.hpp"
#include "oatk/blackbox.hpp"
#include "oatk/core.hpp"
#include "oatk/harness.hpp"
#include "oatk/oracle.hpp"
#include "oatk/remote.hpp"
#include "oatk/server.hpp"
#include "oatk/src_metric.hpp"
#include "oatk/whitebox.hpp"

// C API shell: translates exceptions into status codes and C++ values into
// C-friendly buffers. No logic of its own.

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <class Fn>
oatk_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return OATK_OK;
    } catch (const oatk::BudgetExhausted& e) {
        g_last_error = e.what();
        return OATK_ERR_BUDGET_EXHAUSTED;
    } catch (const oatk::TransportError& e) {
        g_last_error = e.what();
        return OATK_ERR_TRANSPORT;
    } catch (const oatk::ProtocolError& e) {
        g_last_error = e.what();
        return OATK_ERR_PROTOCOL;
    } catch (const oatk::ParseError& e) {
        g_last_error = e.what();
        return OATK_ERR_PARSE;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return OATK_ERR_INVALID_ARGUMENT;
    } catch (const std::ios_base::failure& e) {
        g_last_error = e.what();
        return OATK_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return OATK_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return OATK_ERR_INTERNAL;
    }
}

oatk_status invalid(const char* message) {
    g_last_error = message;
    return OATK_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct oatk_system {
    std::shared_ptr<const oatk::EmbeddingDatabase> db;
    std::shared_ptr<const oatk::RankingModel> model;
};

struct oatk_oracle {
    std::unique_ptr<oatk::Oracle> impl;
};

struct oatk_server {
    std::unique_ptr<oatk::OracleServer> impl;
};

extern "C" {

const char* oatk_status_name(oatk_status status) {
    switch (status) {
        case OATK_OK: return "ok";
        case OATK_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case OATK_ERR_PARSE: return "parse_error";
        case OATK_ERR_IO: return "io_error";
        case OATK_ERR_BUDGET_EXHAUSTED: return "budget_exhausted";
        case OATK_ERR_TRANSPORT: return "transport_error";
        case OATK_ERR_PROTOCOL: return "protocol_error";
        case OATK_ERR_INTERNAL: return "internal_error";
    }
    return "unknown";
}

const char* oatk_last_error(void) { return g_last_error.c_str(); }

const char* oatk_version(void) { return "0.1.0"; }

void oatk_string_free(char* s) { std::free(s); }

void oatk_buffer_free(double* buffer) { std::free(buffer); }

oatk_status oatk_system_create_synthetic(const char* config_json, oatk_system** out) {
    if (!out) return invalid("out must not be NULL");
    return guarded([&] {
        oatk::SyntheticConfig cfg;
        if (config_json && *config_json) {
            const auto v = nlohmann::json::parse(config_json);
            for (const auto& item : v.items()) {
                const std::string& key = item.key();
                if (key == "classes") {
                    cfg.classes = item.value().get<std::size_t>();
                } else if (key == "per_class") {
                    cfg.per_class = item.value().get<std::size_t>();
                } else if (key == "embed_dim") {
                    cfg.embed_dim = item.value().get<std::size_t>();
                } else if (key == "query_dim") {
                    cfg.query_dim = item.value().get<std::size_t>();
                } else if (key == "intra_class_std") {
                    cfg.intra_class_std = item.value().get<double>();
                } else if (key == "center_scale") {
                    cfg.center_scale = item.value().get<double>();
                } else if (key == "seed") {
                    cfg.seed = item.value().get<std::uint64_t>();
                } else {
                    throw std::invalid_argument("unknown key '" + key + "'");
                }
            }
        }
        auto world = oatk::gen_synthetic_db(cfg);
        *out = new oatk_system{world.db, world.model};
    });
}

oatk_status oatk_system_open(const char* db_path, size_t query_dim, uint64_t model_seed,
                             oatk_system** out) {
    if (!db_path || !out) return invalid("db_path and out must not be NULL");
    return guarded([&] {
        auto db = std::make_shared<oatk::EmbeddingDatabase>(oatk::load_db(db_path));
        auto model = std::make_shared<oatk::RankingModel>(oatk::make_random_model(
            db->dim(), query_dim, oatk::split_seed(model_seed, 0x3adeULL)));
        *out = new oatk_system{std::move(db), std::move(model)};
    });
}

oatk_status oatk_system_save(const oatk_system* system, const char* db_path) {
    if (!system || !db_path) return invalid("system and db_path must not be NULL");
    return guarded([&] { oatk::save_db(*system->db, db_path); });
}

void oatk_system_free(oatk_system* system) { delete system; }

size_t oatk_system_size(const oatk_system* system) { return system ? system->db->size() : 0; }

size_t oatk_system_embed_dim(const oatk_system* system) {
    return system ? system->db->dim() : 0;
}

size_t oatk_system_query_dim(const oatk_system* system) {
    return system ? system->model->query_dim() : 0;
}

oatk_status oatk_system_draw_query(const oatk_system* system, uint64_t seed, double** query_out,
                                   size_t* dim_out) {
    if (!system || !query_out || !dim_out) return invalid("NULL argument");
    return guarded([&] {
        std::mt19937_64 rng(oatk::split_seed(seed, 0x41ULL));
        std::uniform_int_distribution<std::size_t> pick(0, system->db->size() - 1);
        const oatk::QueryImage q =
            oatk::preimage_query(*system->model, system->db->embedding_at(pick(rng)));
        double* buf = static_cast<double*>(std::malloc(q.dim() * sizeof(double)));
        if (!buf) throw std::bad_alloc();
        std::memcpy(buf, q.pixels().data(), q.dim() * sizeof(double));
        *query_out = buf;
        *dim_out = q.dim();
    });
}

oatk_status oatk_db_validate(const char* db_path, char** message_out) {
    if (message_out) *message_out = nullptr;
    if (!db_path) return invalid("db_path must not be NULL");
    const oatk_status status = guarded([&] { (void)oatk::load_db(db_path); });
    if (status != OATK_OK && message_out) {
        *message_out = dup_string(g_last_error);
    }
    return status;
}

oatk_status oatk_oracle_create_local(const oatk_system* system, size_t visible_range,
                                     uint64_t query_budget, oatk_oracle** out) {
    if (!system || !out) return invalid("system and out must not be NULL");
    return guarded([&] {
        oatk::VisibleRange n;
        if (visible_range > 0) n = visible_range;
        *out = new oatk_oracle{
            std::make_unique<oatk::LocalOracle>(system->model, system->db, n, query_budget)};
    });
}

oatk_status oatk_oracle_create_remote(const char* endpoint, const char* token, size_t top_k,
                                      int max_retries, oatk_oracle** out) {
    if (!endpoint || !token || !out) return invalid("endpoint, token, out must not be NULL");
    return guarded([&] {
        oatk::RemoteOracle::Config cfg;
        cfg.endpoint = endpoint;
        cfg.token = token;
        cfg.top_k = top_k;
        cfg.max_retries = max_retries;
        *out = new oatk_oracle{std::make_unique<oatk::RemoteOracle>(std::move(cfg))};
    });
}

void oatk_oracle_free(oatk_oracle* oracle) { delete oracle; }

uint64_t oatk_oracle_queries_used(const oatk_oracle* oracle) {
    return oracle ? oracle->impl->queries_used() : 0;
}

oatk_status oatk_oracle_query(oatk_oracle* oracle, const double* query, size_t query_dim,
                              char** ranking_json_out) {
    if (!oracle || !query || !ranking_json_out) return invalid("NULL argument");
    return guarded([&] {
        const oatk::QueryImage q(std::vector<double>(query, query + query_dim));
        const oatk::RankingList ranking = oracle->impl->query(q);
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& id : ranking.entries()) ids.push_back(id);
        *ranking_json_out = dup_string(nlohmann::json{{"ranking", std::move(ids)}}.dump());
    });
}

oatk_status oatk_attack_blackbox(oatk_oracle* oracle, const double* query, size_t query_dim,
                                 const char* attack_json, char** result_json_out) {
    if (!oracle || !query || !attack_json || !result_json_out) return invalid("NULL argument");
    return guarded([&] {
        const auto parsed = oatk::detail::parse_attack_config(attack_json);
        if (parsed.method == oatk::AttackMethod::Whitebox) {
            throw std::invalid_argument("white-box attacks need a system, not an oracle");
        }
        const oatk::QueryImage q(std::vector<double>(query, query + query_dim));
        oatk::AttackSpec spec;
        const oatk::AttackResult result =
            oatk::single_attack(*oracle->impl, q, parsed.single, &spec);
        *result_json_out =
            dup_string(oatk::detail::attack_result_to_json(result, spec, parsed.echo));
    });
}

oatk_status oatk_attack_whitebox(const oatk_system* system, const double* query,
                                 size_t query_dim, const char* attack_json,
                                 char** result_json_out) {
    if (!system || !query || !attack_json || !result_json_out) return invalid("NULL argument");
    return guarded([&] {
        const auto parsed = oatk::detail::parse_attack_config(attack_json);
        if (parsed.method != oatk::AttackMethod::Whitebox) {
            throw std::invalid_argument("oatk_attack_whitebox requires method 'whitebox'");
        }
        const oatk::QueryImage q(std::vector<double>(query, query + query_dim));

        oatk::AttackSpec spec;
        spec.visible_range = parsed.n;
        spec.epsilon = parsed.single.epsilon;
        spec.query_budget = parsed.single.query_budget;
        spec.xi = parsed.whitebox.xi;
        spec.margin_gamma = parsed.whitebox.margin_gamma;
        spec.candidates = parsed.single.candidates;
        spec.permutation = parsed.single.permutation;
        if (spec.candidates.empty()) {
            const oatk::RankingList clean = oatk::rank(*system->model, *system->db, q, parsed.n);
            if (clean.size() < parsed.single.k) {
                throw std::invalid_argument("ranking shorter than k");
            }
            spec.candidates.assign(clean.entries().begin(),
                                   clean.entries().begin() + parsed.single.k);
        }
        if (spec.permutation.empty()) {
            std::mt19937_64 rng(oatk::split_seed(parsed.single.seed, 0x9e37ULL));
            std::vector<int> p(spec.candidates.size());
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<int>(i + 1);
            for (std::size_t i = p.size(); i > 1; --i) {
                std::uniform_int_distribution<std::size_t> pick(0, i - 1);
                std::swap(p[i - 1], p[pick(rng)]);
            }
            spec.permutation = std::move(p);
        }
        const oatk::AttackResult result =
            oatk::pgd_attack(*system->model, *system->db, q, spec, parsed.pgd, parsed.whitebox,
                             oatk::split_seed(parsed.single.seed, 0xa77aULL));
        *result_json_out =
            dup_string(oatk::detail::attack_result_to_json(result, spec, parsed.echo));
    });
}

oatk_status oatk_experiment_run(const char* config_json, char** report_json_out) {
    if (!config_json || !report_json_out) return invalid("NULL argument");
    return guarded([&] {
        const oatk::ExperimentConfig cfg = oatk::detail::parse_experiment_config(config_json);
        const oatk::ExperimentReport report = oatk::run_kn_oa(cfg);
        *report_json_out = dup_string(oatk::report_to_json(report));
    });
}

oatk_status oatk_report_render(const char* report_json, const char* format, char** out) {
    if (!report_json || !format || !out) return invalid("NULL argument");
    return guarded([&] {
        const auto j = nlohmann::json::parse(report_json);
        oatk::ExperimentReport report;
        report.config_echo = j.at("config").dump();
        for (const auto& t : j.at("trials")) {
            oatk::TrialRecord rec;
            rec.trial = t.at("trial").get<std::size_t>();
            rec.tau_s = t.at("tau_s").get<double>();
            if (!t.at("mean_rank").is_null()) rec.mean_rank = t.at("mean_rank").get<double>();
            rec.queries_used = t.at("queries_used").get<std::uint64_t>();
            rec.seed = t.at("seed").get<std::uint64_t>();
            report.trials.push_back(std::move(rec));
        }
        const auto& summary = j.at("summary");
        const auto load_summary = [](const nlohmann::json& s) {
            oatk::StatSummary out;
            out.mean = s.at("mean").get<double>();
            out.stdev = s.at("stdev").get<double>();
            out.min = s.at("min").get<double>();
            out.max = s.at("max").get<double>();
            out.median = s.at("median").get<double>();
            return out;
        };
        report.tau_s = load_summary(summary.at("tau_s"));
        if (!summary.at("mean_rank").is_null()) {
            report.mean_rank = load_summary(summary.at("mean_rank"));
        }
        report.mean_queries_used = summary.at("mean_queries_used").get<double>();
        report.wall_seconds = j.at("wall_clock").at("total_seconds").get<double>();
        report.per_trial_seconds = j.at("wall_clock").at("per_trial_seconds").get<double>();

        const std::string fmt = format;
        if (fmt == "csv") {
            *out = dup_string(oatk::report_to_csv(report));
        } else if (fmt == "text") {
            *out = dup_string(oatk::report_to_text(report));
        } else {
            throw std::invalid_argument("format must be 'csv' or 'text'");
        }
    });
}

oatk_status oatk_server_create(const oatk_system* system, const char* bind_address, int port,
                               size_t visible_range, uint64_t per_client_budget,
                               oatk_server** out) {
    if (!system || !bind_address || !out) return invalid("NULL argument");
    return guarded([&] {
        oatk::ServerConfig cfg;
        cfg.bind_address = bind_address;
        cfg.port = port;
        if (visible_range > 0) cfg.visible_range = visible_range;
        cfg.per_client_budget = per_client_budget;
        *out = new oatk_server{
            std::make_unique<oatk::OracleServer>(system->model, system->db, std::move(cfg))};
    });
}

oatk_status oatk_server_start(oatk_server* server) {
    if (!server) return invalid("server must not be NULL");
    return guarded([&] { server->impl->start(); });
}

oatk_status oatk_server_stop(oatk_server* server) {
    if (!server) return invalid("server must not be NULL");
    return guarded([&] { server->impl->stop(); });
}

int oatk_server_port(const oatk_server* server) {
    return server ? server->impl->port() : -1;
}

void oatk_server_free(oatk_server* server) { delete server; }

oatk_status oatk_src_compute(const char* const* candidates, size_t k, const int* permutation,
                             const char* const* ranking, size_t ranking_len, double* tau_out,
                             int8_t* score_matrix_out) {
    if (!candidates || !permutation || (!ranking && ranking_len > 0) || !tau_out) {
        return invalid("NULL argument");
    }
    return guarded([&] {
        std::vector<oatk::CandidateId> c(candidates, candidates + k);
        std::vector<oatk::CandidateId> x(ranking, ranking + ranking_len);
        const auto result = oatk::compute_src(
            c, std::span<const int>(permutation, k), oatk::RankingList(std::move(x)));
        *tau_out = result.tau_s;
        if (score_matrix_out) {
            const auto raw = result.matrix.raw();
            std::memcpy(score_matrix_out, raw.data(), raw.size());
        }
    });
}

oatk_status oatk_kendall_tau(const int* order_a, const int* order_b, size_t k,
                             double* tau_out) {
    if (!order_a || !order_b || !tau_out) return invalid("NULL argument");
    return guarded([&] {
        *tau_out = oatk::kendall_tau(std::span<const int>(order_a, k),
                                     std::span<const int>(order_b, k));
    });
}

double oatk_concordant_fraction(double tau) {
    if (!(tau >= -1.0 && tau <= 1.0)) return std::nan("");
    return oatk::concordant_fraction(tau);
}

oatk_status oatk_clamp_to_feasible(const double* query, const double* raw, size_t dim,
                                   double epsilon, double* delta_out) {
    if (!query || !raw || !delta_out) return invalid("NULL argument");
    return guarded([&] {
        const oatk::QueryImage q(std::vector<double>(query, query + dim));
        const oatk::Perturbation p =
            oatk::clamp_to_feasible(q, std::span<const double>(raw, dim), epsilon);
        std::memcpy(delta_out, p.delta.data(), dim * sizeof(double));
    });
}

} /* extern "C" */
