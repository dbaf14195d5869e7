// oatk command line: gen-data / validate / serve / attack / experiment /
// bench-src. Talks to the core through the C API (oatk.h) only.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "oatk.h"

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
    std::cerr << "oatk: " << message << "\n";
    std::exit(1);
}

void check(oatk_status status, const char* what) {
    if (status != OATK_OK) {
        fail(std::string(what) + ": " + oatk_status_name(status) + ": " + oatk_last_error());
    }
}

std::string take_string(char* owned) {
    std::string out = owned ? owned : "";
    oatk_string_free(owned);
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) fail("cannot write '" + path + "'");
    out << content;
    if (!out) fail("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// "a.b.c=value" applied into a JSON tree; values parse as JSON when they can,
// else as strings, so --set optimizer.batch=25 and --set epsilon=4/255 both work.
void apply_override(json& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        fail("bad --set '" + assignment + "', expected key=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;  // plain string (e.g. a fraction like 4/255)
    }
    json* node = &tree;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) fail("bad --set path '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = std::move(parsed);
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

struct DataFlags {
    std::optional<std::string> db_path;
    std::uint64_t model_seed = 1;
    std::size_t query_dim = 3 * 32 * 32;
    std::size_t classes = 10;
    std::size_t per_class = 100;
    std::size_t embed_dim = 32;
    double intra_class_std = 0.3;
    double center_scale = 1.0;
    std::uint64_t seed = 1;

    void add_to(CLI::App* cmd, bool with_file, const char* seed_flag = "--seed") {
        if (with_file) {
            cmd->add_option("--db", db_path, "embedding file; omitted = synthetic data");
            cmd->add_option("--model-seed", model_seed,
                            "embedder seed for file-backed data (use the gen-data seed)");
        }
        cmd->add_option("--query-dim", query_dim, "query dimension D");
        cmd->add_option("--classes", classes, "synthetic: class count");
        cmd->add_option("--per-class", per_class, "synthetic: items per class");
        cmd->add_option("--embed-dim", embed_dim, "synthetic: embedding dimension E");
        cmd->add_option("--intra-class-std", intra_class_std, "synthetic: within-class spread");
        cmd->add_option("--center-scale", center_scale, "synthetic: class center scale");
        cmd->add_option(seed_flag, seed, "seed for data generation");
    }

    json synthetic_json() const {
        return json{{"classes", classes},       {"per_class", per_class},
                    {"embed_dim", embed_dim},   {"query_dim", query_dim},
                    {"intra_class_std", intra_class_std}, {"center_scale", center_scale},
                    {"seed", seed}};
    }

    oatk_system* open_system() const {
        oatk_system* sys = nullptr;
        if (db_path) {
            check(oatk_system_open(db_path->c_str(), query_dim, model_seed, &sys),
                  "opening database");
        } else {
            check(oatk_system_create_synthetic(synthetic_json().dump().c_str(), &sys),
                  "generating data");
        }
        return sys;
    }
};

std::vector<double> load_query_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open query file '" + path + "'");
    std::vector<double> q;
    double v;
    while (in >> v) q.push_back(v);
    if (q.empty()) fail("query file '" + path + "' holds no numbers");
    return q;
}

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

int run_gen_data(const DataFlags& data, const std::string& out_path) {
    oatk_system* sys = nullptr;
    check(oatk_system_create_synthetic(data.synthetic_json().dump().c_str(), &sys),
          "generating data");
    check(oatk_system_save(sys, out_path.c_str()), "saving database");
    std::cout << "wrote " << oatk_system_size(sys) << " entries (embed_dim "
              << oatk_system_embed_dim(sys) << ") to " << out_path << "\n";
    oatk_system_free(sys);
    return 0;
}

int run_validate(const std::string& db_path) {
    char* message = nullptr;
    const oatk_status status = oatk_db_validate(db_path.c_str(), &message);
    if (status != OATK_OK) {
        std::cerr << "invalid: " << take_string(message) << "\n";
        return 1;
    }
    std::cout << db_path << ": ok\n";
    return 0;
}

int run_serve(const DataFlags& data, const std::string& bind, int port, std::size_t n,
              std::uint64_t per_client_budget) {
    oatk_system* sys = data.open_system();
    oatk_server* server = nullptr;
    check(oatk_server_create(sys, bind.c_str(), port, n, per_client_budget, &server),
          "creating server");
    check(oatk_server_start(server), "starting server");
    std::cout << "serving " << oatk_system_size(sys) << " entries on http://" << bind << ":"
              << oatk_server_port(server) << " (n="
              << (n ? std::to_string(n) : std::string("unbounded"))
              << ", per-client budget " << per_client_budget << ")\n";
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    check(oatk_server_stop(server), "stopping server");
    oatk_server_free(server);
    oatk_system_free(sys);
    return 0;
}

int run_bench_src(const std::string& k_list, std::size_t reps, std::size_t n,
                  std::uint64_t seed, const std::optional<std::string>& out_path) {
    std::ostringstream csv;
    csv << "k,reps,ranking_len,median_ns,mean_ns\n";
    std::stringstream ks(k_list);
    std::string tok;
    while (std::getline(ks, tok, ',')) {
        const std::size_t k = std::stoull(tok);
        if (k < 2) fail("bench-src: k must be >= 2");
        const std::size_t len = std::max(n, k);

        std::vector<std::string> ids(len);
        for (std::size_t i = 0; i < len; ++i) ids[i] = "c" + std::to_string(i);
        std::mt19937_64 rng(seed);
        std::shuffle(ids.begin(), ids.end(), rng);
        std::vector<const char*> ranking(len);
        for (std::size_t i = 0; i < len; ++i) ranking[i] = ids[i].c_str();
        std::vector<std::string> cand(k);
        std::vector<const char*> cand_ptrs(k);
        for (std::size_t i = 0; i < k; ++i) {
            cand[i] = "c" + std::to_string(i);
            cand_ptrs[i] = cand[i].c_str();
        }
        std::vector<int> perm(k);
        for (std::size_t i = 0; i < k; ++i) perm[i] = static_cast<int>(i + 1);
        std::shuffle(perm.begin(), perm.end(), rng);

        std::vector<double> ns(reps);
        double tau = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            check(oatk_src_compute(cand_ptrs.data(), k, perm.data(), ranking.data(), len, &tau,
                                   nullptr),
                  "bench-src");
            const auto t1 = std::chrono::steady_clock::now();
            ns[r] = std::chrono::duration<double, std::nano>(t1 - t0).count();
        }
        std::sort(ns.begin(), ns.end());
        double mean = 0.0;
        for (double v : ns) mean += v;
        mean /= static_cast<double>(reps);
        const double median =
            reps % 2 ? ns[reps / 2] : 0.5 * (ns[reps / 2 - 1] + ns[reps / 2]);
        csv << k << ',' << reps << ',' << len << ',' << median << ',' << mean << '\n';
    }
    if (out_path) {
        write_file(*out_path, csv.str());
    } else {
        std::cout << csv.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"order attack toolkit: rank-order attacks against local or remote "
                 "truncated-ranking oracles"};
    app.set_version_flag("--version", oatk_version());
    app.require_subcommand(1);

    // --- gen-data ---
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic embedding database");
    DataFlags gen_flags;
    gen_flags.add_to(gen, false);
    std::string gen_out = "db.txt";
    gen->add_option("--out", gen_out, "output embedding file")->required();

    // --- validate ---
    auto* validate = app.add_subcommand("validate", "check an embedding file");
    std::string validate_db;
    validate->add_option("--db", validate_db, "embedding file")->required();

    // --- serve ---
    auto* serve = app.add_subcommand("serve", "serve the ranking oracle over HTTP");
    DataFlags serve_flags;
    serve_flags.add_to(serve, true);
    std::string serve_bind = "127.0.0.1";
    int serve_port = 8964;
    std::size_t serve_n = 50;
    std::uint64_t serve_budget = 500;
    serve->add_option("--bind", serve_bind, "bind address");
    serve->add_option("--port", serve_port, "port (0 = ephemeral)");
    serve->add_option("--n", serve_n, "visible range cap (0 = unbounded)");
    serve->add_option("--per-client-budget", serve_budget, "queries allowed per token");

    // --- attack ---
    auto* attack = app.add_subcommand("attack", "run one attack against an oracle");
    DataFlags attack_data;
    attack_data.add_to(attack, true, "--data-seed");
    std::string method = "spsa";
    std::size_t atk_k = 5;
    std::string atk_eps = "4/255";
    std::uint64_t atk_q = 1000;
    std::string atk_n = "50";
    std::uint64_t atk_seed = 1;
    std::optional<std::string> endpoint, token, query_file, atk_config, atk_out;
    std::uint64_t query_seed = 1;
    std::vector<std::string> atk_sets;
    attack->add_option("--optimizer,--method", method,
                       "whitebox | rand | beta | pso | nes | spsa");
    attack->add_option("--k", atk_k, "candidate count (clean top-k)");
    attack->add_option("--epsilon", atk_eps, "L-inf budget, fraction or decimal");
    attack->add_option("--q,--query-budget", atk_q, "query budget Q");
    attack->add_option("--n", atk_n, "visible range (integer or 'unbounded')");
    attack->add_option("--seed", atk_seed, "attack seed");
    attack->add_option("--endpoint", endpoint, "remote oracle, e.g. http://127.0.0.1:8964");
    attack->add_option("--token", token, "client token (default: env OATK_TOKEN)");
    attack->add_option("--query-file", query_file, "query vector file (whitespace floats)");
    attack->add_option("--query-seed", query_seed, "draw the query from the database");
    attack->add_option("--config", atk_config, "attack config JSON file");
    attack->add_option("--set", atk_sets, "config override key=value (repeatable)");
    attack->add_option("--out", atk_out, "write the result JSON here instead of stdout");

    // --- experiment ---
    auto* experiment = app.add_subcommand("experiment", "run the (k,N) attack protocol");
    std::optional<std::string> exp_config, exp_out;
    std::vector<std::string> exp_sets;
    std::optional<std::string> exp_method, exp_n, exp_eps;
    std::optional<std::size_t> exp_k, exp_trials, exp_jobs;
    std::optional<std::uint64_t> exp_q, exp_seed;
    experiment->add_option("--config", exp_config, "experiment config JSON file");
    experiment->add_option("--set", exp_sets, "config override key=value (repeatable)");
    experiment->add_option("--method", exp_method, "none|whitebox|rand|beta|pso|nes|spsa");
    experiment->add_option("--k", exp_k, "candidate count");
    experiment->add_option("--n", exp_n, "visible range (integer or 'unbounded')");
    experiment->add_option("--epsilon", exp_eps, "L-inf budget");
    experiment->add_option("--q,--query-budget", exp_q, "query budget Q");
    experiment->add_option("--trials", exp_trials, "trial count");
    experiment->add_option("--seed", exp_seed, "master seed");
    experiment->add_option("--jobs", exp_jobs, "parallel trial workers");
    experiment->add_option("--out", exp_out, "output prefix; writes <out>.json and <out>.csv");

    // --- bench-src ---
    auto* bench = app.add_subcommand("bench-src", "time the correlation metric in isolation");
    std::string bench_k = "2,5,10,25";
    std::size_t bench_reps = 2000, bench_n = 50;
    std::uint64_t bench_seed = 1;
    std::optional<std::string> bench_out;
    bench->add_option("--k", bench_k, "comma-separated k values");
    bench->add_option("--reps", bench_reps, "repetitions per k");
    bench->add_option("--n", bench_n, "ranking length");
    bench->add_option("--seed", bench_seed, "shuffle seed");
    bench->add_option("--out", bench_out, "write CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) return run_gen_data(gen_flags, gen_out);
    if (validate->parsed()) return run_validate(validate_db);
    if (serve->parsed()) {
        return run_serve(serve_flags, serve_bind, serve_port, serve_n, serve_budget);
    }
    if (bench->parsed()) {
        return run_bench_src(bench_k, bench_reps, bench_n, bench_seed, bench_out);
    }

    if (attack->parsed()) {
        json cfg = json::object();
        if (atk_config) {
            try {
                cfg = json::parse(read_file(*atk_config));
            } catch (const json::exception& e) {
                fail(std::string("bad config JSON: ") + e.what());
            }
        }
        if (!cfg.contains("method") || attack->count("--optimizer")) cfg["method"] = method;
        if (!cfg.contains("k") || attack->count("--k")) cfg["k"] = atk_k;
        if (!cfg.contains("epsilon") || attack->count("--epsilon")) cfg["epsilon"] = atk_eps;
        if (!cfg.contains("query_budget") || attack->count("--q")) cfg["query_budget"] = atk_q;
        if (!cfg.contains("seed") || attack->count("--seed")) cfg["seed"] = atk_seed;
        if (!cfg.contains("n") || attack->count("--n")) {
            try {
                cfg["n"] = json::parse(atk_n);  // integer
            } catch (const json::exception&) {
                cfg["n"] = atk_n;  // "unbounded"
            }
        }
        for (const auto& s : atk_sets) apply_override(cfg, s);

        // query source
        std::vector<double> query;
        oatk_system* sys = nullptr;
        const bool local = !endpoint.has_value();
        const bool need_system = local || !query_file.has_value();
        if (need_system) sys = attack_data.open_system();
        if (query_file) {
            query = load_query_file(*query_file);
        } else {
            double* buf = nullptr;
            size_t dim = 0;
            check(oatk_system_draw_query(sys, query_seed, &buf, &dim), "drawing query");
            query.assign(buf, buf + dim);
            oatk_buffer_free(buf);
        }

        char* result = nullptr;
        if (cfg["method"] == "whitebox") {
            if (!local) fail("white-box attacks need local data, not --endpoint");
            check(oatk_attack_whitebox(sys, query.data(), query.size(), cfg.dump().c_str(),
                                       &result),
                  "attack");
        } else {
            oatk_oracle* oracle = nullptr;
            if (local) {
                std::size_t n_entries = 0;
                if (cfg["n"].is_number_unsigned() || cfg["n"].is_number_integer()) {
                    n_entries = cfg["n"].get<std::size_t>();
                } else if (cfg["n"] != "unbounded" && cfg["n"] != "inf") {
                    fail("--n must be an integer or 'unbounded'");
                }
                check(oatk_oracle_create_local(sys, n_entries,
                                               cfg["query_budget"].get<std::uint64_t>(),
                                               &oracle),
                      "creating oracle");
            } else {
                std::string tok = token.value_or("");
                if (tok.empty()) {
                    const char* env = std::getenv("OATK_TOKEN");
                    tok = env ? env : "";
                }
                if (tok.empty()) fail("remote attacks need --token or OATK_TOKEN");
                if (!cfg["n"].is_number_integer() && !cfg["n"].is_number_unsigned()) {
                    fail("remote attacks need a bounded --n (the requested top_k)");
                }
                check(oatk_oracle_create_remote(endpoint->c_str(), tok.c_str(),
                                                cfg["n"].get<std::size_t>(), 3, &oracle),
                      "connecting");
            }
            const oatk_status status = oatk_attack_blackbox(
                oracle, query.data(), query.size(), cfg.dump().c_str(), &result);
            oatk_oracle_free(oracle);
            check(status, "attack");
        }
        const std::string text = take_string(result);
        if (atk_out) {
            write_file(*atk_out, text);
            std::cout << "wrote " << *atk_out << "\n";
        } else {
            std::cout << text << "\n";
        }
        if (sys) oatk_system_free(sys);
        return 0;
    }

    if (experiment->parsed()) {
        json cfg = json::object();
        if (exp_config) {
            try {
                cfg = json::parse(read_file(*exp_config));
            } catch (const json::exception& e) {
                fail(std::string("bad config JSON: ") + e.what());
            }
        }
        if (exp_method) cfg["method"] = *exp_method;
        if (exp_k) cfg["k"] = *exp_k;
        if (exp_n) {
            try {
                cfg["n"] = json::parse(*exp_n);
            } catch (const json::exception&) {
                cfg["n"] = *exp_n;
            }
        }
        if (exp_eps) cfg["epsilon"] = *exp_eps;
        if (exp_q) cfg["query_budget"] = *exp_q;
        if (exp_trials) cfg["trials"] = *exp_trials;
        if (exp_seed) cfg["seed"] = *exp_seed;
        if (exp_jobs) cfg["jobs"] = *exp_jobs;
        for (const auto& s : exp_sets) apply_override(cfg, s);

        char* report = nullptr;
        check(oatk_experiment_run(cfg.dump().c_str(), &report), "experiment");
        const std::string report_json = take_string(report);

        char* text = nullptr;
        check(oatk_report_render(report_json.c_str(), "text", &text), "rendering");
        std::cout << take_string(text);

        if (exp_out) {
            char* csv = nullptr;
            check(oatk_report_render(report_json.c_str(), "csv", &csv), "rendering");
            write_file(*exp_out + ".json", report_json);
            write_file(*exp_out + ".csv", take_string(csv));
            std::cout << "wrote " << *exp_out << ".json and " << *exp_out << ".csv\n";
        }
        return 0;
    }

    return 0;
}
