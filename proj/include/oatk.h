/* oatk — order-attack toolkit for ranking systems.
 *
 * C API over the C++ core: opaque handles, integer status codes, JSON
 * strings for structured configs and results. Every char* returned through
 * an out-parameter is heap-allocated and must be released with
 * oatk_string_free(); every handle has a matching *_free().
 *
 * Calls returning oatk_status set a thread-local message retrievable via
 * oatk_last_error() when they fail.
 */

#ifndef OATK_H
#define OATK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32) || defined(__CYGWIN__)
#define OATK_API __declspec(dllexport)
#else
#define OATK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum oatk_status {
    OATK_OK = 0,
    OATK_ERR_INVALID_ARGUMENT = 1,
    OATK_ERR_PARSE = 2,
    OATK_ERR_IO = 3,
    OATK_ERR_BUDGET_EXHAUSTED = 4,
    OATK_ERR_TRANSPORT = 5,
    OATK_ERR_PROTOCOL = 6,
    OATK_ERR_INTERNAL = 7
} oatk_status;

OATK_API const char* oatk_status_name(oatk_status status);
OATK_API const char* oatk_last_error(void); /* thread-local; empty when no failure yet */
OATK_API const char* oatk_version(void);
OATK_API void oatk_string_free(char* s);

/* An embedding database plus the embedder ranking against it. */
typedef struct oatk_system oatk_system;
/* A budgeted truncated-ranking oracle, local or remote. */
typedef struct oatk_oracle oatk_oracle;
/* A running HTTP oracle service. */
typedef struct oatk_server oatk_server;

/* --- system ---------------------------------------------------------------- */

/* config_json keys (all optional): classes, per_class, embed_dim, query_dim,
 * intra_class_std, center_scale, seed. Unknown keys are rejected. */
OATK_API oatk_status oatk_system_create_synthetic(const char* config_json, oatk_system** out);

/* Loads an embedding file and derives the embedder from model_seed. */
OATK_API oatk_status oatk_system_open(const char* db_path, size_t query_dim,
                                      uint64_t model_seed, oatk_system** out);

OATK_API oatk_status oatk_system_save(const oatk_system* system, const char* db_path);
OATK_API void oatk_system_free(oatk_system* system);

OATK_API size_t oatk_system_size(const oatk_system* system);
OATK_API size_t oatk_system_embed_dim(const oatk_system* system);
OATK_API size_t oatk_system_query_dim(const oatk_system* system);

/* A query image drawn from the database: the box-clamped embedding preimage
 * of a seeded random entry. Caller frees *query_out with oatk_buffer_free. */
OATK_API oatk_status oatk_system_draw_query(const oatk_system* system, uint64_t seed,
                                            double** query_out, size_t* dim_out);

OATK_API void oatk_buffer_free(double* buffer);

/* Checks an embedding file without building a system. message_out (optional)
 * receives a diagnostic on failure. */
OATK_API oatk_status oatk_db_validate(const char* db_path, char** message_out);

/* --- oracles --------------------------------------------------------------- */

/* visible_range 0 means unbounded. */
OATK_API oatk_status oatk_oracle_create_local(const oatk_system* system, size_t visible_range,
                                              uint64_t query_budget, oatk_oracle** out);

/* endpoint like "http://127.0.0.1:8964"; top_k >= 1 is the requested range. */
OATK_API oatk_status oatk_oracle_create_remote(const char* endpoint, const char* token,
                                               size_t top_k, int max_retries,
                                               oatk_oracle** out);

OATK_API void oatk_oracle_free(oatk_oracle* oracle);
OATK_API uint64_t oatk_oracle_queries_used(const oatk_oracle* oracle);

/* One charged query. ranking_json_out receives {"ranking": [...]}. */
OATK_API oatk_status oatk_oracle_query(oatk_oracle* oracle, const double* query,
                                       size_t query_dim, char** ranking_json_out);

/* --- attacks --------------------------------------------------------------- */

/* Black-box attack through an oracle. attack_json keys: method ("rand",
 * "beta", "pso", "nes", "spsa"), k, epsilon, query_budget, seed, candidates,
 * permutation, optimizer{...}. Empty candidates selects the clean top-k with
 * one charged query; empty permutation draws a seeded random one. */
OATK_API oatk_status oatk_attack_blackbox(oatk_oracle* oracle, const double* query,
                                          size_t query_dim, const char* attack_json,
                                          char** result_json_out);

/* White-box attack with full access to the system. attack_json keys: method
 * ("whitebox"), k, n, epsilon, query_budget, seed, candidates, permutation,
 * whitebox{eta, steps, xi, margin_gamma, distractors}. */
OATK_API oatk_status oatk_attack_whitebox(const oatk_system* system, const double* query,
                                          size_t query_dim, const char* attack_json,
                                          char** result_json_out);

/* --- experiments ------------------------------------------------------------ */

/* Runs the (k,N) protocol described by config_json (see the project README
 * for the schema); the report JSON embeds the fully-resolved config. */
OATK_API oatk_status oatk_experiment_run(const char* config_json, char** report_json_out);

/* Renders a report produced by oatk_experiment_run. format is "csv" or
 * "text". */
OATK_API oatk_status oatk_report_render(const char* report_json, const char* format,
                                        char** out);

/* --- server ---------------------------------------------------------------- */

/* port 0 picks an ephemeral port; visible_range 0 means unbounded. */
OATK_API oatk_status oatk_server_create(const oatk_system* system, const char* bind_address,
                                        int port, size_t visible_range,
                                        uint64_t per_client_budget, oatk_server** out);
OATK_API oatk_status oatk_server_start(oatk_server* server);
OATK_API oatk_status oatk_server_stop(oatk_server* server);
OATK_API int oatk_server_port(const oatk_server* server);
OATK_API void oatk_server_free(oatk_server* server);

/* --- metrics ---------------------------------------------------------------- */

/* tau_S of (candidates, permutation) against a truncated ranking. permutation
 * is 1-based. score_matrix_out, when non-NULL, receives the k*k row-major
 * pair scores. */
OATK_API oatk_status oatk_src_compute(const char* const* candidates, size_t k,
                                      const int* permutation, const char* const* ranking,
                                      size_t ranking_len, double* tau_out,
                                      int8_t* score_matrix_out);

/* Kendall tau between two orderings of the same item set. */
OATK_API oatk_status oatk_kendall_tau(const int* order_a, const int* order_b, size_t k,
                                      double* tau_out);

/* (tau + 1) / 2; NaN when tau is outside [-1, 1]. */
OATK_API double oatk_concordant_fraction(double tau);

/* Projection onto {r : ||r||_inf <= epsilon, q + r in [0,1]^D}. */
OATK_API oatk_status oatk_clamp_to_feasible(const double* query, const double* raw,
                                            size_t dim, double epsilon, double* delta_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* OATK_H */
