#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "oatk/harness.hpp"

// Report and config serialization. JSON for machines, aligned columns for
// humans, per-trial CSV for spreadsheets.

namespace oatk {

namespace {

using nlohmann::json;

json dims_to_json(const ReducedDims& d) {
    return json::array({d.channels, d.height, d.width});
}

json summary_to_json(const StatSummary& s) {
    return json{{"mean", s.mean},
                {"stdev", s.stdev},
                {"min", s.min},
                {"max", s.max},
                {"median", s.median}};
}

}  // namespace

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["k"] = cfg.k;
    if (cfg.n) {
        j["n"] = *cfg.n;
    } else {
        j["n"] = "unbounded";
    }
    j["epsilon"] = cfg.epsilon;
    j["query_budget"] = cfg.query_budget;
    j["trials"] = cfg.trials;
    j["method"] = to_string(cfg.method);
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["whitebox"] = {{"eta", cfg.pgd.eta},
                     {"steps", cfg.pgd.steps},
                     {"xi", cfg.whitebox.xi},
                     {"margin_gamma", cfg.whitebox.margin_gamma},
                     {"distractors", cfg.whitebox.qa_distractor_count},
                     {"quantize", cfg.pgd.quantize}};
    json opt;
    opt["batch"] = cfg.optimizer.batch;
    opt["learning_rate"] = cfg.optimizer.learning_rate;
    if (cfg.optimizer.sigma) {
        opt["sigma"] = *cfg.optimizer.sigma;
    } else {
        opt["sigma"] = nullptr;  // resolved to 2 * epsilon at attack time
    }
    opt["spsa_delta"] = cfg.optimizer.spsa_delta;
    opt["beta_lr"] = cfg.optimizer.beta_lr;
    opt["pso"] = {{"omega", cfg.optimizer.pso.omega},
                  {"phi_p", cfg.optimizer.pso.phi_p},
                  {"phi_g", cfg.optimizer.pso.phi_g},
                  {"swarm", cfg.optimizer.pso.swarm}};
    opt["init"] = cfg.optimizer.init == InitMode::Zero ? "zero" : "uniform";
    if (cfg.optimizer.reduced_dims) {
        opt["reduced_dims"] = dims_to_json(*cfg.optimizer.reduced_dims);
        if (cfg.optimizer.query_dims) opt["query_dims"] = dims_to_json(*cfg.optimizer.query_dims);
    }
    j["optimizer"] = std::move(opt);
    json ds;
    if (cfg.dataset.path) {
        ds["path"] = *cfg.dataset.path;
        ds["model_seed"] = cfg.dataset.model_seed;
        ds["query_dim"] = cfg.dataset.query_dim;
    } else {
        const SyntheticConfig s = cfg.dataset.synthetic.value_or(SyntheticConfig{});
        ds["synthetic"] = {{"classes", s.classes},
                           {"per_class", s.per_class},
                           {"embed_dim", s.embed_dim},
                           {"query_dim", s.query_dim},
                           {"intra_class_std", s.intra_class_std},
                           {"center_scale", s.center_scale},
                           {"seed", s.seed}};
    }
    j["dataset"] = std::move(ds);
    return j.dump(2);
}

std::string report_to_json(const ExperimentReport& report) {
    json j;
    j["config"] = json::parse(report.config_echo);
    json summary;
    summary["tau_s"] = summary_to_json(report.tau_s);
    if (report.mean_rank) {
        summary["mean_rank"] = summary_to_json(*report.mean_rank);
    } else {
        summary["mean_rank"] = nullptr;
    }
    summary["mean_queries_used"] = report.mean_queries_used;
    j["summary"] = std::move(summary);
    j["wall_clock"] = {{"total_seconds", report.wall_seconds},
                       {"per_trial_seconds", report.per_trial_seconds}};
    json trials = json::array();
    for (const auto& t : report.trials) {
        json rec;
        rec["trial"] = t.trial;
        rec["tau_s"] = t.tau_s;
        if (t.mean_rank) {
            rec["mean_rank"] = *t.mean_rank;
        } else {
            rec["mean_rank"] = nullptr;
        }
        rec["queries_used"] = t.queries_used;
        rec["seed"] = t.seed;
        trials.push_back(std::move(rec));
    }
    j["trials"] = std::move(trials);
    return j.dump(2);
}

std::string report_to_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << "trial,tau_s,mean_rank,queries_used,seed\n";
    char buf[64];
    for (const auto& t : report.trials) {
        out << t.trial << ',';
        std::snprintf(buf, sizeof buf, "%.10g", t.tau_s);
        out << buf << ',';
        if (t.mean_rank) {
            std::snprintf(buf, sizeof buf, "%.10g", *t.mean_rank);
            out << buf;
        }
        out << ',' << t.queries_used << ',' << t.seed << '\n';
    }
    return out.str();
}

std::string report_to_text(const ExperimentReport& report) {
    std::ostringstream out;
    const json cfg = json::parse(report.config_echo);
    out << "experiment: method=" << cfg.value("method", "?") << " k=" << cfg.value("k", 0)
        << " n=" << (cfg.contains("n") && cfg["n"].is_number()
                         ? std::to_string(cfg["n"].get<std::size_t>())
                         : std::string("unbounded"))
        << " trials=" << report.trials.size() << "\n\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %10s %10s\n", "metric", "mean",
                  "stdev", "min", "max", "median");
    out << line;
    const auto row = [&](const char* name, const StatSummary& s) {
        std::snprintf(line, sizeof line, "%-12s %10.4f %10.4f %10.4f %10.4f %10.4f\n", name,
                      s.mean, s.stdev, s.min, s.max, s.median);
        out << line;
    };
    row("tau_s", report.tau_s);
    if (report.mean_rank) row("mean_rank", *report.mean_rank);
    std::snprintf(line, sizeof line, "%-12s %10.1f\n", "queries", report.mean_queries_used);
    out << line;
    std::snprintf(line, sizeof line, "%-12s %10.3f s (%.4f s/trial)\n", "wall_clock",
                  report.wall_seconds, report.per_trial_seconds);
    out << line;
    return out.str();
}

}  // namespace oatk
