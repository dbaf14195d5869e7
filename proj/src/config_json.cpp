#include "config_json.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "oatk/numeric.hpp"

namespace oatk::detail {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const char* where) {
    for (const auto& item : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return item.key() == k;
            }) == allowed.end()) {
            throw std::invalid_argument(std::string("config: unknown key '") + item.key() +
                                        "' in " + where);
        }
    }
}

double number_or_fraction(const json& v, const char* what) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return Ratio::parse(v.get<std::string>()).value();
    throw std::invalid_argument(std::string("config: ") + what +
                                " must be a number or a fraction string");
}

std::uint64_t positive_integer(const json& v, const char* what) {
    if (!v.is_number_integer() || v.get<long long>() < 1) {
        throw std::invalid_argument(std::string("config: ") + what +
                                    " must be an integer >= 1");
    }
    return static_cast<std::uint64_t>(v.get<long long>());
}

VisibleRange parse_n(const json& v) {
    if (v.is_string() && (v == "unbounded" || v == "inf")) return std::nullopt;
    if (v.is_number_integer() && v.get<long long>() >= 1) {
        return static_cast<std::size_t>(v.get<long long>());
    }
    throw std::invalid_argument("config: 'n' must be an integer >= 1 or \"unbounded\"");
}

ReducedDims parse_dims(const json& v, const char* what) {
    if (!v.is_array() || v.size() != 3) {
        throw std::invalid_argument(std::string("config: ") + what +
                                    " must be [channels, height, width]");
    }
    ReducedDims d;
    d.channels = positive_integer(v[0], what);
    d.height = positive_integer(v[1], what);
    d.width = positive_integer(v[2], what);
    return d;
}

void parse_optimizer(const json& v, OptimizerConfig* oc) {
    check_keys(v,
               {"batch", "learning_rate", "sigma", "spsa_delta", "beta_lr", "pso",
                "reduced_dims", "query_dims", "init"},
               "optimizer");
    if (v.contains("batch")) oc->batch = positive_integer(v["batch"], "optimizer.batch");
    if (v.contains("learning_rate")) {
        oc->learning_rate = number_or_fraction(v["learning_rate"], "optimizer.learning_rate");
    }
    if (v.contains("sigma") && !v["sigma"].is_null()) {
        oc->sigma = number_or_fraction(v["sigma"], "optimizer.sigma");
    }
    if (v.contains("spsa_delta")) {
        oc->spsa_delta = number_or_fraction(v["spsa_delta"], "optimizer.spsa_delta");
    }
    if (v.contains("beta_lr")) oc->beta_lr = number_or_fraction(v["beta_lr"], "optimizer.beta_lr");
    if (v.contains("pso")) {
        const auto& p = v["pso"];
        check_keys(p, {"omega", "phi_p", "phi_g", "swarm"}, "optimizer.pso");
        if (p.contains("omega")) oc->pso.omega = number_or_fraction(p["omega"], "pso.omega");
        if (p.contains("phi_p")) oc->pso.phi_p = number_or_fraction(p["phi_p"], "pso.phi_p");
        if (p.contains("phi_g")) oc->pso.phi_g = number_or_fraction(p["phi_g"], "pso.phi_g");
        if (p.contains("swarm")) oc->pso.swarm = positive_integer(p["swarm"], "pso.swarm");
    }
    if (v.contains("reduced_dims") && !v["reduced_dims"].is_null()) {
        oc->reduced_dims = parse_dims(v["reduced_dims"], "optimizer.reduced_dims");
    }
    if (v.contains("query_dims") && !v["query_dims"].is_null()) {
        oc->query_dims = parse_dims(v["query_dims"], "optimizer.query_dims");
    }
    if (v.contains("init")) {
        if (v["init"] == "zero") {
            oc->init = InitMode::Zero;
        } else if (v["init"] == "uniform") {
            oc->init = InitMode::UniformRandom;
        } else {
            throw std::invalid_argument("config: optimizer.init must be 'zero' or 'uniform'");
        }
    }
}

void parse_whitebox(const json& v, PgdConfig* pgd, WhiteboxLossConfig* wb) {
    check_keys(v, {"eta", "steps", "xi", "margin_gamma", "distractors", "quantize"},
               "whitebox");
    if (v.contains("quantize")) {
        if (!v["quantize"].is_boolean()) {
            throw std::invalid_argument("config: whitebox.quantize must be a boolean");
        }
        pgd->quantize = v["quantize"].get<bool>();
    }
    if (v.contains("eta")) pgd->eta = number_or_fraction(v["eta"], "whitebox.eta");
    if (v.contains("steps")) pgd->steps = static_cast<int>(positive_integer(v["steps"], "whitebox.steps"));
    if (v.contains("xi")) wb->xi = number_or_fraction(v["xi"], "whitebox.xi");
    if (v.contains("margin_gamma")) {
        wb->margin_gamma = number_or_fraction(v["margin_gamma"], "whitebox.margin_gamma");
    }
    if (v.contains("distractors")) {
        if (!v["distractors"].is_number_integer() || v["distractors"].get<long long>() < 0) {
            throw std::invalid_argument("config: whitebox.distractors must be an integer >= 0");
        }
        wb->qa_distractor_count = static_cast<std::size_t>(v["distractors"].get<long long>());
    }
}

void parse_dataset(const json& v, DatasetSource* ds) {
    check_keys(v, {"synthetic", "path", "model_seed", "query_dim"}, "dataset");
    if (v.contains("path")) {
        ds->path = v["path"].get<std::string>();
        if (v.contains("model_seed")) {
            ds->model_seed = v["model_seed"].get<std::uint64_t>();
        }
        if (v.contains("query_dim")) {
            ds->query_dim = positive_integer(v["query_dim"], "dataset.query_dim");
        }
        if (v.contains("synthetic")) {
            throw std::invalid_argument("config: dataset is either a file or synthetic");
        }
        return;
    }
    SyntheticConfig s;
    if (v.contains("synthetic")) {
        const auto& sj = v["synthetic"];
        check_keys(sj,
                   {"classes", "per_class", "embed_dim", "query_dim", "intra_class_std",
                    "center_scale", "seed"},
                   "dataset.synthetic");
        if (sj.contains("classes")) s.classes = positive_integer(sj["classes"], "classes");
        if (sj.contains("per_class")) s.per_class = positive_integer(sj["per_class"], "per_class");
        if (sj.contains("embed_dim")) s.embed_dim = positive_integer(sj["embed_dim"], "embed_dim");
        if (sj.contains("query_dim")) s.query_dim = positive_integer(sj["query_dim"], "query_dim");
        if (sj.contains("intra_class_std")) {
            s.intra_class_std = number_or_fraction(sj["intra_class_std"], "intra_class_std");
        }
        if (sj.contains("center_scale")) {
            s.center_scale = number_or_fraction(sj["center_scale"], "center_scale");
        }
        if (sj.contains("seed")) s.seed = sj["seed"].get<std::uint64_t>();
    }
    ds->synthetic = s;
}

// Echo: struct-resolved JSON with the input's exact value spellings kept for
// the fields that were given as fraction strings.
std::string make_echo(const json& input, const std::string& resolved) {
    json echo = json::parse(resolved);
    const auto keep = [&](const char* key) {
        if (input.contains(key) && input[key].is_string() && echo.contains(key)) {
            echo[key] = input[key];
        }
    };
    keep("epsilon");
    if (input.contains("whitebox") && echo.contains("whitebox")) {
        for (const char* key : {"eta", "xi", "margin_gamma"}) {
            if (input["whitebox"].contains(key) && input["whitebox"][key].is_string()) {
                echo["whitebox"][key] = input["whitebox"][key];
            }
        }
    }
    if (input.contains("optimizer") && echo.contains("optimizer")) {
        for (const char* key : {"learning_rate", "sigma", "spsa_delta", "beta_lr"}) {
            if (input["optimizer"].contains(key) && input["optimizer"][key].is_string()) {
                echo["optimizer"][key] = input["optimizer"][key];
            }
        }
    }
    return echo.dump(2);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json v;
    try {
        v = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!v.is_object()) {
        throw std::invalid_argument("config: top level must be a JSON object");
    }
    check_keys(v,
               {"k", "n", "epsilon", "query_budget", "trials", "method", "seed", "jobs",
                "whitebox", "optimizer", "dataset"},
               "the experiment config");

    ExperimentConfig cfg;
    if (v.contains("k")) cfg.k = positive_integer(v["k"], "k");
    if (v.contains("n")) cfg.n = parse_n(v["n"]);
    if (v.contains("epsilon")) cfg.epsilon = number_or_fraction(v["epsilon"], "epsilon");
    if (v.contains("query_budget")) cfg.query_budget = positive_integer(v["query_budget"], "query_budget");
    if (v.contains("trials")) cfg.trials = positive_integer(v["trials"], "trials");
    if (v.contains("method")) {
        const auto m = attack_method_from_string(v["method"].get<std::string>());
        if (!m) {
            throw std::invalid_argument("config: unknown method '" +
                                        v["method"].get<std::string>() + "'");
        }
        cfg.method = *m;
    }
    if (v.contains("seed")) cfg.seed = v["seed"].get<std::uint64_t>();
    if (v.contains("jobs")) cfg.jobs = positive_integer(v["jobs"], "jobs");
    if (v.contains("whitebox")) parse_whitebox(v["whitebox"], &cfg.pgd, &cfg.whitebox);
    if (v.contains("optimizer")) parse_optimizer(v["optimizer"], &cfg.optimizer);
    if (v.contains("dataset")) {
        parse_dataset(v["dataset"], &cfg.dataset);
    } else {
        cfg.dataset.synthetic = SyntheticConfig{};
    }
    cfg.pgd.epsilon = cfg.epsilon;
    cfg.config_echo = make_echo(v, experiment_config_to_json(cfg));
    cfg.validate();
    return cfg;
}

ParsedAttack parse_attack_config(const std::string& json_text) {
    json v;
    try {
        v = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!v.is_object()) {
        throw std::invalid_argument("config: top level must be a JSON object");
    }
    check_keys(v,
               {"method", "k", "n", "epsilon", "query_budget", "seed", "candidates",
                "permutation", "optimizer", "whitebox"},
               "the attack config");

    ParsedAttack out;
    if (v.contains("method")) {
        const auto m = attack_method_from_string(v["method"].get<std::string>());
        if (!m || *m == AttackMethod::None) {
            throw std::invalid_argument("config: unknown attack method");
        }
        out.method = *m;
    }
    if (v.contains("k")) out.single.k = positive_integer(v["k"], "k");
    if (v.contains("n")) out.n = parse_n(v["n"]);
    if (v.contains("epsilon")) out.single.epsilon = number_or_fraction(v["epsilon"], "epsilon");
    if (v.contains("query_budget")) {
        out.single.query_budget = positive_integer(v["query_budget"], "query_budget");
    }
    if (v.contains("seed")) out.single.seed = v["seed"].get<std::uint64_t>();
    if (v.contains("candidates")) {
        for (const auto& c : v["candidates"]) {
            out.single.candidates.push_back(c.get<std::string>());
        }
    }
    if (v.contains("permutation")) {
        for (const auto& p : v["permutation"]) {
            out.single.permutation.push_back(static_cast<int>(p.get<long long>()));
        }
    }
    if (v.contains("optimizer")) parse_optimizer(v["optimizer"], &out.single.optimizer);
    if (v.contains("whitebox")) parse_whitebox(v["whitebox"], &out.pgd, &out.whitebox);
    out.single.method = out.method;
    out.pgd.epsilon = out.single.epsilon;

    json echo;
    echo["method"] = to_string(out.method);
    echo["k"] = out.single.k;
    echo["n"] = out.n ? json(*out.n) : json("unbounded");
    echo["epsilon"] = v.contains("epsilon") && v["epsilon"].is_string()
                          ? v["epsilon"]
                          : json(out.single.epsilon);
    echo["query_budget"] = out.single.query_budget;
    echo["seed"] = out.single.seed;
    if (out.method == AttackMethod::Whitebox) {
        echo["whitebox"] = {{"eta", out.pgd.eta},
                            {"steps", out.pgd.steps},
                            {"xi", out.whitebox.xi},
                            {"margin_gamma", out.whitebox.margin_gamma},
                            {"distractors", out.whitebox.qa_distractor_count},
                            {"quantize", out.pgd.quantize}};
        if (v.contains("whitebox") && v["whitebox"].contains("eta") &&
            v["whitebox"]["eta"].is_string()) {
            echo["whitebox"]["eta"] = v["whitebox"]["eta"];
        }
    } else {
        json opt;
        opt["batch"] = out.single.optimizer.batch;
        opt["learning_rate"] = out.single.optimizer.learning_rate;
        opt["sigma"] = out.single.optimizer.sigma ? json(*out.single.optimizer.sigma) : json();
        opt["spsa_delta"] = out.single.optimizer.spsa_delta;
        opt["beta_lr"] = out.single.optimizer.beta_lr;
        opt["pso"] = {{"omega", out.single.optimizer.pso.omega},
                      {"phi_p", out.single.optimizer.pso.phi_p},
                      {"phi_g", out.single.optimizer.pso.phi_g},
                      {"swarm", out.single.optimizer.pso.swarm}};
        opt["init"] = out.single.optimizer.init == InitMode::Zero ? "zero" : "uniform";
        if (out.single.optimizer.reduced_dims) {
            const auto& d = *out.single.optimizer.reduced_dims;
            opt["reduced_dims"] = json::array({d.channels, d.height, d.width});
        }
        if (v.contains("optimizer")) {
            for (const char* key : {"learning_rate", "sigma", "spsa_delta", "beta_lr"}) {
                if (v["optimizer"].contains(key) && v["optimizer"][key].is_string()) {
                    opt[key] = v["optimizer"][key];
                }
            }
        }
        echo["optimizer"] = std::move(opt);
    }
    out.echo = echo.dump(2);
    return out;
}

std::string attack_result_to_json(const AttackResult& result, const AttackSpec& spec,
                                  const std::string& config_echo) {
    json j;
    j["config"] = json::parse(config_echo);
    json sj;
    sj["candidates"] = spec.candidates;
    sj["permutation"] = spec.permutation;
    sj["n"] = spec.visible_range ? json(*spec.visible_range) : json("unbounded");
    sj["epsilon"] = spec.epsilon;
    sj["query_budget"] = spec.query_budget;
    j["spec"] = std::move(sj);
    j["tau_s"] = result.tau_s;
    j["mean_rank"] = result.mean_rank ? json(*result.mean_rank) : json();
    j["queries_used"] = result.queries_used;
    json trace = json::array();
    for (const auto& [it, tau] : result.trace) trace.push_back(json::array({it, tau}));
    j["trace"] = std::move(trace);
    j["perturbation"] = {{"epsilon", result.perturbation.epsilon},
                         {"linf", result.perturbation.linf_norm()},
                         {"delta", result.perturbation.delta}};
    return j.dump(2);
}

}  // namespace oatk::detail
