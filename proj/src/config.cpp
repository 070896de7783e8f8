#include "fedma/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fedma {

namespace {

std::string delay_kind_name(DelayKind k) {
    switch (k) {
        case DelayKind::HalfNormal: return "half-normal";
        case DelayKind::Uniform: return "uniform";
        case DelayKind::Exponential: return "exponential";
        case DelayKind::DeterministicZero: return "zero";
    }
    throw contract_error("unknown delay kind");
}

DelayKind delay_kind_from_name(const std::string& name) {
    if (name == "half-normal") return DelayKind::HalfNormal;
    if (name == "uniform") return DelayKind::Uniform;
    if (name == "exponential") return DelayKind::Exponential;
    if (name == "zero") return DelayKind::DeterministicZero;
    throw contract_error("unknown delay kind: " + name);
}

std::string opt_name(ServerOptKind k) {
    switch (k) {
        case ServerOptKind::FedAvg: return "fedavg";
        case ServerOptKind::FedAvgM: return "fedavgm";
        case ServerOptKind::FedAdam: return "fedadam";
    }
    throw contract_error("unknown server optimizer");
}

ServerOptKind opt_from_name(const std::string& name) {
    if (name == "fedavg") return ServerOptKind::FedAvg;
    if (name == "fedavgm") return ServerOptKind::FedAvgM;
    if (name == "fedadam") return ServerOptKind::FedAdam;
    throw contract_error("unknown server optimizer: " + name);
}

}  // namespace

nlohmann::json config_to_json(const SimConfig& cfg) {
    nlohmann::json j;
    j["population"] = cfg.population;
    j["sample_count"] = cfg.sample_count;
    j["poisson_sampling"] = cfg.poisson_sampling;
    j["cohort"] = cfg.cohort;
    j["horizon"] = cfg.horizon;
    j["server_lr"] = cfg.server_lr;
    j["local_lr"] = cfg.local_lr;
    j["local_steps"] = cfg.local_steps;
    j["beta"] = cfg.beta;
    j["beta2"] = cfg.beta2;
    j["adaptivity"] = cfg.adaptivity;
    j["server_opt"] = opt_name(cfg.server_opt);
    j["downscale_p"] = cfg.downscale_p;
    j["tau_max"] = cfg.tau_max;
    j["delay"] = {{"kind", delay_kind_name(cfg.delay.kind)},
                  {"scale", cfg.delay.scale},
                  {"cutoff", cfg.delay.uniform_cutoff}};
    j["method"] = method_name(cfg.method);
    j["wp_history_decay"] = cfg.wp_history_decay;
    if (cfg.dp) {
        j["dp"] = {{"clip_bound", cfg.dp->clip_bound},
                   {"noise_multiplier", cfg.dp->noise_multiplier},
                   {"one_hot_noise", cfg.dp->one_hot_noise},
                   {"project_w_rows", cfg.dp->project_w_rows}};
    }
    j["seed"] = cfg.seed;
    j["ema_decay"] = cfg.ema_decay;
    j["retain_history"] = cfg.retain_history;
    j["retain_traces"] = cfg.retain_traces;
    j["task"] = {{"kind", cfg.task.kind},
                 {"dim", cfg.task.dim},
                 {"num_clients", cfg.task.num_clients},
                 {"heterogeneity", cfg.task.heterogeneity},
                 {"samples_per_client", cfg.task.samples_per_client},
                 {"label_noise", cfg.task.label_noise}};
    return j;
}

SimConfig config_from_json(const nlohmann::json& j) {
    SimConfig cfg;
    if (j.contains("task")) {
        const auto& t = j.at("task");
        cfg.task.kind = t.value("kind", cfg.task.kind);
        cfg.task.dim = t.value("dim", cfg.task.dim);
        cfg.task.num_clients = t.value("num_clients", cfg.task.num_clients);
        cfg.task.heterogeneity = t.value("heterogeneity", cfg.task.heterogeneity);
        cfg.task.samples_per_client = t.value("samples_per_client", cfg.task.samples_per_client);
        cfg.task.label_noise = t.value("label_noise", cfg.task.label_noise);
    }
    cfg.population = j.value("population", cfg.task.num_clients);
    cfg.task.num_clients = cfg.population;
    cfg.sample_count = j.value("sample_count", cfg.sample_count);
    cfg.poisson_sampling = j.value("poisson_sampling", false);
    cfg.cohort = j.value("cohort", cfg.cohort);
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.server_lr = j.value("server_lr", cfg.server_lr);
    cfg.local_lr = j.value("local_lr", cfg.local_lr);
    cfg.local_steps = j.value("local_steps", cfg.local_steps);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.adaptivity = j.value("adaptivity", cfg.adaptivity);
    cfg.server_opt = opt_from_name(j.value("server_opt", std::string("fedavgm")));
    cfg.downscale_p = j.value("downscale_p", cfg.downscale_p);
    cfg.tau_max = j.value("tau_max", cfg.tau_max);
    if (j.contains("delay")) {
        const auto& d = j.at("delay");
        cfg.delay.kind = delay_kind_from_name(d.value("kind", std::string("half-normal")));
        cfg.delay.scale = d.value("scale", 5.0);
        cfg.delay.uniform_cutoff = d.value("cutoff", Eigen::Index{10});
    }
    cfg.method = method_from_name(j.value("method", std::string("fedbuff-momentum")));
    cfg.wp_history_decay = j.value("wp_history_decay", cfg.wp_history_decay);
    if (j.contains("dp") && !j.at("dp").is_null()) {
        const auto& d = j.at("dp");
        cfg.dp = DpConfig::calibrated(d.value("noise_multiplier", 1.0),
                                      d.value("one_hot_noise", 2.0), d.value("clip_bound", 0.1));
        cfg.dp->project_w_rows = d.value("project_w_rows", false);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.ema_decay = j.value("ema_decay", cfg.ema_decay);
    cfg.retain_history = j.value("retain_history", false);
    cfg.retain_traces = j.value("retain_traces", false);
    cfg.validate();
    return cfg;
}

SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw contract_error("cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return config_from_json(j);
}

void set_json_path(nlohmann::json& doc, const std::string& path, const nlohmann::json& value) {
    nlohmann::json* node = &doc;
    std::istringstream parts(path);
    std::string key;
    std::vector<std::string> keys;
    while (std::getline(parts, key, '.')) keys.push_back(key);
    require(!keys.empty(), "set_json_path: empty key path");
    for (size_t i = 0; i + 1 < keys.size(); ++i) node = &(*node)[keys[i]];
    (*node)[keys.back()] = value;
}

std::size_t SweepSpec::point_count() const {
    std::size_t n = seeds.empty() ? 1 : seeds.size();
    for (const auto& axis : axes) n *= axis.values.size();
    return n;
}

SweepSpec load_sweep(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw contract_error("cannot open sweep spec: " + path);
    nlohmann::json j;
    in >> j;
    SweepSpec spec;
    require(j.contains("base"), "sweep spec needs a \"base\" config");
    spec.base = j.at("base");
    config_from_json(spec.base);  // validate the base up front
    if (j.contains("axes")) {
        for (auto it = j.at("axes").begin(); it != j.at("axes").end(); ++it) {
            SweepAxis axis;
            axis.key = it.key();
            require(it.value().is_array(), "sweep axis " + axis.key + " must be an array");
            for (const auto& v : it.value()) axis.values.push_back(v);
            require(!axis.values.empty(), "sweep axis " + axis.key + " is empty");
            spec.axes.push_back(std::move(axis));
        }
    }
    if (j.contains("seeds"))
        for (const auto& s : j.at("seeds")) spec.seeds.push_back(s.get<std::uint64_t>());
    return spec;
}

std::vector<SweepPoint> expand_sweep(const SweepSpec& spec) {
    std::vector<std::uint64_t> seeds = spec.seeds;
    if (seeds.empty()) seeds.push_back(spec.base.value("seed", std::uint64_t{0}));

    std::vector<SweepPoint> points;
    std::vector<size_t> cursor(spec.axes.size(), 0);
    while (true) {
        nlohmann::json doc = spec.base;
        std::vector<std::pair<std::string, nlohmann::json>> assignment;
        for (size_t i = 0; i < spec.axes.size(); ++i) {
            const auto& v = spec.axes[i].values[cursor[i]];
            set_json_path(doc, spec.axes[i].key, v);
            assignment.emplace_back(spec.axes[i].key, v);
        }
        for (std::uint64_t seed : seeds) {
            nlohmann::json patched = doc;
            patched["seed"] = seed;
            SweepPoint p;
            p.config = config_from_json(patched);
            p.assignment = assignment;
            p.seed = seed;
            // hash the canonical serialization, so resume survives
            // cosmetic edits to the spec file
            std::ostringstream h;
            h << std::hex << hash_name(config_to_json(p.config).dump());
            p.content_hash = h.str();
            points.push_back(std::move(p));
        }
        size_t i = 0;
        for (; i < cursor.size(); ++i) {
            if (++cursor[i] < spec.axes[i].values.size()) break;
            cursor[i] = 0;
        }
        if (i == cursor.size()) break;
    }
    return points;
}

void apply_env_overrides(SimConfig& cfg) {
    if (const char* s = std::getenv("FEDMA_SEED")) cfg.seed = std::strtoull(s, nullptr, 10);
}

}  // namespace fedma
