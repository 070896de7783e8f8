#include "fedma/artifacts.hpp"
#include "fedma/config.hpp"
#include "fedma/engine.hpp"
#include "fedma/momentum.hpp"
#include "fedma/privacy.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

namespace py = pybind11;
using nlohmann::json;

namespace {

fedma::SimConfig config_from_pystr(const std::string& config_json) {
    return fedma::config_from_json(json::parse(config_json));
}

// JSON strings keep the binding layer thin; callers json.loads/dumps.
std::string run_simulation(const std::string& config_json) {
    auto cfg = config_from_pystr(config_json);
    auto task = fedma::make_task(cfg.task, cfg.seed);
    const auto res = fedma::run(cfg, *task);
    json out = fedma::summarize(cfg, res);
    json series = json::array();
    for (const auto& im : res.metrics) series.push_back(fedma::metrics_row(im));
    out["metrics"] = series;
    return out.dump();
}

std::string default_config() { return fedma::config_to_json(fedma::SimConfig{}).dump(); }

fedma::Matrix staleness_dense(const std::string& config_json) {
    auto cfg = config_from_pystr(config_json);
    return fedma::simulate_staleness(cfg).matrix().dense();
}

fedma::Matrix momentum_dense(double beta, Eigen::Index horizon) {
    return fedma::MomentumMatrix(beta, horizon).matrix().dense();
}

std::string diagnostics(const std::string& config_json) {
    auto cfg = config_from_pystr(config_json);
    auto w = fedma::simulate_staleness(cfg);
    fedma::MomentumMatrix m(cfg.beta, cfg.horizon);
    const auto d = fedma::compute_diagnostics(w, m, cfg.horizon, cfg.cohort);
    json out;
    out["residual_sq"] = d.residual_sq;
    out["cumulative_rel"] = d.cumulative_rel;
    out["nullity"] = d.nullity;
    out["one_minus_alpha"] = d.one_minus_alpha;
    out["a_frob_sq"] = d.a_frob_sq;
    out["log_ratio"] = d.log_ratio;
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "buffered asynchronous federated learning simulator core";

    mod.def("run_simulation", &run_simulation, py::arg("config_json"),
            "Run one simulation; returns the summary (with per-iteration metrics) as JSON.");
    mod.def("default_config", &default_config, "Default configuration as JSON.");
    mod.def("simulate_staleness", &staleness_dense, py::arg("config_json"),
            "Arrival process only; returns the dense staleness matrix W.");
    mod.def("momentum_matrix", &momentum_dense, py::arg("beta"), py::arg("horizon"),
            "Dense lower-triangular momentum weight matrix M.");
    mod.def("diagnostics", &diagnostics, py::arg("config_json"),
            "Momentum-approximation diagnostic series as JSON.");
    mod.def(
        "least_squares_min_norm",
        [](const fedma::Matrix& w, const fedma::Vector& target) {
            return fedma::least_squares_min_norm(w, target);
        },
        py::arg("w"), py::arg("target"),
        "Minimum-norm a with W^T a ~= target (truncated pseudoinverse).");
    mod.def(
        "solve_ma_weights",
        [](const std::string& config_json, Eigen::Index t) {
            auto cfg = config_from_pystr(config_json);
            auto w = fedma::simulate_staleness(cfg);
            fedma::MomentumMatrix m(cfg.beta, cfg.horizon);
            double res = 0.0;
            auto a = fedma::solve_ma_weights(w, m, t, &res);
            return py::make_tuple(fedma::Vector(a.head()), res);
        },
        py::arg("config_json"), py::arg("t"),
        "Momentum-approximation weights and squared residual at iteration t.");
    mod.def(
        "calibrate_gamma",
        [](double sigma, double xi, double clip_bound) {
            auto [gamma, s] = fedma::calibrate_gamma(sigma, xi, clip_bound);
            return py::make_tuple(gamma, s);
        },
        py::arg("sigma"), py::arg("xi"), py::arg("clip_bound"),
        "Version-channel scale gamma and total sensitivity S.");
    mod.def(
        "clip",
        [](const fedma::Vector& delta, double bound) { return fedma::clip(delta, bound); },
        py::arg("delta"), py::arg("clip_bound"), "L2 clipping to the given bound.");
}
