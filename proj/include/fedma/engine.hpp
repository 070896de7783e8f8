#pragma once

#include "fedma/momentum.hpp"
#include "fedma/optimizers.hpp"
#include "fedma/privacy.hpp"
#include "fedma/staleness.hpp"
#include "fedma/tasks.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fedma {

enum class Method { FedBuffMomentum, MaFull, MaLight, WeightPrediction, Sync };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct TaskSpec {
    std::string kind = "quadratic";  // or "logistic"
    Eigen::Index dim = 10;
    Eigen::Index num_clients = 100;
    double heterogeneity = 1.0;
    Eigen::Index samples_per_client = 20;  // logistic only
    double label_noise = 0.0;              // logistic only
};

struct SimConfig {
    Eigen::Index population = 100;    // m, must match the task
    Eigen::Index sample_count = 20;   // K per iteration
    bool poisson_sampling = false;    // K_t ~ Binomial(m, K/m) instead of fixed K
    Eigen::Index cohort = 10;         // C
    Eigen::Index horizon = 100;       // T
    double server_lr = 0.5;           // eta
    double local_lr = 0.1;            // eta_l
    Eigen::Index local_steps = 1;     // Q
    double beta = 0.9;
    double beta2 = 0.99;              // FedAdam second moment
    double adaptivity = 0.01;         // FedAdam epsilon
    ServerOptKind server_opt = ServerOptKind::FedAvgM;
    double downscale_p = 0.0;
    Eigen::Index tau_max = 20;
    DelayDistribution delay = DelayDistribution::half_normal(5.0);
    Method method = Method::FedBuffMomentum;
    double wp_history_decay = 0.9;    // alpha in the weight-prediction EMA
    std::optional<DpConfig> dp;
    std::uint64_t seed = 0;
    double ema_decay = 0.99;
    bool retain_history = false;      // keep R even in light mode, for cross-checks
    bool retain_traces = false;       // keep the theta trace for oracle work
    TaskSpec task;

    void validate() const;
};

struct IterationMetrics {
    Eigen::Index iteration = 0;
    double loss = 0.0;
    double dist_to_opt = 0.0;
    double aggregate_norm = 0.0;   // ||r_t||
    Eigen::Index buffer_wait = 0;  // extra iterations pulled forward to fill C
    Eigen::Index drops = 0;        // tau_max drops during this iteration
    Eigen::Index accepted = 0;     // always C on a clean dispatch
    double ls_residual_sq = 0.0;   // MA modes
    double a_norm_sq = 0.0;        // ||a_t||^2 (MA modes)
};

struct RunResult {
    Vector theta_final;
    Vector theta_ema;
    std::vector<IterationMetrics> metrics;
    bool diverged = false;
    Eigen::Index completed_iterations = 0;

    // arrival accounting: enqueued == accepted + dropped + pending_at_end
    Eigen::Index total_enqueued = 0;
    Eigen::Index total_accepted = 0;
    Eigen::Index total_dropped = 0;
    Eigen::Index pending_at_end = 0;

    StalenessMatrix staleness;
    double a_frob_sq = 0.0;             // cumulative ||A||_F^2 (MA modes)
    double cum_ls_residual = 0.0;       // sum of per-row LS residuals (MA modes)
    double cum_target_norm = 0.0;       // sum of ||M_{t,:t}||^2, for relative error
    std::vector<Vector> theta_trace;    // theta_t before update t (retain_traces)
    Matrix update_history;              // R, d x T (ma-full or retain_history)
    std::vector<double> lightweight_rel_err;  // ||m~ - R a~|| / ||R a~|| per step

    double final_loss = 0.0;
    double final_ema_loss = 0.0;

    // ||AW - M||_F / ||M||_F over the completed prefix
    double cumulative_rel_ls_error() const {
        return cum_target_norm > 0.0 ? std::sqrt(cum_ls_residual / cum_target_norm) : 0.0;
    }
};

// Run the full buffered-asynchronous simulation for config.horizon
// server iterations. Deterministic given (config, task).
RunResult run(const SimConfig& config, const Task& task);

// Build a task from its spec; seed feeds the task's own substream.
std::unique_ptr<Task> make_task(const TaskSpec& spec, std::uint64_t seed);

// Simulate only the arrival process (no local training): returns the
// staleness matrix a run with this config would produce. Used by the
// diagnose path, where no model is needed.
StalenessMatrix simulate_staleness(const SimConfig& config);

}  // namespace fedma
