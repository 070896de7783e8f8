#include "fedma/engine.hpp"

#include <deque>
#include <limits>
#include <map>
#include <utility>

namespace fedma {

std::string method_name(Method m) {
    switch (m) {
        case Method::FedBuffMomentum: return "fedbuff-momentum";
        case Method::MaFull: return "ma-full";
        case Method::MaLight: return "ma-light";
        case Method::WeightPrediction: return "weight-prediction";
        case Method::Sync: return "sync";
    }
    throw contract_error("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
    if (name == "fedbuff-momentum") return Method::FedBuffMomentum;
    if (name == "ma-full") return Method::MaFull;
    if (name == "ma-light") return Method::MaLight;
    if (name == "weight-prediction") return Method::WeightPrediction;
    if (name == "sync") return Method::Sync;
    throw contract_error("unknown method: " + name);
}

void SimConfig::validate() const {
    require(population >= 1, "config: population must be >= 1");
    require(cohort >= 1, "config: cohort must be >= 1");
    require(sample_count >= cohort, "config: sample count K must be >= cohort C");
    require(sample_count <= population, "config: sample count K must be <= population");
    require(horizon >= 1, "config: horizon must be >= 1");
    require(server_lr > 0.0 && local_lr > 0.0, "config: learning rates must be > 0");
    require(local_steps >= 1, "config: local steps must be >= 1");
    require(beta >= 0.0 && beta < 1.0, "config: beta in [0,1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "config: beta2 in [0,1)");
    require(adaptivity > 0.0, "config: adaptivity must be > 0");
    require(downscale_p >= 0.0, "config: p must be >= 0");
    require(tau_max >= 0, "config: tau_max must be >= 0");
    require(ema_decay >= 0.0 && ema_decay < 1.0, "config: ema decay in [0,1)");
    require(wp_history_decay >= 0.0 && wp_history_decay < 1.0, "config: history decay in [0,1)");
    if (dp) {
        require(dp->gamma > 0.0 && dp->sensitivity > 0.0,
                "config: dp settings must be calibrated (gamma, sensitivity unset)");
    }
}

std::unique_ptr<Task> make_task(const TaskSpec& spec, std::uint64_t seed) {
    if (spec.kind == "quadratic")
        return std::make_unique<QuadraticTask>(spec.dim, spec.num_clients, spec.heterogeneity, seed);
    if (spec.kind == "logistic")
        return std::make_unique<LogisticTask>(spec.dim, spec.num_clients, spec.samples_per_client,
                                              spec.heterogeneity, spec.label_noise, seed);
    throw contract_error("unknown task kind: " + spec.kind);
}

namespace {

struct PendingUpdate {
    Eigen::Index version = 0;  // server iteration the client trained against
    Eigen::Index due = 0;      // iteration the result arrives
    Eigen::Index client = 0;
    Vector delta;              // empty in arrival-only simulation
};

// Buffered-arrival scheduler. Arrivals due at or before t are consumed
// in seeded-shuffled order after any spill left over from the previous
// dispatch; when fewer than C survive the staleness filter the server
// waits, which we model by pulling the earliest-due future arrivals
// forward.
class ArrivalScheduler {
public:
    void enqueue(PendingUpdate u) {
        pending_.emplace(u.due, std::move(u));
        ++enqueued_;
    }

    std::vector<PendingUpdate> dispatch(Eigen::Index t, Eigen::Index cohort, Eigen::Index tau_max,
                                        RngStream& shuffle_rng, Eigen::Index* wait,
                                        Eigen::Index* drops) {
        *wait = 0;
        *drops = 0;

        // spilled surplus that has aged past the staleness bound can
        // never be accepted again; retire it now
        for (auto it = spill_.begin(); it != spill_.end();) {
            if (!staleness_keep(t - it->version, tau_max)) {
                ++dropped_;
                ++*drops;
                it = spill_.erase(it);
            } else {
                ++it;
            }
        }

        std::vector<PendingUpdate> due_now;
        for (auto it = pending_.begin(); it != pending_.end() && it->first <= t;) {
            due_now.push_back(std::move(it->second));
            it = pending_.erase(it);
        }
        for (size_t i = due_now.size(); i > 1; --i)
            std::swap(due_now[i - 1], due_now[shuffle_rng.next_below(i)]);

        std::vector<PendingUpdate> buffer;
        buffer.reserve(static_cast<size_t>(cohort));
        auto take = [&](PendingUpdate&& u) {
            if (!staleness_keep(t - u.version, tau_max)) {
                ++dropped_;
                ++*drops;
                return;
            }
            buffer.push_back(std::move(u));
            ++accepted_;
        };

        // arrivals landing this iteration take priority; earlier
        // surplus waits in the spill queue and is only drawn on a
        // shortfall, so the accepted staleness profile tracks the
        // delay distribution rather than queue aging
        size_t next = 0;
        while (next < due_now.size() && static_cast<Eigen::Index>(buffer.size()) < cohort)
            take(std::move(due_now[next++]));
        while (!spill_.empty() && static_cast<Eigen::Index>(buffer.size()) < cohort) {
            take(std::move(spill_.front()));
            spill_.pop_front();
        }
        for (; next < due_now.size(); ++next) spill_.push_back(std::move(due_now[next]));

        while (static_cast<Eigen::Index>(buffer.size()) < cohort) {
            if (pending_.empty())
                throw protocol_error("dispatch: arrival process starved at iteration " +
                                     std::to_string(t));
            auto it = pending_.begin();
            if (it->first - t > *wait) *wait = it->first - t;
            PendingUpdate u = std::move(it->second);
            pending_.erase(it);
            take(std::move(u));
        }
        return buffer;
    }

    Eigen::Index enqueued() const { return enqueued_; }
    Eigen::Index accepted() const { return accepted_; }
    Eigen::Index dropped() const { return dropped_; }
    Eigen::Index in_flight() const {
        return static_cast<Eigen::Index>(pending_.size() + spill_.size());
    }

private:
    std::multimap<Eigen::Index, PendingUpdate> pending_;  // insertion-ordered within a due slot
    std::deque<PendingUpdate> spill_;
    Eigen::Index enqueued_ = 0;
    Eigen::Index accepted_ = 0;
    Eigen::Index dropped_ = 0;
};

// K distinct clients (partial Fisher-Yates), or each client
// independently with probability K/m under Poisson sampling.
std::vector<Eigen::Index> sample_wave(const SimConfig& cfg, RngStream& rng) {
    std::vector<Eigen::Index> wave;
    if (cfg.poisson_sampling) {
        const double q = static_cast<double>(cfg.sample_count) / static_cast<double>(cfg.population);
        for (Eigen::Index k = 0; k < cfg.population; ++k)
            if (rng.next_double() < q) wave.push_back(k);
        return wave;
    }
    std::vector<Eigen::Index> idx(static_cast<size_t>(cfg.population));
    for (Eigen::Index k = 0; k < cfg.population; ++k) idx[static_cast<size_t>(k)] = k;
    for (Eigen::Index i = 0; i < cfg.sample_count; ++i) {
        const auto j = i + static_cast<Eigen::Index>(
                               rng.next_below(static_cast<std::uint64_t>(cfg.population - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        wave.push_back(idx[static_cast<size_t>(i)]);
    }
    return wave;
}

}  // namespace

RunResult run(const SimConfig& cfg, const Task& task) {
    cfg.validate();
    require(task.num_clients() == cfg.population, "run: task population mismatch");
    require(task.dim() == cfg.task.dim || cfg.task.dim == 0, "run: task dimension mismatch");

    const Eigen::Index d = task.dim();
    const Eigen::Index T = cfg.horizon;
    const Eigen::Index C = cfg.cohort;
    const bool is_ma_full = cfg.method == Method::MaFull;
    const bool is_ma_light = cfg.method == Method::MaLight;
    const bool keep_history = is_ma_full || cfg.retain_history;
    // Sync mode is the same machinery with the delay channel removed.
    const DelayDistribution delay_dist =
        cfg.method == Method::Sync ? DelayDistribution::zero() : cfg.delay;

    RngStream sampling = substream(cfg.seed, "sampling");
    RngStream delays = substream(cfg.seed, "delays");
    RngStream shuffle = substream(cfg.seed, "shuffle");
    RngStream noise = substream(cfg.seed, "noise");

    Vector theta = task.initial_point();
    Vector ema = theta;
    ServerOptState opt(cfg.server_opt, d, cfg.beta, cfg.beta2, cfg.adaptivity);
    StalenessMatrix w(T, cfg.downscale_p);
    MomentumMatrix m(cfg.beta, T);
    Matrix history;
    if (keep_history) history = Matrix::Zero(d, T);
    LightweightState light = LightweightState::init(T, d);
    Vector wp_history = Vector::Zero(d);
    ArrivalScheduler sched;

    RunResult out;
    out.metrics.reserve(static_cast<size_t>(T));
    if (cfg.retain_traces) out.theta_trace.reserve(static_cast<size_t>(T));

    for (Eigen::Index t = 1; t <= T && !out.diverged; ++t) {
        if (cfg.retain_traces) out.theta_trace.push_back(theta);

        for (Eigen::Index k : sample_wave(cfg, sampling)) {
            const Eigen::Index delay = sample_delay(delay_dist, delays);
            Vector start = theta;
            if (cfg.method == Method::WeightPrediction && delay > 0) {
                // predict where the model will be on arrival, using the
                // EMA of past aggregates through the server preconditioner
                Vector drive = wp_history;
                if (cfg.server_opt == ServerOptKind::FedAdam) {
                    Vector h = opt.second_moment().array().sqrt() + cfg.adaptivity;
                    drive = (drive.array() / h.array()).matrix();
                }
                start -= static_cast<double>(delay) * cfg.server_lr * drive;
            }
            sched.enqueue({t, t + delay, k, local_update(task, k, start, cfg.local_lr, cfg.local_steps)});
        }

        IterationMetrics im;
        im.iteration = t;
        auto buffer = sched.dispatch(t, C, cfg.tau_max, shuffle, &im.buffer_wait, &im.drops);
        im.accepted = static_cast<Eigen::Index>(buffer.size());

        Vector r;
        if (cfg.dp) {
            std::vector<PrivatePayload> payloads;
            payloads.reserve(buffer.size());
            for (const auto& u : buffer)
                payloads.push_back(PrivatePayload::make(u.delta, {T, u.version}, *cfg.dp));
            auto round = privatize_round(payloads, C, t, *cfg.dp, noise);
            r = std::move(round.aggregate);
            w.set_row(t, round.w_row);
        } else {
            r = Vector::Zero(d);
            for (const auto& u : buffer) {
                r += downscale_factor(t - u.version, cfg.downscale_p) * u.delta;
                w.record_arrival(t, {T, u.version}, C);
            }
            r /= static_cast<double>(C);
        }
        if (keep_history) history.col(t - 1) = r;
        im.aggregate_norm = r.norm();

        try {
            if (is_ma_full) {
                WeightVector a = solve_ma_weights(w, m, t, &im.ls_residual_sq);
                theta = opt.step_preformed(theta, ma_momentum(history, a), r, cfg.server_lr);
                im.a_norm_sq = a.head().squaredNorm();
            } else if (is_ma_light) {
                auto [lu, lv] = solve_lightweight(light, w, m, t, &im.ls_residual_sq);
                lightweight_step(light, r, lu, lv, w, t);
                theta = opt.step_preformed(theta, light.momentum_buffer, r, cfg.server_lr);
                im.a_norm_sq = light.a_tilde.head().squaredNorm();
                if (cfg.retain_history) {
                    const Vector via_history = ma_momentum(history, light.a_tilde);
                    const double ref = via_history.norm();
                    out.lightweight_rel_err.push_back(
                        ref > 0.0 ? (light.momentum_buffer - via_history).norm() / ref : 0.0);
                }
            } else {
                theta = opt.step(theta, r, cfg.server_lr);
            }
        } catch (const numerical_error&) {
            out.diverged = true;
        }
        if (!out.diverged && !all_finite(theta)) out.diverged = true;
        if (out.diverged) break;

        if (cfg.method == Method::WeightPrediction)
            wp_history = cfg.wp_history_decay * wp_history + (1.0 - cfg.wp_history_decay) * r;
        ema = ema_update(ema, theta, cfg.ema_decay);

        if (is_ma_full || is_ma_light) {
            out.a_frob_sq += im.a_norm_sq;
            out.cum_ls_residual += im.ls_residual_sq;
            out.cum_target_norm += m.row_prefix(t, t).squaredNorm();
        }
        im.loss = task.global_loss(theta);
        im.dist_to_opt = (theta - task.optimum()).norm();
        out.metrics.push_back(im);
        out.completed_iterations = t;
    }

    out.theta_final = theta;
    out.theta_ema = ema;
    out.staleness = std::move(w);
    if (keep_history) out.update_history = std::move(history);
    out.total_enqueued = sched.enqueued();
    out.total_accepted = sched.accepted();
    out.total_dropped = sched.dropped();
    out.pending_at_end = sched.in_flight();
    if (!out.diverged) {
        out.final_loss = task.global_loss(theta);
        out.final_ema_loss = task.global_loss(ema);
    } else {
        out.final_loss = std::numeric_limits<double>::infinity();
        out.final_ema_loss = std::numeric_limits<double>::infinity();
    }
    return out;
}

StalenessMatrix simulate_staleness(const SimConfig& cfg) {
    cfg.validate();
    const Eigen::Index T = cfg.horizon;
    const Eigen::Index C = cfg.cohort;
    const DelayDistribution delay_dist =
        cfg.method == Method::Sync ? DelayDistribution::zero() : cfg.delay;

    RngStream sampling = substream(cfg.seed, "sampling");
    RngStream delays = substream(cfg.seed, "delays");
    RngStream shuffle = substream(cfg.seed, "shuffle");

    StalenessMatrix w(T, cfg.downscale_p);
    ArrivalScheduler sched;
    for (Eigen::Index t = 1; t <= T; ++t) {
        for (Eigen::Index k : sample_wave(cfg, sampling)) {
            const Eigen::Index delay = sample_delay(delay_dist, delays);
            sched.enqueue({t, t + delay, k, Vector()});
        }
        Eigen::Index wait = 0;
        Eigen::Index drops = 0;
        for (const auto& u : sched.dispatch(t, C, cfg.tau_max, shuffle, &wait, &drops))
            w.record_arrival(t, {T, u.version}, C);
    }
    return w;
}

}  // namespace fedma
