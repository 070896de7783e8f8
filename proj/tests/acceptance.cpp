// End-to-end acceptance suite. Each numbered criterion prints exactly
// one PASS/FAIL line; the process exits nonzero if any fail.

#include "fedma/artifacts.hpp"
#include "fedma/config.hpp"
#include "fedma/engine.hpp"
#include "fedma/momentum.hpp"
#include "fedma/privacy.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <vector>

using namespace fedma;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s%s%s\n", criterion, pass ? "PASS" : "FAIL",
                detail.empty() ? "" : "  ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buf[256];
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.next_normal();
    return a;
}

// ---------------------------------------------------------------- 1
// With zero delays and C = K every accepted update is fresh, so the
// corrected methods must coincide with plain buffered momentum.
void criterion_sync_reduction() {
    const auto t0 = std::chrono::steady_clock::now();
    SimConfig cfg;
    cfg.population = 40;
    cfg.sample_count = 10;
    cfg.cohort = 10;
    cfg.horizon = 200;
    cfg.server_lr = 0.5;
    cfg.local_lr = 0.1;
    cfg.delay = DelayDistribution::zero();
    cfg.retain_traces = true;
    cfg.seed = 11;
    cfg.task.dim = 16;
    cfg.task.num_clients = 40;

    double worst = 0.0;
    for (double beta : {0.0, 0.5, 0.9}) {
        cfg.beta = beta;
        auto task = make_task(cfg.task, cfg.seed);
        std::vector<RunResult> runs;
        for (Method m : {Method::FedBuffMomentum, Method::MaFull, Method::MaLight}) {
            cfg.method = m;
            runs.push_back(run(cfg, *task));
        }
        for (size_t i = 0; i < runs.size(); ++i)
            for (size_t j = i + 1; j < runs.size(); ++j) {
                for (size_t t = 0; t < runs[i].theta_trace.size(); ++t)
                    worst = std::max(
                        worst, (runs[i].theta_trace[t] - runs[j].theta_trace[t]).norm());
                worst = std::max(worst, (runs[i].theta_final - runs[j].theta_final).norm());
            }
    }
    report(1, worst <= 1e-10,
           fmt("max pairwise trajectory gap %.2e (tol 1e-10), %.1fs", worst, seconds_since(t0)));
}

// ---------------------------------------------------------------- 2
// Unrolled matrix form of T momentum steps vs the recurrence.
void criterion_unroll() {
    RngStream rng(202);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index t_len = 1 + static_cast<Eigen::Index>(rng.next_below(120));
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.next_below(16));
        const double beta = rng.next_double() * 0.99;
        const double eta = 0.01 + rng.next_double();
        Matrix r = random_matrix(d, t_len, rng);
        Vector theta1 = random_matrix(d, 1, rng);

        Vector theta = theta1;
        Vector mom = Vector::Zero(d);
        for (Eigen::Index t = 0; t < t_len; ++t) {
            mom = beta * mom + (1.0 - beta) * r.col(t);
            theta -= eta * mom;
        }
        MomentumMatrix m(beta, t_len);
        Vector unrolled = unrolled_momentum_update(theta1, r, m, eta);
        worst = std::max(worst, (unrolled - theta).norm() / std::max(1.0, theta.norm()));
    }
    report(2, worst <= 1e-9, fmt("max relative gap %.2e over 50 instances (tol 1e-9)", worst));
}

// ---------------------------------------------------------------- 3
// The production solve against a normal-equations pseudoinverse built
// on a different factorization (self-adjoint eigendecomposition).
void criterion_solver_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream rng(303);
    double worst = 0.0;
    int rank_deficient_seen = 0;
    for (int rep = 0; rep < 200; ++rep) {
        Eigen::Index t = 0;
        StalenessMatrix w;
        Matrix wt;
        // redraw while the spectrum straddles the solver's truncation
        // cut; there the solver's documented truncation and an exact
        // pseudoinverse legitimately disagree
        for (;;) {
            t = 2 + static_cast<Eigen::Index>(rng.next_below(29));
            w = StalenessMatrix(t, 0.0);
            const bool deficient = rng.next_below(10) < 3;
            const Eigen::Index dead_col =
                deficient ? static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(t)))
                          : -1;
            for (Eigen::Index row = 1; row <= t; ++row) {
                Vector r = random_matrix(row, 1, rng);
                if (dead_col >= 0 && dead_col < row) r(dead_col) = 0.0;
                w.set_row(row, r);
            }
            wt = w.top_left(t);
            const SvdFactorization f = svd(wt);
            const double cut = solver_truncation(f, t, t);
            bool ambiguous = false;
            for (Eigen::Index i = 0; i < f.singular_values.size(); ++i) {
                const double s = f.singular_values(i);
                if (s <= 10.0 * cut && s > 1e-12 * f.singular_values(0)) ambiguous = true;
            }
            if (!ambiguous) {
                if (deficient) ++rank_deficient_seen;
                break;
            }
        }
        const double beta = rng.next_double() * 0.95;
        MomentumMatrix m(beta, t);
        auto a = solve_ma_weights(w, m, t, nullptr);

        // oracle: a = (W W^T)^+ W target via eigendecomposition
        const Vector target = m.row_prefix(t, t);
        const Matrix gram = wt * wt.transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
        const Vector rhs = wt * target;
        const double smax = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
        const double cut = Tolerances::ls_truncation_rel * smax * static_cast<double>(t);
        Vector oracle = Vector::Zero(t);
        for (Eigen::Index i = 0; i < t; ++i) {
            const double lam = es.eigenvalues()(i);
            if (lam > cut * cut)
                oracle += (es.eigenvectors().col(i).dot(rhs) / lam) * es.eigenvectors().col(i);
        }
        worst = std::max(worst, (Vector(a.head()) - oracle).norm() /
                                    std::max(1.0, oracle.norm()));
    }
    report(3, worst <= 1e-8 && rank_deficient_seen >= 30,
           fmt("max gap %.2e over 200 pairs, %d rank-deficient, %.1fs", worst,
               rank_deficient_seen, seconds_since(t0)));
}

// ---------------------------------------------------------------- 4
// Whenever W_{:t,:t} is full rank at the solver's own truncation
// level, the approximation is exact.
void criterion_full_rank_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    long full_rank_rows = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig cfg;
        cfg.population = 100;
        cfg.sample_count = 40;
        cfg.cohort = 20;
        cfg.horizon = 300;
        cfg.downscale_p = 1.0;
        cfg.beta = 0.9;
        cfg.seed = seed;
        cfg.task.num_clients = 100;
        cfg.task.dim = 20;
        auto w = simulate_staleness(cfg);
        MomentumMatrix m(cfg.beta, cfg.horizon);
        for (Eigen::Index t = 1; t <= cfg.horizon; ++t) {
            if (solver_rank(w.top_left(t)) != t) continue;
            ++full_rank_rows;
            double res_sq = 0.0;
            solve_ma_weights(w, m, t, &res_sq);
            worst = std::max(worst, std::sqrt(res_sq));
        }
    }
    report(4, worst <= 1e-8 && full_rank_rows > 100,
           fmt("max full-rank residual %.2e over %ld rows (tol 1e-8), %.1fs", worst,
               full_rank_rows, seconds_since(t0)));
}

// ---------------------------------------------------------------- 5
// The single-buffer recursion reproduces R * a~ exactly.
void criterion_lightweight_consistency() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig cfg;
        cfg.population = 50;
        cfg.sample_count = 20;
        cfg.cohort = 10;
        cfg.horizon = 200;
        cfg.method = Method::MaLight;
        cfg.retain_history = true;
        cfg.seed = seed;
        cfg.task.num_clients = 50;
        cfg.task.dim = 10;
        auto task = make_task(cfg.task, cfg.seed);
        auto res = run(cfg, *task);
        for (double e : res.lightweight_rel_err) worst = std::max(worst, e);
    }
    report(5, worst <= 1e-8, fmt("max relative gap %.2e over 10 runs (tol 1e-8)", worst));
}

// ---------------------------------------------------------------- 6
// Approximation-error table across delay distributions: the full
// solve stays accurate, the light-weight one degrades, and uniform
// delays are the hardest case for the full solve.
void criterion_delay_table() {
    const auto t0 = std::chrono::steady_clock::now();
    struct Entry {
        const char* name;
        DelayDistribution delay;
        double full = 0.0, light = 0.0;
    };
    Entry entries[] = {
        {"half-normal", DelayDistribution::half_normal(5.0)},
        {"uniform", DelayDistribution::uniform(20)},
        {"exponential", DelayDistribution::exponential(5.0)},
    };
    const Eigen::Index horizon = 500;
    for (auto& e : entries) {
        SimConfig cfg;
        cfg.population = 1000;
        cfg.sample_count = 400;
        cfg.cohort = 200;
        cfg.horizon = horizon;
        cfg.tau_max = 20;
        cfg.beta = 0.9;
        cfg.downscale_p = 0.5;
        cfg.delay = e.delay;
        cfg.seed = 7;
        cfg.task.num_clients = 1000;
        auto w = simulate_staleness(cfg);
        MomentumMatrix m(cfg.beta, horizon);
        double full_res = 0.0, light_res = 0.0, target_norm = 0.0;
        auto state = LightweightState::init(horizon, 1);
        const Vector r = Vector::Zero(1);
        for (Eigen::Index t = 1; t <= horizon; ++t) {
            double rf = 0.0, rl = 0.0;
            solve_ma_weights(w, m, t, &rf);
            auto [u, v] = solve_lightweight(state, w, m, t, &rl);
            lightweight_step(state, r, u, v, w, t);
            full_res += rf;
            light_res += rl;
            target_norm += m.row_prefix(t, t).squaredNorm();
        }
        e.full = std::sqrt(full_res / target_norm);
        e.light = std::sqrt(light_res / target_norm);
    }
    bool pass = true;
    for (const auto& e : entries) pass = pass && e.full < 0.12 && e.light > 0.25;
    pass = pass && entries[1].full > entries[0].full && entries[1].full > entries[2].full;
    report(6, pass,
           fmt("full %.2f/%.2f/%.2f%% (<12, uniform largest), light %.1f/%.1f/%.1f%% (>25), %.0fs",
               100 * entries[0].full, 100 * entries[1].full, 100 * entries[2].full,
               100 * entries[0].light, 100 * entries[1].light, 100 * entries[2].light,
               seconds_since(t0)));
}

// ----------------------------------------------------- 7, 8, 9
// One shared batch of seeded runs on the reference quadratic setup.
SimConfig reference_config(Method method, double beta, std::uint64_t seed) {
    SimConfig cfg;
    cfg.population = 1000;
    cfg.sample_count = 100;
    cfg.cohort = 50;
    cfg.horizon = 500;
    cfg.server_lr = 1.8;
    cfg.local_lr = 0.2;
    cfg.beta = beta;
    cfg.server_opt = ServerOptKind::FedAvgM;
    cfg.tau_max = 20;
    cfg.delay = DelayDistribution::half_normal(5.0);
    cfg.method = method;
    cfg.seed = seed;
    cfg.task.kind = "quadratic";
    cfg.task.dim = 100;
    cfg.task.num_clients = 1000;
    cfg.task.heterogeneity = 0.5;
    return cfg;
}

Eigen::Index iterations_to(const RunResult& res, double threshold) {
    for (const auto& im : res.metrics)
        if (im.loss <= threshold) return im.iteration;
    return -1;
}

void criteria_convergence_block() {
    const auto t0 = std::chrono::steady_clock::now();
    const int n_seeds = 10;
    std::vector<double> ratio_full, ratio_light;
    int sync_ok = 0, naive_ok = 0, ma_ok = 0;
    bool theorems_ok = true, log_ratio_ok = true;
    std::string theorem_detail;

    for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
        auto run_one = [&](Method m, double beta, bool traces) {
            auto cfg = reference_config(m, beta, seed);
            cfg.retain_traces = traces;
            auto task = make_task(cfg.task, cfg.seed);
            return run(cfg, *task);
        };
        const auto s09 = run_one(Method::Sync, 0.9, true);
        const auto s00 = run_one(Method::Sync, 0.0, false);
        const auto n09 = run_one(Method::FedBuffMomentum, 0.9, true);
        const auto n00 = run_one(Method::FedBuffMomentum, 0.0, false);
        const auto f09 = run_one(Method::MaFull, 0.9, true);
        const auto f00 = run_one(Method::MaFull, 0.0, false);
        const auto l09 = run_one(Method::MaLight, 0.9, false);

        // criterion 7: iterations to the naive baseline's best loss
        const double target = best_loss(n09);
        const Eigen::Index bi = iterations_to(n09, target);
        const Eigen::Index fi = iterations_to(f09, target);
        const Eigen::Index li = iterations_to(l09, target);
        const double inf = std::numeric_limits<double>::infinity();
        ratio_full.push_back(fi > 0 ? static_cast<double>(fi) / bi : inf);
        ratio_light.push_back(li > 0 ? static_cast<double>(li) / bi : inf);

        // criterion 8: momentum helps sync and corrected async, hurts naive
        sync_ok += s09.final_loss <= s00.final_loss;
        naive_ok += n09.final_loss >= n00.final_loss;
        ma_ok += f09.final_loss <= f00.final_loss;

        // criterion 9: measured bounds
        const auto cfg = reference_config(Method::Sync, 0.9, seed);
        auto task = make_task(cfg.task, cfg.seed);
        const Vector star = task->optimum();
        RngStream rho_rng(9000 + seed);
        auto measure = [&](const RunResult& r) {
            return measure_bound_inputs(*task, r.theta_trace, cfg.local_lr, cfg.local_steps,
                                        cfg.sample_count, cfg.cohort, cfg.server_lr, 50, rho_rng);
        };
        const auto in_s = measure(s09);
        const auto in_n = measure(n09);
        const auto in_f = measure(f09);
        const auto t1s = theorem1_sync_check(star, s09.theta_final, in_s);
        const auto t1a = theorem1_async_check(star, n09.theta_final, in_n);
        const auto t2 = theorem2_check(star, f09.theta_final, in_f, f09.a_frob_sq);
        if (!(t1s.satisfied && t1a.satisfied && t2.satisfied)) {
            theorems_ok = false;
            theorem_detail = fmt("seed %llu: t1s %d t1a %d t2 %d",
                                 static_cast<unsigned long long>(seed), t1s.satisfied,
                                 t1a.satisfied, t2.satisfied);
        }
        double cum_a = 0.0;
        for (const auto& im : f09.metrics) {
            cum_a += im.a_norm_sq;
            if (im.iteration < 10) continue;
            const double denom = std::log(static_cast<double>(cfg.cohort) * im.iteration *
                                          static_cast<double>(im.iteration));
            if (cum_a > 0.0 && std::log(cum_a) / denom >= 1.0) log_ratio_ok = false;
        }
    }

    const double mf = median(ratio_full), ml = median(ratio_light);
    report(7, mf <= 0.75 && ml <= 0.9,
           fmt("median iteration ratio: full %.3f (<=0.75), light %.3f (<=0.9)", mf, ml));
    report(8, sync_ok >= 8 && naive_ok >= 8 && ma_ok >= 8,
           fmt("momentum ordering held on sync %d/10, naive %d/10, corrected %d/10 (need >=8)",
               sync_ok, naive_ok, ma_ok));
    report(9, theorems_ok && log_ratio_ok,
           theorems_ok && log_ratio_ok
               ? fmt("all bounds satisfied on 10 seeds, %.0fs", seconds_since(t0))
               : (theorems_ok ? std::string("coefficient-growth property violated")
                              : theorem_detail));
}

// ---------------------------------------------------------------- 10
void criterion_dp_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    // hard sensitivity certificate
    auto cfg = DpConfig::calibrated(1.0, 2.0, 0.5);
    RngStream rng(1001);
    for (int i = 0; i < 10000 && ok; ++i) {
        Vector delta = random_matrix(8, 1, rng) * 3.0;
        auto p = PrivatePayload::make(
            delta, {16, 1 + static_cast<Eigen::Index>(rng.next_below(16))}, cfg);
        const double total = std::sqrt(p.clipped_delta.squaredNorm() + p.gamma * p.gamma);
        if (total > cfg.sensitivity * (1 + 1e-12)) {
            ok = false;
            detail = "sensitivity certificate violated";
        }
    }

    // calibration identity sigma * S / gamma == xi
    for (int i = 0; i < 10000 && ok; ++i) {
        const double sigma = 0.1 + rng.next_double() * 3.0;
        const double xi = sigma * (1.0 + 0.05 + rng.next_double() * 5.0);
        const double clip_bound = 0.01 + rng.next_double();
        auto [gamma, s] = calibrate_gamma(sigma, xi, clip_bound);
        if (std::abs(sigma * s / gamma - xi) > 1e-10 * xi) {
            ok = false;
            detail = "calibration identity violated";
        }
    }

    // Monte-Carlo noise std on the aggregate channel
    if (ok) {
        auto mc = DpConfig::calibrated(1.0, 2.0, 0.1);
        RngStream noise_rng(1002);
        const int n = 100000;
        std::vector<PrivatePayload> payloads(2, PrivatePayload::make(Vector::Zero(1), {4, 1}, mc));
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            auto round = privatize_round(payloads, 2, 1, mc, noise_rng);
            const double x = round.aggregate(0) * 2.0;
            sum += x;
            sum_sq += x * x;
        }
        const double std_hat = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
        const double expected = mc.noise_multiplier * mc.sensitivity;
        if (std::abs(std_hat - expected) > 0.02 * expected) {
            ok = false;
            detail = fmt("noise std %.5f vs %.5f", std_hat, expected);
        }
    }

    // the S = 1.1 S_delta operating point
    if (ok) {
        const double s_delta = 0.37;
        const double sigma = 1.0;
        const double xi = sigma * 1.1 / std::sqrt(0.21);
        auto [gamma, s] = calibrate_gamma(sigma, xi, s_delta);
        (void)s;
        if (std::abs(gamma - s_delta * std::sqrt(0.21)) > 1e-12) {
            ok = false;
            detail = "gamma at S = 1.1 S_delta off";
        }
    }
    report(10, ok, ok ? fmt("sensitivity, calibration, noise std, gamma all verified, %.0fs",
                            seconds_since(t0))
                      : detail);
}

// ---------------------------------------------------------------- 11
// A looser staleness bound admits older updates and ends no better.
void criterion_staleness_bound_direction() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> tight, loose;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (Eigen::Index tau_max : {Eigen::Index{20}, Eigen::Index{50}}) {
            auto cfg = reference_config(Method::MaFull, 0.9, seed);
            cfg.horizon = 300;
            cfg.delay = DelayDistribution::uniform(40);
            cfg.tau_max = tau_max;
            auto task = make_task(cfg.task, cfg.seed);
            auto res = run(cfg, *task);
            (tau_max == 20 ? tight : loose).push_back(res.final_loss);
        }
    }
    const double m20 = median(tight), m50 = median(loose);
    report(11, m50 >= m20,
           fmt("median final loss: tau_max=50 %.4f >= tau_max=20 %.4f, %.0fs", m50, m20,
               seconds_since(t0)));
}

// ---------------------------------------------------------------- 12
void criterion_determinism() {
    auto cfg = reference_config(Method::MaFull, 0.9, 3);
    cfg.horizon = 120;
    auto task = make_task(cfg.task, cfg.seed);
    const auto a = run(cfg, *task);
    const auto b = run(cfg, *task);
    const std::string ja = metrics_jsonl(a), jb = metrics_jsonl(b);
    report(12, !ja.empty() && ja == jb,
           fmt("metrics.jsonl byte-identical across reruns (%zu bytes)", ja.size()));
}

}  // namespace

int main() {
    criterion_sync_reduction();
    criterion_unroll();
    criterion_solver_oracle();
    criterion_full_rank_exactness();
    criterion_lightweight_consistency();
    criterion_delay_table();
    criteria_convergence_block();
    criterion_dp_suite();
    criterion_staleness_bound_direction();
    criterion_determinism();
    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
