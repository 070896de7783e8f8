#include "fedma/artifacts.hpp"
#include "fedma/config.hpp"
#include "fedma/engine.hpp"
#include "fedma/momentum.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using fedma::summarize;
using fedma::write_run_outputs;

fedma::RunResult run_once(const fedma::SimConfig& cfg) {
    auto task = fedma::make_task(cfg.task, cfg.seed);
    return fedma::run(cfg, *task);
}

// first iteration whose loss reaches the threshold, or -1
Eigen::Index iterations_to(const fedma::RunResult& res, double threshold) {
    for (const auto& im : res.metrics)
        if (im.loss <= threshold) return im.iteration;
    return -1;
}

struct SweepRow {
    std::vector<std::pair<std::string, json>> assignment;
    std::uint64_t seed = 0;
    std::string method;
    std::string hash;
    double final_loss = 0.0;
    double final_ema_loss = 0.0;
    double best = 0.0;
    bool diverged = false;
    std::vector<std::pair<Eigen::Index, double>> loss_series;  // for threshold pass
};

int cmd_run(const std::string& config_path, const std::string& out_dir, std::int64_t seed_flag) {
    fedma::SimConfig cfg = fedma::load_config(config_path);
    fedma::apply_env_overrides(cfg);
    if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    const auto res = run_once(cfg);
    write_run_outputs(out_dir, cfg, res);
    std::cout << summarize(cfg, res).dump(2) << '\n';
    return res.diverged ? 2 : 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, unsigned jobs,
              bool force_large, double threshold) {
    const auto spec = fedma::load_sweep(config_path);
    const auto n = spec.point_count();
    if (n > 100000 && !force_large) {
        std::cerr << "sweep expands to " << n
                  << " runs; pass --force-large-sweep to proceed\n";
        return 3;
    }
    auto points = fedma::expand_sweep(spec);
    const fs::path root(out_dir);
    fs::create_directories(root / "runs");

    std::vector<SweepRow> rows(points.size());
    std::atomic<size_t> cursor{0};
    std::mutex io;
    auto worker = [&] {
        for (;;) {
            const size_t i = cursor.fetch_add(1);
            if (i >= points.size()) return;
            const auto& p = points[i];
            SweepRow row;
            row.assignment = p.assignment;
            row.seed = p.seed;
            row.method = fedma::method_name(p.config.method);
            row.hash = p.content_hash;

            const fs::path run_dir = root / "runs" / p.content_hash;
            const fs::path summary_path = run_dir / "summary.json";
            json summary;
            bool reused = false;
            if (fs::exists(summary_path)) {
                std::ifstream in(summary_path);
                try {
                    in >> summary;
                    reused = true;  // content hash names the dir, so this is our run
                } catch (...) {
                    reused = false;
                }
            }
            fedma::RunResult res;
            if (!reused) {
                res = run_once(p.config);
                write_run_outputs(run_dir.string(), p.config, res);
                summary = summarize(p.config, res);
            }
            row.final_loss = summary.at("final_loss").get<double>();
            row.final_ema_loss = summary.at("final_ema_loss").get<double>();
            row.best = summary.at("best_loss").get<double>();
            row.diverged = summary.at("diverged").get<bool>();
            {
                // loss series for the threshold column, from disk when reused
                std::ifstream in(run_dir / "metrics.jsonl");
                std::string line;
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    const auto j = json::parse(line);
                    row.loss_series.emplace_back(j.at("iteration").get<Eigen::Index>(),
                                                 j.at("loss").get<double>());
                }
            }
            {
                std::lock_guard<std::mutex> lock(io);
                rows[i] = std::move(row);
                std::cerr << "[" << (i + 1) << "/" << points.size() << "] "
                          << (reused ? "reused " : "ran ") << p.content_hash << '\n';
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned nthreads = std::max(1u, jobs);
    for (unsigned i = 1; i < nthreads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    // default threshold: 5% above the best loss seen anywhere in the sweep
    if (!(threshold > 0.0)) {
        double global_best = std::numeric_limits<double>::infinity();
        for (const auto& r : rows)
            if (!r.diverged) global_best = std::min(global_best, r.best);
        threshold = 1.05 * global_best;
    }

    std::ofstream csv(root / "sweep.csv");
    csv.precision(17);
    std::vector<std::string> axis_keys;
    for (const auto& axis : spec.axes) axis_keys.push_back(axis.key);
    for (const auto& k : axis_keys) csv << k << ',';
    csv << "seed,method,run,final_loss,final_ema_loss,best_loss,iterations_to_threshold,diverged\n";
    for (const auto& r : rows) {
        for (const auto& [k, v] : r.assignment) {
            (void)k;
            csv << (v.is_string() ? v.get<std::string>() : v.dump()) << ',';
        }
        Eigen::Index iters = -1;
        for (const auto& [it, loss] : r.loss_series)
            if (loss <= threshold) {
                iters = it;
                break;
            }
        csv << r.seed << ',' << r.method << ',' << r.hash << ',' << r.final_loss << ','
            << r.final_ema_loss << ',' << r.best << ',' << iters << ',' << (r.diverged ? 1 : 0)
            << '\n';
    }
    std::cout << "wrote " << (root / "sweep.csv").string() << " (" << rows.size() << " runs, "
              << "threshold " << threshold << ")\n";
    return 0;
}

int cmd_diagnose(const std::string& config_path, const std::string& out_dir,
                 const std::string& matrix_path) {
    fedma::SimConfig cfg = fedma::load_config(config_path);
    fedma::apply_env_overrides(cfg);
    fedma::StalenessMatrix w;
    if (!matrix_path.empty()) {
        std::ifstream in(matrix_path);
        if (!in) throw fedma::contract_error("cannot open matrix: " + matrix_path);
        w = fedma::StalenessMatrix::read_csv(in, cfg.horizon, cfg.downscale_p);
    } else {
        w = fedma::simulate_staleness(cfg);
    }
    fedma::MomentumMatrix m(cfg.beta, cfg.horizon);
    const auto diag = fedma::compute_diagnostics(w, m, cfg.horizon, cfg.cohort);

    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "diagnostics.jsonl");
    for (size_t i = 0; i < diag.residual_sq.size(); ++i) {
        out << json{{"iteration", static_cast<Eigen::Index>(i + 1)},
                    {"nullity", diag.nullity[i]},
                    {"one_minus_alpha", diag.one_minus_alpha[i]},
                    {"ls_residual_sq", diag.residual_sq[i]},
                    {"cumulative_rel_ls_error", diag.cumulative_rel[i]},
                    {"a_frob_sq", diag.a_frob_sq[i]},
                    {"log_ratio", diag.log_ratio[i]}}
                   .dump()
            << '\n';
    }
    std::cout << "wrote " << (fs::path(out_dir) / "diagnostics.jsonl").string() << '\n';
    return 0;
}

int cmd_report(const std::string& sweep_dir, const std::string& baseline) {
    std::ifstream csv(fs::path(sweep_dir) / "sweep.csv");
    if (!csv) throw fedma::contract_error("no sweep.csv under " + sweep_dir);
    std::string header;
    std::getline(csv, header);
    std::vector<std::string> cols;
    {
        std::istringstream hs(header);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    auto col = [&](const std::string& name) {
        for (size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return static_cast<long>(i);
        return -1L;
    };
    const long method_col = col("method");
    const long iters_col = col("iterations_to_threshold");
    const long loss_col = col("final_loss");
    fedma::require(method_col >= 0 && iters_col >= 0 && loss_col >= 0,
                   "sweep.csv is missing expected columns");

    std::map<std::string, std::vector<double>> iters_by_method;
    std::map<std::string, std::vector<double>> loss_by_method;
    std::string line;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        const std::string& method = cells[static_cast<size_t>(method_col)];
        const double iters = std::stod(cells[static_cast<size_t>(iters_col)]);
        if (iters > 0) iters_by_method[method].push_back(iters);
        loss_by_method[method].push_back(std::stod(cells[static_cast<size_t>(loss_col)]));
    }
    auto median = [](std::vector<double> v) {
        if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
        std::sort(v.begin(), v.end());
        const size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };

    json report;
    const double base_iters = median(iters_by_method[baseline]);
    for (const auto& [method, iters] : iters_by_method) {
        json entry;
        entry["median_iterations_to_threshold"] = median(iters);
        entry["median_final_loss"] = median(loss_by_method[method]);
        entry["reached_threshold"] = iters.size();
        if (base_iters > 0 && method != baseline)
            entry["speedup_vs_" + baseline] = base_iters / median(iters);
        report[method] = entry;
    }
    for (const auto& [method, losses] : loss_by_method)
        if (!iters_by_method.count(method))
            report[method] = {{"median_final_loss", median(losses)},
                              {"reached_threshold", 0}};

    std::ofstream out(fs::path(sweep_dir) / "report.json");
    out << report.dump(2) << '\n';
    std::cout << report.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"buffered asynchronous federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", matrix_path, sweep_dir, baseline = "fedbuff-momentum";
    if (const char* env_out = std::getenv("FEDMA_OUT")) out_dir = env_out;
    std::int64_t seed_flag = -1;
    unsigned jobs = 1;
    bool force_large = false;
    double threshold = 0.0;

    auto* run = app.add_subcommand("run", "run one simulation");
    run->add_option("--config", config_path, "config JSON")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed_flag, "override the config seed");

    auto* sweep = app.add_subcommand("sweep", "run a cartesian parameter sweep");
    sweep->add_option("--config", config_path, "sweep spec JSON")->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--jobs", jobs, "parallel workers");
    sweep->add_option("--threshold", threshold, "loss threshold for the iterations column");
    sweep->add_flag("--force-large-sweep", force_large, "allow more than 100000 runs");

    auto* diagnose = app.add_subcommand("diagnose", "momentum-approximation diagnostics");
    diagnose->add_option("--config", config_path, "config JSON")->required();
    diagnose->add_option("--out", out_dir, "output directory");
    diagnose->add_option("--matrix", matrix_path, "staleness matrix CSV (else simulated)");

    auto* report = app.add_subcommand("report", "aggregate a finished sweep");
    report->add_option("--sweep", sweep_dir, "sweep output directory")->required();
    report->add_option("--baseline", baseline, "method used as the speedup denominator");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, seed_flag);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir, jobs, force_large, threshold);
        if (diagnose->parsed()) return cmd_diagnose(config_path, out_dir, matrix_path);
        if (report->parsed()) return cmd_report(sweep_dir, baseline);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
