#include "fedma/artifacts.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace fedma {

using nlohmann::json;

json metrics_row(const IterationMetrics& im) {
    return json{{"iteration", im.iteration},
                {"loss", im.loss},
                {"dist_to_opt", im.dist_to_opt},
                {"r_norm", im.aggregate_norm},
                {"buffer_wait", im.buffer_wait},
                {"drops", im.drops},
                {"accepted", im.accepted},
                {"ls_residual_sq", im.ls_residual_sq},
                {"a_norm_sq", im.a_norm_sq}};
}

std::string metrics_jsonl(const RunResult& res) {
    std::ostringstream out;
    for (const auto& im : res.metrics) out << metrics_row(im).dump() << '\n';
    return out.str();
}

double best_loss(const RunResult& res) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& im : res.metrics) best = std::min(best, im.loss);
    return best;
}

json summarize(const SimConfig& cfg, const RunResult& res) {
    return json{{"config", config_to_json(cfg)},
                {"method", method_name(cfg.method)},
                {"seed", cfg.seed},
                {"final_loss", res.final_loss},
                {"final_ema_loss", res.final_ema_loss},
                {"best_loss", best_loss(res)},
                {"diverged", res.diverged},
                {"completed_iterations", res.completed_iterations},
                {"a_frob_sq", res.a_frob_sq},
                {"cumulative_rel_ls_error", res.cumulative_rel_ls_error()},
                {"accounting",
                 {{"enqueued", res.total_enqueued},
                  {"accepted", res.total_accepted},
                  {"dropped", res.total_dropped},
                  {"pending_at_end", res.pending_at_end}}}};
}

void write_run_outputs(const std::string& dir, const SimConfig& cfg, const RunResult& res) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "metrics.jsonl");
        out << metrics_jsonl(res);
    }
    {
        std::ofstream out(fs::path(dir) / "summary.json");
        out << summarize(cfg, res).dump(2) << '\n';
    }
    {
        std::ofstream out(fs::path(dir) / "staleness.csv");
        res.staleness.write_csv(out);
    }
}

}  // namespace fedma
