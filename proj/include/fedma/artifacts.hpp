#pragma once

#include "fedma/config.hpp"
#include "fedma/engine.hpp"

#include <json.hpp>

#include <string>

namespace fedma {

// Canonical serialization of run outputs, shared by every producer so
// fixed-seed reruns are byte-identical.
nlohmann::json metrics_row(const IterationMetrics& im);
std::string metrics_jsonl(const RunResult& res);

double best_loss(const RunResult& res);
nlohmann::json summarize(const SimConfig& cfg, const RunResult& res);

// metrics.jsonl + summary.json + staleness.csv under dir.
void write_run_outputs(const std::string& dir, const SimConfig& cfg, const RunResult& res);

}  // namespace fedma
