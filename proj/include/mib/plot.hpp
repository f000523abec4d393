#pragma once

#include <string>

namespace mib {

// Renders the evaluation-return-vs-env-step curve from a JSONL metrics log
// into a standalone SVG file.
void plot_metrics(const std::string& log_path, const std::string& out_path);

}  // namespace mib
