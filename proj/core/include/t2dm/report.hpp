#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "t2dm/ablation.hpp"
#include "t2dm/metrics.hpp"

namespace t2dm {

// "0.912 [0.887, 0.934]"
std::string format_ci(const BootstrapCi& ci, int digits = 3);

// Aligned text table for one evaluated split.
std::string render_metrics(const std::string& title, const MetricsReport& report);

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& file);

// Aligned text rendering of the ablation grid.
std::string render_ablation(const std::vector<AblationRow>& rows);

}  // namespace t2dm
