#pragma once

#include "mixtree/cross_estimation.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>

namespace mixtree {

// Full report as versioned JSON. Keys are emitted in sorted order, so the
// serialization is byte-stable for a given report.
nlohmann::json report_json(const CvReport& report, const nlohmann::json& config_echo);

// Analysis-level table: one row per group and estimator (pooled TMLE / IVM).
std::string pooled_csv(const CvReport& report);

// Fold-level table: one row per fold and region.
std::string kfold_csv(const CvReport& report);

std::string direction_name(Direction d);
Direction direction_from_name(const std::string& name);

}  // namespace mixtree
