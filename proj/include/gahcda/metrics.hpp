#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gahcda/core.hpp"

namespace gahcda {

/// Dice similarity in percent; two empty masks score 100.
double dsc(const SegMask& pred, const SegMask& truth);

/// Foreground pixels with at least one background 4-neighbour; pixels beyond
/// the border count as background. Returned as row-major flat indices.
std::vector<std::size_t> surface_pixels(const SegMask& mask);

/// Average symmetric surface distance in pixels. Throws
/// DataError("undefined surface distance") if either mask is empty.
double assd(const SegMask& pred, const SegMask& truth);

struct ItemMetrics {
  std::string id;
  double dsc = 0.0;
  std::optional<double> assd;  ///< absent when a mask was empty
  std::vector<std::string> flags;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  ///< population (divide by n)
  std::size_t count = 0;
};

Summary summarize(const std::vector<double>& values);

struct MetricReport {
  std::string label;
  std::vector<ItemMetrics> items;
  Summary dsc;
  Summary assd;
  nlohmann::json metadata = nlohmann::json::object();
};

ItemMetrics evaluate_item(const std::string& id, const SegMask& pred, const SegMask& truth);

/// Aggregates items; items without an ASSD are excluded from its summary.
MetricReport make_report(std::string label, std::vector<ItemMetrics> items, nlohmann::json metadata = {});

void write_report_csv(const MetricReport& report, const std::filesystem::path& path);
nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

inline constexpr const char* kAblationLabels[] = {"no-DA", "GAA-only", "GBL-only", "full"};

struct AblationRow {
  std::string label;
  Summary dsc;   ///< across runs (each run contributes its mean DSC)
  Summary assd;
  double delta_vs_baseline = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;  ///< fixed order: no-DA, GAA-only, GBL-only, full
};

/// Throws ValidationError("incomplete ablation set") if a label is missing.
AblationTable tabulate_ablation(const std::vector<MetricReport>& runs);

void write_ablation_csv(const AblationTable& table, const std::filesystem::path& path);
void write_ablation_chart(const AblationTable& table, const std::filesystem::path& svg_path);

struct OrderingCheck {
  bool passed = true;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
};

/// full >= max(GAA-only, GBL-only) >= min(GAA-only, GBL-only) >= no-DA on mean
/// DSC. Violations no larger than `tie_tolerance` are warnings.
OrderingCheck check_ablation_ordering(const AblationTable& table, double tie_tolerance = 0.5);

}  // namespace gahcda
