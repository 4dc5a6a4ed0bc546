#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "relsal/harness/evaluate.hpp"
#include "relsal/net/train.hpp"
#include "relsal/subitizing.hpp"

namespace relsal::harness {

enum class ReportFormat { kCsv, kJson };

ReportFormat report_format_from_name(std::string_view name);

/// Shortest round-trip decimal; "nan" for NaN.
std::string format_number(double v);

/// Full-precision JSON document. Worker count is not echoed so reports do not depend on it.
void write_report_json(std::ostream& out, const RunReport& report);

/// Long-format CSV: scope,subject,slice,metric,value.
void write_report_csv(std::ostream& out, const RunReport& report);

void write_report(const std::filesystem::path& path, const RunReport& report,
                  ReportFormat format);

/// Console summary with four decimals.
void print_summary(std::ostream& out, const RunReport& report);

/// CSV with header image_id,<label>... and one row per image.
std::vector<SubitizingPrediction> load_subitizing_predictions(const std::filesystem::path& path);
void write_subitizing_predictions(const std::filesystem::path& path,
                                  const std::vector<SubitizingPrediction>& predictions,
                                  const std::vector<std::string>& labels);

/// CSV: epoch,master,aux_1..aux_S,total.
void write_training_log(std::ostream& out, const net::TrainLog& log);

}  // namespace relsal::harness
