#pragma once

// Dataset files (JSON, plus a long-format CSV importer for vectors) and
// report serialization.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repfrechet/baselines.hpp"
#include "repfrechet/simgen.hpp"

namespace repfrechet {

using Json = nlohmann::ordered_json;

const char* version_string() noexcept;

struct LoadOptions {
  /// Replace each Laplacian by (K + K^T)/2 before validation.
  bool symmetrize = false;
};

/// Decode a dataset document. Schema violations throw ParseError naming the
/// JSON path (e.g. "$.groups[1].subjects[0].observations[2]"); invariant
/// violations throw ValidationError naming group, subject and observation.
Dataset dataset_from_json(const Json& doc, const LoadOptions& options = {});
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

/// Long-format CSV with header "group,subject,repeat,<coords...>". Rows are
/// grouped by first appearance of group and subject and ordered by repeat.
Dataset load_vector_csv(const std::filesystem::path& path);

Json metric_object_to_json(const MetricObject& object);
/// `path` is only used in error messages.
MetricObject metric_object_from_json(const Json& node, ObjectKind kind, const std::string& path,
                                     Index grid_size = kDefaultGridSize, bool symmetrize = false);

Json dataset_to_json(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Context echoed into every report.
struct ReportContext {
  std::string command;
  std::uint64_t seed = 0;
  Json config = Json::object();
};

Json test_result_to_json(const TestResult& result, const ReportContext& context);
/// Inverse of test_result_to_json (the context is ignored).
TestResult test_result_from_json(const Json& doc);
/// Two-column "field,value" rendering of the headline numbers.
std::string test_result_csv(const TestResult& result);

Json study_to_json(const StudyReport& report);
/// Columns: scenario,param_name,param_value,replicates,rejections,rate,se,seed.
/// One row per method; the method name is appended to the scenario column
/// when the study ran more than one.
std::string study_csv_header();
std::string study_csv_rows(const StudyReport& report);

Json baseline_to_json(const BaselineReport& report, const ReportContext& context);
std::string baseline_csv(const BaselineReport& report);

/// printf("%.17g"); lossless for IEEE-754 doubles.
std::string format_double(double value);

/// Write text to `path`, or to stdout when the path is empty or "-".
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace repfrechet
