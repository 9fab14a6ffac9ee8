#pragma once

#include "orch/reward.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orch::metrics {

enum class MetricKind { EmF1, Cosine };

const char* to_string(MetricKind kind);
MetricKind metric_kind_from_string(std::string_view name);  // throws on unknown names

/// 1 iff the standardized prediction equals some standardized reference.
int exact_match(std::string_view pred, const reward::ReferenceSet& refs);

/// Best token-level F1 over the references; same machinery as the reward.
double token_f1(std::string_view pred, const reward::ReferenceSet& refs);

/// Maps a text to a vector; all texts scored together must agree on the
/// dimension. Lets an embedding backend replace the term-frequency default.
using Vectorizer = std::function<std::vector<double>(std::string_view)>;

/// Cosine over term-frequency bags of standardized tokens. Both sides empty
/// after standardization -> 1.0; exactly one side empty -> 0.0.
double cosine_similarity(std::string_view pred, std::string_view ref);

/// Cosine under an external vectorizer; throws std::invalid_argument on a
/// dimension mismatch.
double cosine_similarity(std::string_view pred, std::string_view ref,
                         const Vectorizer& vectorizer);

/// Mean of per-record fractions scaled to percent, rounded half-up to two
/// decimals (table formatting convention).
double to_percent(double mean_fraction);

/// Two-decimal rendering of a percent value.
std::string format_percent(double percent);

struct DatasetReportRow {
    std::string dataset;
    std::size_t n = 0;
    std::optional<double> em_percent;      // blank when no em_f1 records
    std::optional<double> f1_percent;      // blank when no em_f1 records
    std::optional<double> cosine_percent;  // blank when no cosine records
};

/// Report CSV with header: dataset,n,em_percent,f1_percent,cosine_percent.
std::string render_report_csv(const std::vector<DatasetReportRow>& rows);

}  // namespace orch::metrics
