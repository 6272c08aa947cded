#pragma once
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace auditcopilot {

// Confusion-count bookkeeping and metric computation. Two averaging
// conventions are supported and every report carries both: macro-averaging
// over the anomaly and normal classes, and positive-class (anomaly-only)
// metrics. Division-by-zero cases yield 0 and set a flag.

struct ConfusionCounts {
    uint64_t tp = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;
    uint64_t tn = 0;

    uint64_t total() const { return tp + fp + fn + tn; }
};

enum class Averaging { PositiveClass, Macro };

const char* averaging_name(Averaging a);

struct MetricSet {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    Averaging averaging = Averaging::PositiveClass;
    bool division_by_zero = false;
};

struct EvalReport {
    std::string method_name;
    std::string variant;  // prompt variant name or baseline tag
    ConfusionCounts counts;
    MetricSet metrics_macro;
    MetricSet metrics_positive;
    size_t excluded = 0;  // verdicts dropped for failed parses
    nlohmann::json run_metadata;
    std::string label_fingerprint;
};

class MissingLabelError : public std::runtime_error {
public:
    explicit MissingLabelError(const std::string& posting_id)
        : std::runtime_error("no label for prediction key '" + posting_id + "'"),
          posting_id(posting_id) {}
    std::string posting_id;
};

class LabelSetMismatchError : public std::runtime_error {
public:
    explicit LabelSetMismatchError(const std::string& what) : std::runtime_error(what) {}
};

// Counts over the intersection of keys; anomaly = 1 is the positive class.
// strict requires a label for every prediction key.
ConfusionCounts confusion(const std::map<std::string, int>& predictions,
                          const std::map<std::string, int>& labels, bool strict = true);

MetricSet metrics(const ConfusionCounts& counts, Averaging averaging);

// Order-independent fingerprint of a label set, used to detect comparisons
// across different evaluation populations.
std::string label_fingerprint(const std::map<std::string, int>& labels);

// Two decimals, half-up; display rounding only, raw values stay in JSON.
double round2(double value);

struct Comparison {
    std::string text;        // aligned table
    nlohmann::json machine;  // same content, machine-readable
};

// Side-by-side comparison sorted by f1 of the chosen averaging (descending);
// deltas are relative to the named baseline (default: first report).
Comparison compare(const std::vector<EvalReport>& reports, Averaging sort_by,
                   const std::string& baseline_method = "");

nlohmann::json report_to_json(const EvalReport& report);
std::string report_to_text(const EvalReport& report);

}  // namespace auditcopilot
