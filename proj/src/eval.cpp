#include "auditcopilot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "auditcopilot/rng.hpp"

namespace auditcopilot {
namespace {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool division_by_zero = false;
};

ClassMetrics class_metrics(uint64_t tp, uint64_t fp, uint64_t fn) {
    ClassMetrics m;
    if (tp + fp == 0) m.division_by_zero = true;
    else m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn == 0) m.division_by_zero = true;
    else m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0.0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", round2(v));
    return buf;
}

nlohmann::json metric_set_to_json(const MetricSet& m) {
    return {{"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"averaging", averaging_name(m.averaging)},
            {"division_by_zero", m.division_by_zero}};
}

}  // namespace

const char* averaging_name(Averaging a) {
    return a == Averaging::Macro ? "macro" : "positive";
}

double round2(double value) {
    return std::floor(value * 100.0 + 0.5) / 100.0;
}

ConfusionCounts confusion(const std::map<std::string, int>& predictions,
                          const std::map<std::string, int>& labels, bool strict) {
    ConfusionCounts c;
    for (const auto& [id, pred] : predictions) {
        auto it = labels.find(id);
        if (it == labels.end()) {
            if (strict) throw MissingLabelError(id);
            continue;
        }
        int label = it->second;
        if (label == 1 && pred == 1) ++c.tp;
        else if (label == 0 && pred == 1) ++c.fp;
        else if (label == 1 && pred == 0) ++c.fn;
        else ++c.tn;
    }
    return c;
}

MetricSet metrics(const ConfusionCounts& counts, Averaging averaging) {
    MetricSet out;
    out.averaging = averaging;
    ClassMetrics pos = class_metrics(counts.tp, counts.fp, counts.fn);
    if (averaging == Averaging::PositiveClass) {
        out.precision = pos.precision;
        out.recall = pos.recall;
        out.f1 = pos.f1;
        out.division_by_zero = pos.division_by_zero;
        return out;
    }
    // Macro: unweighted mean over the anomaly class and the normal class
    // (whose confusion cells swap roles: tp<->tn, fp<->fn).
    ClassMetrics neg = class_metrics(counts.tn, counts.fn, counts.fp);
    out.precision = (pos.precision + neg.precision) / 2.0;
    out.recall = (pos.recall + neg.recall) / 2.0;
    out.f1 = (pos.f1 + neg.f1) / 2.0;
    out.division_by_zero = pos.division_by_zero || neg.division_by_zero;
    return out;
}

std::string label_fingerprint(const std::map<std::string, int>& labels) {
    std::string material;
    for (const auto& [id, label] : labels) {
        material += id;
        material.push_back('=');
        material += std::to_string(label);
        material.push_back(';');
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(material.data(), material.size())));
    return buf;
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["method"] = report.method_name;
    j["variant"] = report.variant;
    j["counts"] = {{"tp", report.counts.tp},
                   {"fp", report.counts.fp},
                   {"fn", report.counts.fn},
                   {"tn", report.counts.tn}};
    j["metrics"] = {{"macro", metric_set_to_json(report.metrics_macro)},
                    {"positive", metric_set_to_json(report.metrics_positive)}};
    j["metrics_rounded"] = {
        {"macro",
         {{"precision", round2(report.metrics_macro.precision)},
          {"recall", round2(report.metrics_macro.recall)},
          {"f1", round2(report.metrics_macro.f1)}}},
        {"positive",
         {{"precision", round2(report.metrics_positive.precision)},
          {"recall", round2(report.metrics_positive.recall)},
          {"f1", round2(report.metrics_positive.f1)}}}};
    j["excluded"] = report.excluded;
    j["label_fingerprint"] = report.label_fingerprint;
    if (!report.run_metadata.is_null()) j["run_metadata"] = report.run_metadata;
    return j;
}

std::string report_to_text(const EvalReport& report) {
    std::ostringstream out;
    out << "Method: " << report.method_name;
    if (!report.variant.empty()) out << "  (variant: " << report.variant << ")";
    out << "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %-9s %-7s %-5s %6s %6s %6s %6s\n", "averaging",
                  "precision", "recall", "f1", "TP", "FP", "FN", "TN");
    out << line;
    auto row = [&](const MetricSet& m) {
        std::snprintf(line, sizeof(line), "%-10s %-9s %-7s %-5s %6llu %6llu %6llu %6llu\n",
                      averaging_name(m.averaging), fmt2(m.precision).c_str(),
                      fmt2(m.recall).c_str(), fmt2(m.f1).c_str(),
                      static_cast<unsigned long long>(report.counts.tp),
                      static_cast<unsigned long long>(report.counts.fp),
                      static_cast<unsigned long long>(report.counts.fn),
                      static_cast<unsigned long long>(report.counts.tn));
        out << line;
    };
    row(report.metrics_macro);
    row(report.metrics_positive);
    if (report.excluded > 0)
        out << "excluded verdicts (failed parses): " << report.excluded << "\n";
    return out.str();
}

Comparison compare(const std::vector<EvalReport>& reports, Averaging sort_by,
                   const std::string& baseline_method) {
    if (reports.size() < 2)
        throw std::invalid_argument("compare requires at least two reports");
    for (size_t i = 1; i < reports.size(); ++i)
        if (reports[i].label_fingerprint != reports[0].label_fingerprint)
            throw LabelSetMismatchError("report '" + reports[i].method_name +
                                        "' was evaluated on a different label set than '" +
                                        reports[0].method_name + "'");

    const EvalReport* baseline = &reports.front();
    if (!baseline_method.empty()) {
        auto it = std::find_if(reports.begin(), reports.end(), [&](const EvalReport& r) {
            return r.method_name == baseline_method;
        });
        if (it == reports.end())
            throw std::invalid_argument("baseline '" + baseline_method + "' not among reports");
        baseline = &*it;
    }

    auto pick = [&](const EvalReport& r) -> const MetricSet& {
        return sort_by == Averaging::Macro ? r.metrics_macro : r.metrics_positive;
    };

    std::vector<const EvalReport*> order;
    for (const auto& r : reports) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [&](const EvalReport* a, const EvalReport* b) {
        return pick(*a).f1 > pick(*b).f1;
    });

    Comparison cmp;
    std::ostringstream out;
    char line[200];
    std::snprintf(line, sizeof(line), "%-24s %-16s %-9s %-7s %-5s %6s %6s %6s %6s %9s\n", "method",
                  "variant", "precision", "recall", "f1", "TP", "FP", "FN", "TN", "dF1");
    out << line;
    nlohmann::json rows = nlohmann::json::array();
    for (const EvalReport* r : order) {
        const MetricSet& m = pick(*r);
        double delta_f1 = m.f1 - pick(*baseline).f1;
        char delta[24];
        std::snprintf(delta, sizeof(delta), "%+.2f", round2(delta_f1));
        std::snprintf(line, sizeof(line), "%-24s %-16s %-9s %-7s %-5s %6llu %6llu %6llu %6llu %9s\n",
                      r->method_name.c_str(), r->variant.c_str(), fmt2(m.precision).c_str(),
                      fmt2(m.recall).c_str(), fmt2(m.f1).c_str(),
                      static_cast<unsigned long long>(r->counts.tp),
                      static_cast<unsigned long long>(r->counts.fp),
                      static_cast<unsigned long long>(r->counts.fn),
                      static_cast<unsigned long long>(r->counts.tn), delta);
        out << line;

        nlohmann::json row = report_to_json(*r);
        row["delta_f1_vs_baseline"] = delta_f1;
        rows.push_back(row);
    }
    cmp.text = out.str();
    cmp.machine = {{"averaging", averaging_name(sort_by)},
                   {"baseline", baseline->method_name},
                   {"rows", rows}};
    return cmp;
}

}  // namespace auditcopilot
