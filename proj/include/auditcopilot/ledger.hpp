#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "auditcopilot/caldate.hpp"
#include "auditcopilot/money.hpp"

namespace auditcopilot {

// Domain types for double-entry journal data plus the file ingestion/emission
// shared by the rest of the pipeline. Types are immutable by convention after
// construction and safe to share across threads.

enum class CdFlag { Debit, Credit };

inline char cd_flag_char(CdFlag f) { return f == CdFlag::Debit ? 'D' : 'C'; }

enum class LabelProvenance { GroundTruth, JetPseudoLabel, None };

// One ledger line. Amount is a non-negative magnitude; direction lives in
// cd_flag. posting_time and tax_rate are optional in input data.
struct JournalEntry {
    std::string entry_id;
    std::string posting_id;
    CalDate posting_date;
    std::optional<int> posting_time;  // minutes since midnight
    CalDate transaction_date;
    CdFlag cd_flag = CdFlag::Debit;
    int64_t amount_cents = 0;
    std::string currency = "EUR";
    std::optional<double> tax_rate;  // percent in [0, 100]
    std::string account_id;
    std::string user_id;
    std::string memo;

    // posting_date - transaction_date in days; negative values are data, not errors.
    int payment_period_days() const {
        return posting_date.serial() - transaction_date.serial();
    }
};

// All lines sharing one posting ID. Totals are recomputed from the entries,
// never trusted from the file.
struct PostingGroup {
    std::string posting_id;
    std::vector<JournalEntry> entries;  // input order
    int64_t debit_total_cents = 0;
    int64_t credit_total_cents = 0;

    bool balanced() const { return debit_total_cents == credit_total_cents; }

    int64_t max_abs_amount_cents() const {
        int64_t m = 0;
        for (const auto& e : entries)
            if (e.amount_cents > m) m = e.amount_cents;
        return m;
    }

    int max_payment_period_days() const {
        int m = entries.empty() ? 0 : entries.front().payment_period_days();
        for (const auto& e : entries) m = std::max(m, e.payment_period_days());
        return m;
    }
};

struct Dataset {
    std::vector<JournalEntry> entries;
    std::map<std::string, PostingGroup> groups;  // derived; partitions entries exactly
    std::map<std::string, int> labels;           // posting_id -> {0,1}; empty = unlabeled
    LabelProvenance label_provenance = LabelProvenance::None;

    void rebuild_groups();
    size_t posting_count() const { return groups.size(); }
    bool labeled() const { return !labels.empty(); }
};

enum class LedgerFormat { Csv, Jsonl };

struct LoadOptions {
    bool strict = true;  // unknown columns are an error in strict mode
};

class MalformedRowError : public std::runtime_error {
public:
    MalformedRowError(size_t line, const std::string& reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line(line) {}
    size_t line;
};

class DuplicateEntryIdError : public std::runtime_error {
public:
    DuplicateEntryIdError(size_t line, const std::string& entry_id)
        : std::runtime_error("line " + std::to_string(line) + ": duplicate entry_id '" + entry_id + "'"),
          line(line) {}
    size_t line;
};

class UnknownColumnError : public std::runtime_error {
public:
    explicit UnknownColumnError(const std::string& column)
        : std::runtime_error("unknown column '" + column + "'") {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class EmptyDatasetError : public std::runtime_error {
public:
    explicit EmptyDatasetError(const std::string& what) : std::runtime_error(what) {}
};

// CSV schema (header, RFC-4180 quoting):
//   entry_id,posting_id,posting_date,posting_time,transaction_date,cd_flag,
//   amount,currency,tax_rate,account_id,user_id,memo
// JSONL carries the same field names, one object per line.
Dataset load_dataset(const std::string& path, LedgerFormat format, const LoadOptions& opts = {});
void save_dataset(const Dataset& dataset, const std::string& path, LedgerFormat format);

std::map<std::string, PostingGroup> group_by_posting(const std::vector<JournalEntry>& entries);

// Deterministic byte output for identical input: keys are emitted in sorted
// order and the file always ends with a newline.
void write_report(const nlohmann::json& report, const std::string& path);

// Labels sidecar: CSV posting_id,label,archetypes (archetypes semicolon-joined).
struct LabelRow {
    std::string posting_id;
    int label = 0;
    std::vector<std::string> archetypes;
};

void save_labels(const std::vector<LabelRow>& rows, const std::string& path);
std::vector<LabelRow> load_labels(const std::string& path);

// Minimal JSON string escaping for the hand-rolled deterministic writers.
std::string json_escape(std::string_view text);

}  // namespace auditcopilot
