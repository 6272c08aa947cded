#pragma once
#include <set>
#include <stdexcept>
#include <string>

#include "auditcopilot/ledger.hpp"
#include "auditcopilot/stats.hpp"

namespace auditcopilot {

// The five engineered journal-entry-testing flags and the two-or-more-flags
// decision rule. Flag encodings:
//   promptly : 1 = 0-9 days, 2 = 10-29 days, 3 = >= 30 days  (2 and 3 trigger)
//   weekend  : 0 = Mon-Fri, 1 = Saturday, 2 = Sunday          (1 and 2 trigger)
//   nwh      : 1 = outside working hours
//   top_n    : 1 = among the top_n_count largest postings by max entry amount
//   high_cash: 1 = touches a cash account above the high-cash amount quantile
// A flag is triggered for a posting group if any member entry triggers it.
struct JetFlags {
    int promptly = 1;
    int weekend = 0;
    int nwh = 0;
    int top_n = 0;
    int high_cash = 0;
    int triggered_count = 0;
    int verdict = 0;
    // True when no entry carried a posting time, so nwh could not trigger.
    bool nwh_time_missing = false;

    static int count_triggered(int promptly, int weekend, int nwh, int top_n, int high_cash) {
        int n = 0;
        if (promptly >= 2) ++n;
        if (weekend >= 1) ++n;
        if (nwh == 1) ++n;
        if (top_n == 1) ++n;
        if (high_cash == 1) ++n;
        return n;
    }

    void recount() {
        triggered_count = count_triggered(promptly, weekend, nwh, top_n, high_cash);
        verdict = triggered_count >= 2 ? 1 : 0;
    }
};

struct JetConfig {
    int working_start_min = 8 * 60;   // 08:00, Mon-Fri
    int working_end_min = 18 * 60;    // 18:00 (exclusive)
    size_t top_n_count = 50;          // clamped to the dataset posting count
    double high_cash_percentile = 0.95;
    std::set<std::string> cash_account_ids = {"CASH-001"};

    void validate() const {
        if (working_start_min >= working_end_min)
            throw std::invalid_argument("working hours window is empty");
        if (high_cash_percentile <= 0.0 || high_cash_percentile >= 1.0)
            throw std::invalid_argument("high_cash_percentile must lie in (0, 1)");
        if (top_n_count == 0) throw std::invalid_argument("top_n_count must be positive");
    }
};

class MissingContextError : public std::runtime_error {
public:
    explicit MissingContextError(const std::string& what) : std::runtime_error(what) {}
};

int promptly_bucket(int payment_period_days);

// context must have been computed over the dataset containing the group.
JetFlags compute_flags(const PostingGroup& group, const JetConfig& config,
                       const DatasetStats& context);

// Relabels the dataset with JET verdicts (provenance JetPseudoLabel).
Dataset pseudo_label(const Dataset& dataset, const JetConfig& config);

}  // namespace auditcopilot
