#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "auditcopilot/iforest.hpp"
#include "auditcopilot/ledger.hpp"

namespace auditcopilot {

// Dataset-level context injected into prompts: global amount statistics,
// percentile support, per-user/per-account activity and the Isolation Forest
// summary. Statistics are computed over entries (transaction level), not
// posting groups. Quantiles use the nearest-rank convention: the q-quantile of
// n sorted values is the value at index ceil(q*n) - 1.
struct DatasetStats {
    size_t total_transactions = 0;

    int64_t amount_sum_cents = 0;      // exact numerator for the mean
    double amount_mean_cents = 0.0;
    int64_t amount_median_cents = 0;
    int64_t amount_q95_cents = 0;
    int64_t amount_q99_cents = 0;
    int64_t amount_min_cents = 0;
    int64_t amount_max_cents = 0;

    int payment_period_max = 0;  // days
    size_t total_users = 0;
    size_t total_accounts = 0;
    std::map<std::string, size_t> user_tx_counts;
    std::map<std::string, size_t> account_tx_counts;

    std::vector<int64_t> sorted_abs_amounts;  // cents, ascending

    bool if_present = false;
    size_t if_anomaly_count = 0;
    double if_anomaly_rate = 0.0;  // count / total_transactions

    // Posting groups ranked by max absolute entry amount, descending; ties
    // broken by the smallest entry_id among each group's maximal entries.
    // Rank 0 is the largest. Backs the JET top_n flag.
    std::map<std::string, size_t> posting_amount_rank;

    bool empty() const { return total_transactions == 0; }
    int64_t quantile_cents(double q) const;
};

DatasetStats compute_stats(const Dataset& dataset, const IForestResult* iforest = nullptr);

// Rank of |amount| among the dataset's absolute amounts using weak (<=)
// counting: floor(100 * count_below_or_equal / total). Result in [0, 100].
int percentile_of(int64_t amount_cents, const DatasetStats& stats);

// Stats block as JSON keyed by the prompt placeholder names.
nlohmann::json stats_to_json(const DatasetStats& stats);

}  // namespace auditcopilot
