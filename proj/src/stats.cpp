#include "auditcopilot/stats.hpp"

#include <algorithm>

namespace auditcopilot {

int64_t DatasetStats::quantile_cents(double q) const {
    if (sorted_abs_amounts.empty()) throw EmptyDatasetError("quantile of empty stats");
    size_t n = sorted_abs_amounts.size();
    auto rank = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    return sorted_abs_amounts[rank - 1];
}

DatasetStats compute_stats(const Dataset& dataset, const IForestResult* iforest) {
    if (dataset.entries.empty()) throw EmptyDatasetError("compute_stats requires a non-empty dataset");

    DatasetStats s;
    s.total_transactions = dataset.entries.size();
    s.sorted_abs_amounts.reserve(dataset.entries.size());

    bool first = true;
    for (const auto& e : dataset.entries) {
        int64_t abs_amount = std::abs(e.amount_cents);
        s.amount_sum_cents += abs_amount;
        s.sorted_abs_amounts.push_back(abs_amount);
        int period = e.payment_period_days();
        if (first || period > s.payment_period_max) s.payment_period_max = period;
        first = false;
        ++s.user_tx_counts[e.user_id];
        ++s.account_tx_counts[e.account_id];
    }
    std::sort(s.sorted_abs_amounts.begin(), s.sorted_abs_amounts.end());

    s.amount_mean_cents = static_cast<double>(s.amount_sum_cents) /
                          static_cast<double>(s.total_transactions);
    s.amount_min_cents = s.sorted_abs_amounts.front();
    s.amount_max_cents = s.sorted_abs_amounts.back();
    s.amount_median_cents = s.quantile_cents(0.50);
    s.amount_q95_cents = s.quantile_cents(0.95);
    s.amount_q99_cents = s.quantile_cents(0.99);
    s.total_users = s.user_tx_counts.size();
    s.total_accounts = s.account_tx_counts.size();

    if (iforest) {
        s.if_present = true;
        s.if_anomaly_count = iforest->anomaly_count();
        s.if_anomaly_rate = static_cast<double>(s.if_anomaly_count) /
                            static_cast<double>(s.total_transactions);
    }

    // Posting ranking by max absolute amount, ties by smallest entry_id among
    // the maximal entries of each group.
    std::vector<std::pair<int64_t, std::string>> ranked;  // (amount, tie key)
    std::vector<const PostingGroup*> order;
    ranked.reserve(dataset.groups.size());
    order.reserve(dataset.groups.size());
    for (const auto& [pid, group] : dataset.groups) {
        int64_t max_amount = group.max_abs_amount_cents();
        std::string tie;
        for (const auto& e : group.entries)
            if (std::abs(e.amount_cents) == max_amount && (tie.empty() || e.entry_id < tie))
                tie = e.entry_id;
        ranked.emplace_back(max_amount, tie);
        order.push_back(&group);
    }
    std::vector<size_t> idx(ranked.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (ranked[a].first != ranked[b].first) return ranked[a].first > ranked[b].first;
        return ranked[a].second < ranked[b].second;
    });
    for (size_t rank = 0; rank < idx.size(); ++rank)
        s.posting_amount_rank[order[idx[rank]]->posting_id] = rank;

    return s;
}

int percentile_of(int64_t amount_cents, const DatasetStats& stats) {
    if (stats.empty()) throw EmptyDatasetError("percentile_of requires populated stats");
    int64_t magnitude = std::abs(amount_cents);
    auto leq = std::upper_bound(stats.sorted_abs_amounts.begin(), stats.sorted_abs_amounts.end(),
                                magnitude) -
               stats.sorted_abs_amounts.begin();
    return static_cast<int>((100 * static_cast<uint64_t>(leq)) / stats.sorted_abs_amounts.size());
}

nlohmann::json stats_to_json(const DatasetStats& stats) {
    nlohmann::json j;
    j["total_transactions"] = stats.total_transactions;
    j["amount_mean"] = stats.amount_mean_cents / 100.0;
    j["amount_median"] = stats.amount_median_cents / 100.0;
    j["amount_q95"] = stats.amount_q95_cents / 100.0;
    j["amount_q99"] = stats.amount_q99_cents / 100.0;
    j["amount_min"] = stats.amount_min_cents / 100.0;
    j["amount_max"] = stats.amount_max_cents / 100.0;
    j["payment_period_max"] = stats.payment_period_max;
    j["total_users"] = stats.total_users;
    j["total_accounts"] = stats.total_accounts;
    j["if_present"] = stats.if_present;
    j["total_if_anomalies"] = stats.if_anomaly_count;
    j["if_anomaly_rate"] = stats.if_anomaly_rate;
    j["user_tx_counts"] = stats.user_tx_counts;
    return j;
}

}  // namespace auditcopilot
