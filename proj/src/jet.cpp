#include "auditcopilot/jet.hpp"

#include <algorithm>

namespace auditcopilot {

int promptly_bucket(int payment_period_days) {
    if (payment_period_days < 10) return 1;
    if (payment_period_days < 30) return 2;
    return 3;
}

JetFlags compute_flags(const PostingGroup& group, const JetConfig& config,
                       const DatasetStats& context) {
    config.validate();
    if (context.empty())
        throw MissingContextError("top_n/high_cash require dataset statistics");
    if (group.entries.empty())
        throw std::invalid_argument("compute_flags on empty posting group");

    JetFlags flags;
    flags.promptly = promptly_bucket(group.max_payment_period_days());

    bool any_time = false;
    int64_t high_cash_cutoff = context.quantile_cents(config.high_cash_percentile);
    for (const auto& e : group.entries) {
        unsigned wd = e.posting_date.weekday_iso();
        if (wd == 7) flags.weekend = 2;
        else if (wd == 6 && flags.weekend < 1) flags.weekend = 1;

        if (e.posting_time) {
            any_time = true;
            int t = *e.posting_time;
            if (t < config.working_start_min || t >= config.working_end_min) flags.nwh = 1;
        }

        if (config.cash_account_ids.count(e.account_id) &&
            std::abs(e.amount_cents) > high_cash_cutoff)
            flags.high_cash = 1;
    }
    flags.nwh_time_missing = !any_time;

    auto rank_it = context.posting_amount_rank.find(group.posting_id);
    if (rank_it == context.posting_amount_rank.end())
        throw MissingContextError("posting '" + group.posting_id +
                                  "' is not in the statistics context");
    size_t cutoff = std::min(config.top_n_count, context.posting_amount_rank.size());
    flags.top_n = rank_it->second < cutoff ? 1 : 0;

    flags.recount();
    return flags;
}

Dataset pseudo_label(const Dataset& dataset, const JetConfig& config) {
    Dataset out = dataset;
    out.labels.clear();
    if (dataset.entries.empty()) {
        out.label_provenance = LabelProvenance::JetPseudoLabel;
        return out;
    }
    DatasetStats stats = compute_stats(dataset);
    for (const auto& [pid, group] : dataset.groups)
        out.labels[pid] = compute_flags(group, config, stats).verdict;
    out.label_provenance = LabelProvenance::JetPseudoLabel;
    return out;
}

}  // namespace auditcopilot
