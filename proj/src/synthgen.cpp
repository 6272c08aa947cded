#include "auditcopilot/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "auditcopilot/rng.hpp"
#include "auditcopilot/stats.hpp"

namespace auditcopilot {
namespace {

constexpr Archetype kAllArchetypes[] = {Archetype::LatePayment, Archetype::WeekendPosting,
                                        Archetype::OffHoursPosting, Archetype::TopAmount,
                                        Archetype::HighCash};

const char* kMemoPool[] = {
    "Invoice 1042",        "Office supplies",   "Travel reimbursement", "Utility payment",
    "Consulting fee",      "Monthly rent",      "Hardware purchase",    "Subscription renewal",
    "Maintenance service", "Freight charge",    "Insurance premium",    "Training course",
};

struct PostingDraft {
    CalDate posting_date;
    int posting_time = 0;       // minutes
    int payment_days = 0;
    int64_t total_cents = 100;
    size_t user = 0;
    bool cash_leg = false;      // route one leg through the cash account
    bool debit_is_single = true;
    size_t split_parts = 1;     // lines on the split side
    std::vector<size_t> accounts;   // split_parts + 1 account indices
    std::vector<double> tax_rates;  // per line
    std::vector<size_t> memos;
};

int64_t lognormal_cents(SplitMix64& rng, double mu, double sigma) {
    double units = std::exp(mu + sigma * gaussian(rng));
    auto cents = static_cast<int64_t>(std::llround(units * 100.0));
    return std::max<int64_t>(cents, 1);
}

// Split total into `parts` positive cent amounts (distinct random cuts).
std::vector<int64_t> split_amount(SplitMix64& rng, int64_t total, size_t parts) {
    if (parts <= 1 || total < static_cast<int64_t>(parts)) return {total};
    std::set<int64_t> cuts;
    while (cuts.size() < parts - 1)
        cuts.insert(1 + static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(total - 1))));
    std::vector<int64_t> out;
    int64_t prev = 0;
    for (int64_t c : cuts) {
        out.push_back(c - prev);
        prev = c;
    }
    out.push_back(total - prev);
    return out;
}

std::string posting_label(size_t index, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "P%0*zu", width, index + 1);
    return buf;
}

Archetype sample_archetype(SplitMix64& rng, std::map<Archetype, double>& weights) {
    double total = 0.0;
    for (const auto& [a, w] : weights) total += w;
    double u = uniform_unit(rng) * total;
    for (const auto& [a, w] : weights) {
        u -= w;
        if (u < 0.0) return a;
    }
    return std::prev(weights.end())->first;
}

}  // namespace

const char* archetype_name(Archetype a) {
    switch (a) {
        case Archetype::LatePayment: return "late_payment";
        case Archetype::WeekendPosting: return "weekend_posting";
        case Archetype::OffHoursPosting: return "off_hours_posting";
        case Archetype::TopAmount: return "top_amount";
        case Archetype::HighCash: return "high_cash";
    }
    return "unknown";
}

Archetype archetype_from_name(const std::string& name) {
    for (Archetype a : kAllArchetypes)
        if (name == archetype_name(a)) return a;
    throw std::invalid_argument("unknown archetype '" + name + "'");
}

JetConfig matching_jet_config(const GenConfig& config) {
    JetConfig jet;
    jet.working_start_min = config.working_start_min;
    jet.working_end_min = config.working_end_min;
    jet.cash_account_ids = {kCashAccountId};
    return jet;
}

LabeledDataset generate(const GenConfig& config) {
    if (config.n_postings == 0) throw InfeasibleConfigError("n_postings must be positive");
    if (config.n_users == 0) throw InfeasibleConfigError("n_users must be positive");
    if (config.n_accounts == 0) throw InfeasibleConfigError("n_accounts must be positive");
    if (!(config.anomaly_rate >= 0.0 && config.anomaly_rate < 1.0))
        throw InfeasibleConfigError("anomaly_rate must lie in [0, 1)");
    if (!config.date_start.valid() || !config.date_end.valid() ||
        config.date_end < config.date_start)
        throw InfeasibleConfigError("invalid date range");
    if (config.working_start_min >= config.working_end_min)
        throw InfeasibleConfigError("working_hours window is empty");
    if (config.amount_log_sigma < 0.0) throw InfeasibleConfigError("amount sigma must be >= 0");

    const auto n_anom = static_cast<size_t>(
        std::llround(config.anomaly_rate * static_cast<double>(config.n_postings)));

    // Weekday / weekend date pools over the configured range.
    std::vector<CalDate> weekdays, weekends;
    for (CalDate d = config.date_start; d <= config.date_end; d = d.plus_days(1))
        (d.is_weekend() ? weekends : weekdays).push_back(d);
    if (weekdays.empty()) throw InfeasibleConfigError("date range contains no weekdays");

    std::map<Archetype, double> weights = config.archetype_weights;
    if (n_anom > 0) {
        double sum = 0.0;
        size_t nonzero = 0;
        for (const auto& [a, w] : weights) {
            if (w < 0.0) throw InfeasibleConfigError("archetype weights must be non-negative");
            sum += w;
            if (w > 0.0) ++nonzero;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw InfeasibleConfigError("archetype weights must sum to 1");
        if (nonzero < 2)
            throw InfeasibleConfigError("need at least two archetype families with positive weight");
        if (weights[Archetype::WeekendPosting] > 0.0 && weekends.empty())
            throw InfeasibleConfigError("WeekendPosting requires a weekend day in the date range");
        bool off_hours_possible =
            config.working_start_min > 0 || config.working_end_min < 24 * 60;
        if (weights[Archetype::OffHoursPosting] > 0.0 && !off_hours_possible)
            throw InfeasibleConfigError("OffHoursPosting requires time outside working hours");
    }

    SplitMix64 rng_pick(derive_seed(config.seed, 0));
    SplitMix64 rng_base(derive_seed(config.seed, 1));
    SplitMix64 rng_anom(derive_seed(config.seed, 2));

    // Anomalous posting indices: partial Fisher-Yates over the index range.
    std::vector<size_t> indices(config.n_postings);
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    std::set<size_t> anomalous;
    for (size_t i = 0; i < n_anom; ++i) {
        size_t j = i + uniform_below(rng_pick, indices.size() - i);
        std::swap(indices[i], indices[j]);
        anomalous.insert(indices[i]);
    }

    // Two archetypes per anomaly, sampled by weight without replacement.
    std::map<size_t, std::set<Archetype>> archetypes;
    for (size_t idx : anomalous) {
        std::map<Archetype, double> pool = weights;
        for (auto it = pool.begin(); it != pool.end();)
            it = it->second <= 0.0 ? pool.erase(it) : std::next(it);
        Archetype first = sample_archetype(rng_pick, pool);
        pool.erase(first);
        Archetype second = sample_archetype(rng_pick, pool);
        archetypes[idx] = {first, second};
    }

    const int id_width = std::max<int>(5, static_cast<int>(std::to_string(config.n_postings).size()));
    const int off_minutes_before = config.working_start_min;
    const int off_minutes_after = 24 * 60 - config.working_end_min;

    // Base draft for every posting, in index order.
    std::vector<PostingDraft> drafts(config.n_postings);
    int64_t max_normal_cents = 0;
    for (size_t i = 0; i < config.n_postings; ++i) {
        PostingDraft& d = drafts[i];
        d.posting_date = weekdays[uniform_below(rng_base, weekdays.size())];
        d.posting_time = config.working_start_min +
                         static_cast<int>(uniform_below(
                             rng_base, static_cast<uint64_t>(config.working_end_min -
                                                             config.working_start_min)));
        d.payment_days = static_cast<int>(uniform_below(rng_base, 10));
        d.total_cents = lognormal_cents(rng_base, config.amount_log_mu, config.amount_log_sigma);
        d.user = uniform_below(rng_base, config.n_users);
        double split_roll = uniform_unit(rng_base);
        d.split_parts = split_roll < 0.6 ? 1 : (split_roll < 0.9 ? 2 : 3);
        d.debit_is_single = uniform_below(rng_base, 2) == 0;
        for (size_t line = 0; line < d.split_parts + 1; ++line) {
            d.accounts.push_back(uniform_below(rng_base, config.n_accounts));
            static const double kTaxRates[] = {0.0, 7.0, 19.0};
            d.tax_rates.push_back(kTaxRates[uniform_below(rng_base, 3)]);
            d.memos.push_back(uniform_below(rng_base, std::size(kMemoPool)));
        }
        if (!anomalous.count(i)) max_normal_cents = std::max(max_normal_cents, d.total_cents);
    }
    if (max_normal_cents == 0)  // degenerate: every posting anomalous
        max_normal_cents = lognormal_cents(rng_base, config.amount_log_mu + 3.0, 0.0);

    // Anomaly overrides. Giant amounts sit strictly above every normal amount;
    // the high-cash tier sits above the top-amount tier so the cash leg clears
    // the amount quantile even when many giants are present.
    for (size_t idx : anomalous) {
        PostingDraft& d = drafts[idx];
        const std::set<Archetype>& kinds = archetypes[idx];
        if (kinds.count(Archetype::WeekendPosting))
            d.posting_date = weekends[uniform_below(rng_anom, weekends.size())];
        if (kinds.count(Archetype::OffHoursPosting)) {
            auto pick = static_cast<int>(uniform_below(
                rng_anom, static_cast<uint64_t>(off_minutes_before + off_minutes_after)));
            d.posting_time = pick < off_minutes_before ? pick
                                                       : config.working_end_min +
                                                             (pick - off_minutes_before);
        }
        if (kinds.count(Archetype::LatePayment))
            d.payment_days = 10 + static_cast<int>(uniform_below(rng_anom, 81));  // 10..90
        if (kinds.count(Archetype::HighCash)) {
            d.total_cents = 4 * max_normal_cents +
                            static_cast<int64_t>(uniform_below(
                                rng_anom, static_cast<uint64_t>(2 * max_normal_cents) + 1));
            d.cash_leg = true;
            d.split_parts = 1;  // keep the full amount on the cash leg
        } else if (kinds.count(Archetype::TopAmount)) {
            d.total_cents = 2 * max_normal_cents +
                            static_cast<int64_t>(uniform_below(
                                rng_anom, static_cast<uint64_t>(2 * max_normal_cents) + 1));
        }
    }

    // Assemble entries in posting order.
    LabeledDataset out;
    std::vector<JournalEntry>& entries = out.dataset.entries;
    for (size_t i = 0; i < config.n_postings; ++i) {
        const PostingDraft& d = drafts[i];
        std::string pid = posting_label(i, id_width);
        std::vector<int64_t> parts = split_amount(rng_base, d.total_cents, d.split_parts);

        auto make_entry = [&](size_t line, CdFlag flag, int64_t cents, size_t account_slot) {
            JournalEntry e;
            e.entry_id = pid + "-" + std::to_string(line + 1);
            e.posting_id = pid;
            e.posting_date = d.posting_date;
            e.posting_time = d.posting_time;
            e.transaction_date = d.posting_date.plus_days(-d.payment_days);
            e.cd_flag = flag;
            e.amount_cents = cents;
            e.currency = config.currency;
            e.tax_rate = d.tax_rates[account_slot % d.tax_rates.size()];
            char account[32];
            std::snprintf(account, sizeof(account), "ACC-%03zu",
                          d.accounts[account_slot % d.accounts.size()] + 1);
            e.account_id = account;
            char user[16];
            std::snprintf(user, sizeof(user), "U%03zu", d.user + 1);
            e.user_id = user;
            e.memo = kMemoPool[d.memos[account_slot % d.memos.size()]];
            return e;
        };

        // Single line carries the full total on one side; the other side is
        // split into `parts`. The cash leg, when present, is the single line.
        CdFlag single_flag = d.debit_is_single ? CdFlag::Debit : CdFlag::Credit;
        CdFlag split_flag = d.debit_is_single ? CdFlag::Credit : CdFlag::Debit;
        size_t line = 0;
        JournalEntry single = make_entry(line, single_flag, d.total_cents, 0);
        if (d.cash_leg) single.account_id = kCashAccountId;
        entries.push_back(std::move(single));
        ++line;
        for (size_t p = 0; p < parts.size(); ++p, ++line)
            entries.push_back(make_entry(line, split_flag, parts[p], p + 1));

        out.dataset.labels[pid] = anomalous.count(i) ? 1 : 0;
        if (anomalous.count(i)) {
            std::set<Archetype>& dst = out.injected_archetypes[pid];
            dst = archetypes[i];
        }
    }
    out.dataset.label_provenance = LabelProvenance::GroundTruth;
    out.dataset.rebuild_groups();

    // Construction/detector agreement: the JET rule applied to the generated
    // data must reproduce the injected labels exactly.
    JetConfig jet = matching_jet_config(config);
    DatasetStats stats = compute_stats(out.dataset);
    for (const auto& [pid, group] : out.dataset.groups) {
        int verdict = compute_flags(group, jet, stats).verdict;
        if (verdict != out.dataset.labels.at(pid))
            throw InfeasibleConfigError(
                "generated posting " + pid + " disagrees with the JET rule (label " +
                std::to_string(out.dataset.labels.at(pid)) + ", verdict " +
                std::to_string(verdict) +
                "); the config cannot satisfy the construction constraints");
    }
    return out;
}

GenSummary describe(const LabeledDataset& data) {
    GenSummary s;
    s.postings = data.dataset.groups.size();
    s.entries = data.dataset.entries.size();
    std::set<std::string> users, accounts;
    for (const auto& e : data.dataset.entries) {
        users.insert(e.user_id);
        accounts.insert(e.account_id);
    }
    s.users = users.size();
    s.accounts = accounts.size();
    for (const auto& [pid, label] : data.dataset.labels)
        if (label == 1) ++s.anomalies;
    for (const auto& [pid, kinds] : data.injected_archetypes)
        for (Archetype a : kinds) ++s.archetype_histogram[archetype_name(a)];
    return s;
}

std::vector<LabelRow> label_rows(const LabeledDataset& data) {
    std::vector<LabelRow> rows;
    rows.reserve(data.dataset.labels.size());
    for (const auto& [pid, label] : data.dataset.labels) {
        LabelRow row;
        row.posting_id = pid;
        row.label = label;
        auto it = data.injected_archetypes.find(pid);
        if (it != data.injected_archetypes.end())
            for (Archetype a : it->second) row.archetypes.push_back(archetype_name(a));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace auditcopilot
