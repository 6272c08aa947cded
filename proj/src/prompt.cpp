#include "auditcopilot/prompt.hpp"

#include <cstdio>
#include <sstream>

#include "prompt_templates.inc"

namespace auditcopilot {
namespace {

bool is_placeholder_start(char c) { return c >= 'a' && c <= 'z'; }
bool is_placeholder_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

// Replaces {snake_case} placeholders from the value map. Literal braces that
// do not form a placeholder (e.g. the JSON examples in the response format
// section) pass through untouched.
std::string interpolate(const std::string& tpl, const std::map<std::string, std::string>& values,
                        std::map<std::string, std::string>* used) {
    std::string out;
    out.reserve(tpl.size());
    for (size_t i = 0; i < tpl.size();) {
        if (tpl[i] == '{' && i + 1 < tpl.size() && is_placeholder_start(tpl[i + 1])) {
            size_t j = i + 1;
            while (j < tpl.size() && is_placeholder_char(tpl[j])) ++j;
            if (j < tpl.size() && tpl[j] == '}') {
                std::string name = tpl.substr(i + 1, j - i - 1);
                auto it = values.find(name);
                if (it == values.end()) throw PlaceholderUnresolvedError(name);
                out += it->second;
                if (used) (*used)[name] = it->second;
                i = j + 1;
                continue;
            }
        }
        out.push_back(tpl[i]);
        ++i;
    }
    return out;
}

std::string fmt_size(size_t v) { return std::to_string(v); }

std::string fmt_score(double score) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", score);
    return buf;
}

std::string fmt_rate_percent(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%", rate * 100.0);
    return buf;
}

std::string fmt_tax(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", rate);
    return buf;
}

void append_entry_fields(std::ostringstream& out, const JournalEntry& e) {
    out << "\"entry_id\":\"" << json_escape(e.entry_id) << "\""
        << ",\"posting_id\":\"" << json_escape(e.posting_id) << "\"";
}

void append_entry_rest(std::ostringstream& out, const JournalEntry& e) {
    out << ",\"posting_date\":\"" << format_date(e.posting_date) << "\"";
    if (e.posting_time) out << ",\"posting_time\":\"" << format_time_minutes(*e.posting_time) << "\"";
    else out << ",\"posting_time\":null";
    out << ",\"transaction_date\":\"" << format_date(e.transaction_date) << "\""
        << ",\"cd_flag\":\"" << cd_flag_char(e.cd_flag) << "\""
        << ",\"amount\":" << format_cents(e.amount_cents)
        << ",\"currency\":\"" << json_escape(e.currency) << "\"";
    if (e.tax_rate) out << ",\"tax_rate\":" << fmt_tax(*e.tax_rate);
    else out << ",\"tax_rate\":null";
    out << ",\"account_id\":\"" << json_escape(e.account_id) << "\""
        << ",\"user_id\":\"" << json_escape(e.user_id) << "\""
        << ",\"memo\":\"" << json_escape(e.memo) << "\"";
}

void append_flags(std::ostringstream& out, const JetFlags& f) {
    out << "\"promptly\":" << f.promptly << ",\"weekend\":" << f.weekend << ",\"nwh\":" << f.nwh
        << ",\"top_n\":" << f.top_n << ",\"high_cash\":" << f.high_cash;
}

std::string render_group(const PostingGroup& group, const JetFlags* flags) {
    std::ostringstream out;
    out << "{\"posting_id\":\"" << json_escape(group.posting_id) << "\",";
    if (flags) {
        append_flags(out, *flags);
        out << ",";
    }
    out << "\"debit_total\":" << format_cents(group.debit_total_cents)
        << ",\"credit_total\":" << format_cents(group.credit_total_cents) << ",\"entries\":[";
    for (size_t i = 0; i < group.entries.size(); ++i) {
        if (i) out << ",";
        out << "{";
        append_entry_fields(out, group.entries[i]);
        append_entry_rest(out, group.entries[i]);
        out << "}";
    }
    out << "]}";
    return out.str();
}

std::string render_entry(const JournalEntry& entry, const JetFlags* flags) {
    std::ostringstream out;
    out << "{";
    append_entry_fields(out, entry);
    if (flags) {
        out << ",";
        append_flags(out, *flags);
    }
    append_entry_rest(out, entry);
    out << "}";
    return out.str();
}

struct InstanceView {
    std::string posting_id;
    std::string user_id;
    int64_t abs_amount_cents = 0;
    std::string record;  // without flags
    std::string record_with_flags;
};

PromptBundle build_from_view(const InstanceView& view, const DatasetStats* stats,
                             const IForestResult* if_result, const JetFlags* flags,
                             const PromptVariant& variant) {
    const char* vname = variant_name(variant.kind);
    std::map<std::string, std::string> values;

    bool needs_stats = variant.kind == PromptVariantKind::AuditCopilot ||
                       variant.kind == PromptVariantKind::NoIF;
    bool needs_if = variant.kind == PromptVariantKind::AuditCopilot;
    bool needs_flags = variant.kind == PromptVariantKind::SyntheticFlags;

    if (needs_stats) {
        if (!stats || stats->empty()) throw MissingInputError(vname, "dataset statistics");
        values["total_transactions"] = fmt_size(stats->total_transactions);
        values["amount_mean"] = format_cents(
            div_half_up(stats->amount_sum_cents, static_cast<int64_t>(stats->total_transactions)));
        values["amount_median"] = format_cents(stats->amount_median_cents);
        values["amount_q95"] = format_cents(stats->amount_q95_cents);
        values["amount_q99"] = format_cents(stats->amount_q99_cents);
        values["amount_min"] = format_cents(stats->amount_min_cents);
        values["amount_max"] = format_cents(stats->amount_max_cents);
        values["payment_period_max"] = std::to_string(stats->payment_period_max);
        values["total_users"] = fmt_size(stats->total_users);
        values["total_accounts"] = fmt_size(stats->total_accounts);

        values["user_id"] = view.user_id;
        auto it = stats->user_tx_counts.find(view.user_id);
        values["user_tx_count"] = fmt_size(it == stats->user_tx_counts.end() ? 0 : it->second);
        values["abs_amount"] = format_cents(view.abs_amount_cents);
        values["amount_percentile"] = std::to_string(percentile_of(view.abs_amount_cents, *stats));
    }
    if (needs_if) {
        if (!if_result) throw MissingInputError(vname, "isolation forest result");
        auto score_it = if_result->scores.find(view.posting_id);
        auto decision_it = if_result->decisions.find(view.posting_id);
        if (score_it == if_result->scores.end() || decision_it == if_result->decisions.end())
            throw MissingInputError(vname, "isolation forest score for posting " + view.posting_id);
        values["total_if_anomalies"] = fmt_size(stats->if_anomaly_count);
        values["if_anomaly_rate"] = fmt_rate_percent(stats->if_anomaly_rate);
        values["if_status"] = decision_it->second == IfDecision::Anomaly ? "Anomaly" : "Normal";
        values["if_score"] = fmt_score(score_it->second);
    }
    if (needs_flags && !flags) throw MissingInputError(vname, "JET flags");

    values["transaction_data"] = needs_flags ? view.record_with_flags : view.record;

    PromptBundle bundle;
    bundle.posting_id = view.posting_id;
    bundle.variant = variant;
    bundle.system_text = interpolate(system_template(variant.kind), values,
                                     &bundle.interpolation_record);
    bundle.instance_text = interpolate(instance_template(variant.kind), values,
                                       &bundle.interpolation_record);
    return bundle;
}

}  // namespace

const char* variant_name(PromptVariantKind kind) {
    switch (kind) {
        case PromptVariantKind::AuditCopilot: return "audit-copilot";
        case PromptVariantKind::NoIF: return "no-if";
        case PromptVariantKind::NoStatsNoIF: return "no-stats-no-if";
        case PromptVariantKind::SyntheticFlags: return "synthetic-flags";
    }
    return "unknown";
}

PromptVariantKind variant_from_name(const std::string& name) {
    for (PromptVariantKind kind :
         {PromptVariantKind::AuditCopilot, PromptVariantKind::NoIF, PromptVariantKind::NoStatsNoIF,
          PromptVariantKind::SyntheticFlags})
        if (name == variant_name(kind)) return kind;
    throw std::invalid_argument("unknown prompt variant '" + name + "'");
}

std::string system_template(PromptVariantKind kind) {
    switch (kind) {
        case PromptVariantKind::AuditCopilot: return templates::kAuditCopilotSystem;
        case PromptVariantKind::NoIF: return templates::kNoIfSystem;
        case PromptVariantKind::NoStatsNoIF: return templates::kNoStatsNoIfSystem;
        case PromptVariantKind::SyntheticFlags: return templates::kSyntheticFlagsSystem;
    }
    return {};
}

std::string instance_template(PromptVariantKind kind) {
    return kind == PromptVariantKind::SyntheticFlags ? templates::kSyntheticFlagsInstance
                                                     : templates::kVanillaInstance;
}

std::string render_instance_record(const JournalEntry& entry) { return render_entry(entry, nullptr); }
std::string render_instance_record(const PostingGroup& group) { return render_group(group, nullptr); }
std::string render_instance_record(const JournalEntry& entry, const JetFlags& flags) {
    return render_entry(entry, &flags);
}
std::string render_instance_record(const PostingGroup& group, const JetFlags& flags) {
    return render_group(group, &flags);
}

PromptBundle build_prompt(const PostingGroup& group, const DatasetStats* stats,
                          const IForestResult* if_result, const JetFlags* flags,
                          const PromptVariant& variant) {
    if (group.entries.empty()) throw std::invalid_argument("build_prompt on empty posting group");
    InstanceView view;
    view.posting_id = group.posting_id;
    view.user_id = group.entries.front().user_id;
    view.abs_amount_cents = group.max_abs_amount_cents();
    view.record = render_instance_record(group);
    if (flags) view.record_with_flags = render_instance_record(group, *flags);
    return build_from_view(view, stats, if_result, flags, variant);
}

PromptBundle build_prompt(const JournalEntry& entry, const DatasetStats* stats,
                          const IForestResult* if_result, const JetFlags* flags,
                          const PromptVariant& variant) {
    InstanceView view;
    view.posting_id = entry.posting_id;
    view.user_id = entry.user_id;
    view.abs_amount_cents = std::abs(entry.amount_cents);
    view.record = render_instance_record(entry);
    if (flags) view.record_with_flags = render_instance_record(entry, *flags);
    return build_from_view(view, stats, if_result, flags, variant);
}

}  // namespace auditcopilot
