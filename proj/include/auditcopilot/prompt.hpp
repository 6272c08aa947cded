#pragma once
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "auditcopilot/iforest.hpp"
#include "auditcopilot/jet.hpp"
#include "auditcopilot/ledger.hpp"
#include "auditcopilot/stats.hpp"

namespace auditcopilot {

// Prompt assembly from the versioned templates under templates/. Prompts are
// split into a system part (guidelines, dataset context, per-instance hints)
// and an instance part carrying the compact JSON record of the posting or
// transaction. Rendering is byte-deterministic: amounts two decimals, scores
// four decimals, percentiles as integers, rates as one-decimal percentages.

enum class PromptVariantKind { AuditCopilot, NoIF, NoStatsNoIF, SyntheticFlags };

const char* variant_name(PromptVariantKind kind);
PromptVariantKind variant_from_name(const std::string& name);

inline constexpr const char* kTemplateVersion = "v1";

struct PromptVariant {
    PromptVariantKind kind = PromptVariantKind::AuditCopilot;
    std::string template_version = kTemplateVersion;
};

struct PromptBundle {
    std::string system_text;
    std::string instance_text;
    std::string posting_id;
    PromptVariant variant;
    std::map<std::string, std::string> interpolation_record;
};

class MissingInputError : public std::runtime_error {
public:
    MissingInputError(const std::string& variant, const std::string& field)
        : std::runtime_error("variant " + variant + " requires " + field) {}
};

class PlaceholderUnresolvedError : public std::runtime_error {
public:
    explicit PlaceholderUnresolvedError(const std::string& name)
        : std::runtime_error("unresolved placeholder {" + name + "}") {}
};

// Compact single-object records; keys follow the ledger schema order, memo
// text is JSON-escaped, amounts are rendered with two decimals. The overloads
// with flags list the five engineered feature values before the entries.
std::string render_instance_record(const JournalEntry& entry);
std::string render_instance_record(const PostingGroup& group);
std::string render_instance_record(const JournalEntry& entry, const JetFlags& flags);
std::string render_instance_record(const PostingGroup& group, const JetFlags& flags);

PromptBundle build_prompt(const PostingGroup& group, const DatasetStats* stats,
                          const IForestResult* if_result, const JetFlags* flags,
                          const PromptVariant& variant);
PromptBundle build_prompt(const JournalEntry& entry, const DatasetStats* stats,
                          const IForestResult* if_result, const JetFlags* flags,
                          const PromptVariant& variant);

// Raw template text (system / instance) for a variant, for inspection.
std::string system_template(PromptVariantKind kind);
std::string instance_template(PromptVariantKind kind);

}  // namespace auditcopilot
