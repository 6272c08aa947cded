#pragma once
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "auditcopilot/jet.hpp"
#include "auditcopilot/ledger.hpp"

namespace auditcopilot {

// Deterministic synthetic double-entry ledger with controllable anomaly
// injection. Anomalies are defined structurally: every anomalous posting gets
// exactly two archetypes from distinct flag families so the two-or-more-flags
// rule fires on it by construction, while normal postings can trigger at most
// the top_n flag. generate() verifies this agreement before returning.

enum class Archetype { LatePayment, WeekendPosting, OffHoursPosting, TopAmount, HighCash };

const char* archetype_name(Archetype a);
Archetype archetype_from_name(const std::string& name);

inline constexpr const char* kCashAccountId = "CASH-001";

struct GenConfig {
    uint64_t seed = 42;
    size_t n_postings = 1000;
    double anomaly_rate = 0.01;
    size_t n_users = 20;
    size_t n_accounts = 40;
    CalDate date_start{2024, 1, 1};
    CalDate date_end{2024, 12, 31};
    double amount_log_mu = 5.0;     // log of currency units
    double amount_log_sigma = 1.0;
    int working_start_min = 8 * 60;
    int working_end_min = 18 * 60;
    std::map<Archetype, double> archetype_weights = {
        {Archetype::LatePayment, 0.2},   {Archetype::WeekendPosting, 0.2},
        {Archetype::OffHoursPosting, 0.2}, {Archetype::TopAmount, 0.2},
        {Archetype::HighCash, 0.2}};
    std::string currency = "EUR";
};

struct LabeledDataset {
    Dataset dataset;  // labels present, provenance GroundTruth
    std::map<std::string, std::set<Archetype>> injected_archetypes;
};

struct GenSummary {
    size_t postings = 0;
    size_t entries = 0;
    size_t anomalies = 0;
    size_t users = 0;
    size_t accounts = 0;
    std::map<std::string, size_t> archetype_histogram;
};

class InfeasibleConfigError : public std::runtime_error {
public:
    explicit InfeasibleConfigError(const std::string& what) : std::runtime_error(what) {}
};

LabeledDataset generate(const GenConfig& config);
GenSummary describe(const LabeledDataset& data);

// JET parameters consistent with a generation config (same working hours,
// the generator's cash account, default top-50 / 95th-percentile thresholds).
JetConfig matching_jet_config(const GenConfig& config);

// Labels sidecar rows (posting_id,label,archetypes) for the generated data.
std::vector<LabelRow> label_rows(const LabeledDataset& data);

}  // namespace auditcopilot
