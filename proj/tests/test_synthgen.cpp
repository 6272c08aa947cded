#include <doctest.h>

#include <sstream>

#include "auditcopilot/synthgen.hpp"
#include "auditcopilot/stats.hpp"
#include "test_util.hpp"

using namespace auditcopilot;
using namespace acptest;

namespace {

GenConfig small_config(uint64_t seed, size_t postings, double rate) {
    GenConfig config;
    config.seed = seed;
    config.n_postings = postings;
    config.anomaly_rate = rate;
    return config;
}

}  // namespace

TEST_CASE("anomaly count is exactly round(n * rate)") {
    LabeledDataset data = generate(small_config(11, 500, 0.02));
    GenSummary s = describe(data);
    CHECK(s.postings == 500);
    CHECK(s.anomalies == 10);
    CHECK(s.entries == data.dataset.entries.size());
}

TEST_CASE("identical config and seed produce byte-identical output") {
    TempDir dir;
    GenConfig config = small_config(42, 120, 0.05);
    save_dataset(generate(config).dataset, dir.file("a.csv"), LedgerFormat::Csv);
    save_dataset(generate(config).dataset, dir.file("b.csv"), LedgerFormat::Csv);
    CHECK(read_file(dir.file("a.csv")) == read_file(dir.file("b.csv")));

    GenConfig other = config;
    other.seed = 43;
    save_dataset(generate(other).dataset, dir.file("c.csv"), LedgerFormat::Csv);
    CHECK(read_file(dir.file("a.csv")) != read_file(dir.file("c.csv")));
}

TEST_CASE("zero anomaly rate stays below two flags everywhere") {
    GenConfig config = small_config(7, 300, 0.0);
    LabeledDataset data = generate(config);
    for (const auto& [pid, label] : data.dataset.labels) CHECK(label == 0);

    JetConfig jet = matching_jet_config(config);
    DatasetStats stats = compute_stats(data.dataset);
    for (const auto& [pid, group] : data.dataset.groups) {
        JetFlags f = compute_flags(group, jet, stats);
        CHECK(f.triggered_count <= 1);
    }
}

TEST_CASE("JET rule applied post-hoc reproduces the injected labels exactly") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        GenConfig config = small_config(seed, 100, 0.05);
        LabeledDataset data = generate(config);
        Dataset relabeled = pseudo_label(data.dataset, matching_jet_config(config));
        size_t positives = 0;
        for (const auto& [pid, label] : relabeled.labels) {
            CHECK(label == data.dataset.labels.at(pid));
            positives += label;
        }
        CHECK(positives == 5);
    }
}

TEST_CASE("every posting group balances to the cent") {
    LabeledDataset data = generate(small_config(9, 250, 0.04));
    for (const auto& [pid, group] : data.dataset.groups) {
        CHECK(group.balanced());
        CHECK(group.debit_total_cents > 0);
    }
}

TEST_CASE("anomalies carry exactly two archetypes from distinct families") {
    LabeledDataset data = generate(small_config(21, 400, 0.03));
    size_t anomalies = 0;
    for (const auto& [pid, label] : data.dataset.labels) anomalies += label;
    CHECK(data.injected_archetypes.size() == anomalies);
    for (const auto& [pid, kinds] : data.injected_archetypes) {
        CHECK(kinds.size() == 2);
        CHECK(data.dataset.labels.at(pid) == 1);
    }
    GenSummary s = describe(data);
    size_t hist_total = 0;
    for (const auto& [name, count] : s.archetype_histogram) hist_total += count;
    CHECK(hist_total == 2 * anomalies);
}

TEST_CASE("labels sidecar matches the generated data") {
    TempDir dir;
    LabeledDataset data = generate(small_config(33, 80, 0.05));
    save_labels(label_rows(data), dir.file("labels.csv"));
    auto rows = load_labels(dir.file("labels.csv"));
    CHECK(rows.size() == 80);
    for (const auto& row : rows) {
        CHECK(row.label == data.dataset.labels.at(row.posting_id));
        if (row.label == 1) {
            CHECK(row.archetypes.size() == 2);
            for (const auto& name : row.archetypes)
                CHECK(data.injected_archetypes.at(row.posting_id).count(archetype_from_name(name)));
        }
    }
}

TEST_CASE("infeasible configurations fail loudly") {
    SUBCASE("empty working-hours window") {
        GenConfig config = small_config(1, 50, 0.1);
        config.working_start_min = 18 * 60;
        config.working_end_min = 8 * 60;
        CHECK_THROWS_AS(generate(config), InfeasibleConfigError);
    }
    SUBCASE("archetype weights must sum to one") {
        GenConfig config = small_config(1, 50, 0.1);
        config.archetype_weights[Archetype::HighCash] = 0.9;
        CHECK_THROWS_AS(generate(config), InfeasibleConfigError);
    }
    SUBCASE("two positive-weight families are required") {
        GenConfig config = small_config(1, 50, 0.1);
        config.archetype_weights = {{Archetype::LatePayment, 1.0}};
        CHECK_THROWS_AS(generate(config), InfeasibleConfigError);
    }
    SUBCASE("date range without weekdays") {
        GenConfig config = small_config(1, 10, 0.0);
        config.date_start = parse_date("2024-03-09");  // Saturday
        config.date_end = parse_date("2024-03-10");    // Sunday
        CHECK_THROWS_AS(generate(config), InfeasibleConfigError);
    }
    SUBCASE("weekend archetype needs a weekend day in range") {
        GenConfig config = small_config(1, 50, 0.1);
        config.date_start = parse_date("2024-03-04");  // Monday
        config.date_end = parse_date("2024-03-08");    // Friday
        config.archetype_weights = {{Archetype::WeekendPosting, 0.5},
                                    {Archetype::LatePayment, 0.5}};
        CHECK_THROWS_AS(generate(config), InfeasibleConfigError);
    }
    SUBCASE("zero postings") {
        CHECK_THROWS_AS(generate(small_config(1, 0, 0.0)), InfeasibleConfigError);
    }
}

TEST_CASE("normal postings stay inside the configured regime") {
    GenConfig config = small_config(5, 200, 0.05);
    LabeledDataset data = generate(config);
    for (const auto& [pid, group] : data.dataset.groups) {
        if (data.dataset.labels.at(pid) == 1) continue;
        for (const auto& e : group.entries) {
            CHECK_FALSE(e.posting_date.is_weekend());
            REQUIRE(e.posting_time.has_value());
            CHECK(*e.posting_time >= config.working_start_min);
            CHECK(*e.posting_time < config.working_end_min);
            int period = e.payment_period_days();
            CHECK(period >= 0);
            CHECK(period <= 9);
            CHECK(e.account_id != kCashAccountId);
        }
    }
}

TEST_CASE("describe on an empty-rate run counts users and accounts") {
    GenConfig config = small_config(2, 60, 0.0);
    config.n_users = 5;
    config.n_accounts = 8;
    GenSummary s = describe(generate(config));
    CHECK(s.anomalies == 0);
    CHECK(s.users <= 5);
    CHECK(s.accounts <= 8);  // cash account unused at rate 0
    CHECK(s.archetype_histogram.empty());
}
