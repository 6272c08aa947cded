#include <doctest.h>

#include "auditcopilot/ledger.hpp"
#include "auditcopilot/rng.hpp"
#include "test_util.hpp"

using namespace auditcopilot;
using namespace acptest;

namespace {

const char* kHeader =
    "entry_id,posting_id,posting_date,posting_time,transaction_date,cd_flag,amount,currency,"
    "tax_rate,account_id,user_id,memo\n";

std::string sample_csv() {
    std::string csv = kHeader;
    csv += "E1,P1,2024-03-05,09:30,2024-03-01,D,100.00,EUR,19.00,ACC-001,U001,rent\n";
    csv += "E2,P1,2024-03-05,09:30,2024-03-01,C,100.00,EUR,19.00,ACC-002,U001,rent\n";
    csv += "E3,P2,2024-03-06,10:00,2024-03-04,D,55.50,EUR,7.00,ACC-003,U002,supplies\n";
    csv += "E4,P2,2024-03-06,10:00,2024-03-04,C,55.50,EUR,7.00,ACC-004,U002,supplies\n";
    return csv;
}

}  // namespace

TEST_CASE("money parsing and formatting") {
    CHECK(parse_amount_cents("123") == 12300);
    CHECK(parse_amount_cents("123.4") == 12340);
    CHECK(parse_amount_cents("123.45") == 12345);
    CHECK(parse_amount_cents("0.01") == 1);
    CHECK(parse_amount_cents("-2.50") == -250);
    CHECK_THROWS_AS(parse_amount_cents("1.234"), std::invalid_argument);
    CHECK_THROWS_AS(parse_amount_cents("1."), std::invalid_argument);
    CHECK_THROWS_AS(parse_amount_cents("abc"), std::invalid_argument);
    CHECK_THROWS_AS(parse_amount_cents(""), std::invalid_argument);
    CHECK(format_cents(12345) == "123.45");
    CHECK(format_cents(5) == "0.05");
    CHECK(format_cents(-250) == "-2.50");
    CHECK(div_half_up(5, 2) == 3);
    CHECK(div_half_up(4, 2) == 2);
}

TEST_CASE("calendar dates and times") {
    CalDate d = parse_date("2024-03-05");
    CHECK(d.weekday_iso() == 2);  // Tuesday
    CHECK(parse_date("2024-02-29").valid());
    CHECK_THROWS_AS(parse_date("2023-02-29"), std::invalid_argument);
    CHECK_THROWS_AS(parse_date("2024-3-05"), std::invalid_argument);
    CHECK(format_date(d) == "2024-03-05");
    CHECK(d.plus_days(-5) == parse_date("2024-02-29"));
    CHECK(parse_time_minutes("14:30") == 870);
    CHECK_THROWS_AS(parse_time_minutes("24:00"), std::invalid_argument);
    CHECK(format_time_minutes(870) == "14:30");

    JournalEntry e = make_entry("E1", "P1", 100, CdFlag::Debit, "2024-03-05", 870, "2024-02-29");
    CHECK(e.payment_period_days() == 5);
}

TEST_CASE("CSV with 4 rows and 2 posting IDs loads into 4 entries and 2 groups") {
    TempDir dir;
    write_file(dir.file("ledger.csv"), sample_csv());
    Dataset ds = load_dataset(dir.file("ledger.csv"), LedgerFormat::Csv);
    CHECK(ds.entries.size() == 4);
    CHECK(ds.groups.size() == 2);
    CHECK(ds.groups.at("P1").debit_total_cents == 10000);
    CHECK(ds.groups.at("P1").credit_total_cents == 10000);
    CHECK(ds.entries[0].entry_id == "E1");  // order-stable parse
    CHECK(ds.entries[3].entry_id == "E4");
}

TEST_CASE("header-only file yields an empty dataset") {
    TempDir dir;
    write_file(dir.file("empty.csv"), kHeader);
    Dataset ds = load_dataset(dir.file("empty.csv"), LedgerFormat::Csv);
    CHECK(ds.entries.empty());
    CHECK(ds.groups.empty());
}

TEST_CASE("invariant violations are malformed rows") {
    TempDir dir;
    SUBCASE("tax_rate out of range") {
        write_file(dir.file("bad.csv"),
                   std::string(kHeader) +
                       "E1,P1,2024-03-05,09:30,2024-03-01,D,1.00,EUR,250,ACC-001,U001,x\n");
        CHECK_THROWS_AS(load_dataset(dir.file("bad.csv"), LedgerFormat::Csv), MalformedRowError);
    }
    SUBCASE("negative amount") {
        write_file(dir.file("bad.csv"),
                   std::string(kHeader) +
                       "E1,P1,2024-03-05,09:30,2024-03-01,D,-1.00,EUR,19,ACC-001,U001,x\n");
        CHECK_THROWS_AS(load_dataset(dir.file("bad.csv"), LedgerFormat::Csv), MalformedRowError);
    }
    SUBCASE("bad cd_flag") {
        write_file(dir.file("bad.csv"),
                   std::string(kHeader) +
                       "E1,P1,2024-03-05,09:30,2024-03-01,X,1.00,EUR,19,ACC-001,U001,x\n");
        CHECK_THROWS_AS(load_dataset(dir.file("bad.csv"), LedgerFormat::Csv), MalformedRowError);
    }
    SUBCASE("duplicate entry id") {
        write_file(dir.file("bad.csv"),
                   std::string(kHeader) +
                       "E1,P1,2024-03-05,09:30,2024-03-01,D,1.00,EUR,19,ACC-001,U001,x\n"
                       "E1,P2,2024-03-05,09:30,2024-03-01,C,1.00,EUR,19,ACC-001,U001,x\n");
        CHECK_THROWS_AS(load_dataset(dir.file("bad.csv"), LedgerFormat::Csv),
                        DuplicateEntryIdError);
    }
    SUBCASE("error carries the line number") {
        write_file(dir.file("bad.csv"),
                   std::string(kHeader) +
                       "E1,P1,2024-03-05,09:30,2024-03-01,D,1.00,EUR,19,ACC-001,U001,x\n"
                       "E2,P1,2024-03-05,61:30,2024-03-01,C,1.00,EUR,19,ACC-001,U001,x\n");
        try {
            load_dataset(dir.file("bad.csv"), LedgerFormat::Csv);
            FAIL("expected MalformedRowError");
        } catch (const MalformedRowError& e) {
            CHECK(e.line == 3);
        }
    }
}

TEST_CASE("unknown columns: error in strict mode, ignored otherwise") {
    TempDir dir;
    std::string csv =
        "entry_id,posting_id,posting_date,posting_time,transaction_date,cd_flag,amount,currency,"
        "tax_rate,account_id,user_id,memo,extra\n"
        "E1,P1,2024-03-05,09:30,2024-03-01,D,1.00,EUR,19,ACC-001,U001,x,ignored\n";
    write_file(dir.file("extra.csv"), csv);
    CHECK_THROWS_AS(load_dataset(dir.file("extra.csv"), LedgerFormat::Csv), UnknownColumnError);
    LoadOptions lenient;
    lenient.strict = false;
    Dataset ds = load_dataset(dir.file("extra.csv"), LedgerFormat::Csv, lenient);
    CHECK(ds.entries.size() == 1);
}

TEST_CASE("RFC-4180 quoting survives commas, quotes and newlines in memos") {
    TempDir dir;
    Dataset ds;
    JournalEntry e = make_entry("E1", "P1", 12345);
    e.memo = "a \"quoted\" memo, with commas\nand a newline";
    ds.entries.push_back(e);
    ds.entries.push_back(make_entry("E2", "P1", 12345, CdFlag::Credit));
    ds.rebuild_groups();

    save_dataset(ds, dir.file("q.csv"), LedgerFormat::Csv);
    Dataset back = load_dataset(dir.file("q.csv"), LedgerFormat::Csv);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].memo == e.memo);
}

TEST_CASE("group_by_posting recomputes totals") {
    SUBCASE("balanced debit pair") {
        std::vector<JournalEntry> entries = {make_entry("E1", "P1", 10000, CdFlag::Debit),
                                             make_entry("E2", "P1", 10000, CdFlag::Credit)};
        auto groups = group_by_posting(entries);
        REQUIRE(groups.size() == 1);
        CHECK(groups.at("P1").debit_total_cents == 10000);
        CHECK(groups.at("P1").credit_total_cents == 10000);
        CHECK(groups.at("P1").balanced());
    }
    SUBCASE("three distinct postings become singleton groups") {
        std::vector<JournalEntry> entries = {make_entry("E1", "P1", 100),
                                             make_entry("E2", "P2", 200),
                                             make_entry("E3", "P3", 300)};
        auto groups = group_by_posting(entries);
        CHECK(groups.size() == 3);
        for (const auto& [pid, g] : groups) CHECK(g.entries.size() == 1);
    }
    SUBCASE("split debits sum against a single credit") {
        // 40 + 60 = 100 on the debit side, hand-added oracle.
        std::vector<JournalEntry> entries = {make_entry("E1", "P1", 4000, CdFlag::Debit),
                                             make_entry("E2", "P1", 6000, CdFlag::Debit),
                                             make_entry("E3", "P1", 10000, CdFlag::Credit)};
        auto groups = group_by_posting(entries);
        CHECK(groups.at("P1").debit_total_cents == 10000);
        CHECK(groups.at("P1").credit_total_cents == 10000);
    }
    SUBCASE("empty input yields empty map") { CHECK(group_by_posting({}).empty()); }
}

TEST_CASE("grouping is a partition and cent arithmetic is exact") {
    // Ten 0.10 entries must total exactly 1.00; no float drift.
    std::vector<JournalEntry> entries;
    for (int i = 0; i < 10; ++i)
        entries.push_back(make_entry("E" + std::to_string(i), "P1", 10, CdFlag::Debit));
    auto groups = group_by_posting(entries);
    CHECK(groups.at("P1").debit_total_cents == 100);

    SplitMix64 rng(99);
    std::vector<JournalEntry> random_entries;
    for (int i = 0; i < 200; ++i) {
        std::string pid = "P" + std::to_string(uniform_below(rng, 37));
        random_entries.push_back(make_entry("E" + std::to_string(i), pid,
                                            static_cast<int64_t>(uniform_below(rng, 100000))));
    }
    auto random_groups = group_by_posting(random_entries);
    size_t total = 0;
    for (const auto& [pid, g] : random_groups) {
        total += g.entries.size();
        for (const auto& e : g.entries) CHECK(e.posting_id == pid);
    }
    CHECK(total == random_entries.size());
}

TEST_CASE("round-trip: save then load preserves every field") {
    TempDir dir;
    SplitMix64 rng(1234);
    Dataset ds;
    const char* memos[] = {"plain", "with, comma", "with \"quotes\"", "", "tab\tand\nnewline"};
    for (int i = 0; i < 40; ++i) {
        JournalEntry e = make_entry("E" + std::to_string(i),
                                    "P" + std::to_string(uniform_below(rng, 11)),
                                    static_cast<int64_t>(uniform_below(rng, 10000000)),
                                    uniform_below(rng, 2) ? CdFlag::Debit : CdFlag::Credit);
        if (uniform_below(rng, 4) == 0) e.posting_time.reset();
        if (uniform_below(rng, 4) == 0) e.tax_rate.reset();
        else e.tax_rate = static_cast<double>(uniform_below(rng, 10000)) / 100.0;
        e.memo = memos[uniform_below(rng, 5)];
        ds.entries.push_back(e);
    }
    ds.rebuild_groups();

    for (LedgerFormat format : {LedgerFormat::Csv, LedgerFormat::Jsonl}) {
        std::string path = dir.file(format == LedgerFormat::Csv ? "rt.csv" : "rt.jsonl");
        save_dataset(ds, path, format);
        Dataset back = load_dataset(path, format);
        REQUIRE(back.entries.size() == ds.entries.size());
        for (size_t i = 0; i < ds.entries.size(); ++i) {
            const JournalEntry& a = ds.entries[i];
            const JournalEntry& b = back.entries[i];
            CHECK(a.entry_id == b.entry_id);
            CHECK(a.posting_id == b.posting_id);
            CHECK(a.posting_date == b.posting_date);
            CHECK(a.posting_time == b.posting_time);
            CHECK(a.transaction_date == b.transaction_date);
            CHECK(a.cd_flag == b.cd_flag);
            CHECK(a.amount_cents == b.amount_cents);
            CHECK(a.currency == b.currency);
            CHECK(a.tax_rate.has_value() == b.tax_rate.has_value());
            if (a.tax_rate) CHECK(*a.tax_rate == doctest::Approx(*b.tax_rate).epsilon(1e-9));
            CHECK(a.account_id == b.account_id);
            CHECK(a.user_id == b.user_id);
            CHECK(a.memo == b.memo);
        }
        // Second round trip is byte-stable.
        std::string path2 = path + ".again";
        save_dataset(back, path2, format);
        CHECK(read_file(path) == read_file(path2));
    }
}

TEST_CASE("write_report is deterministic and fails loudly") {
    TempDir dir;
    nlohmann::json report = {{"b", 2}, {"a", 1}, {"nested", {{"z", 1}, {"y", 2}}}};
    write_report(report, dir.file("r1.json"));
    write_report(report, dir.file("r2.json"));
    CHECK(read_file(dir.file("r1.json")) == read_file(dir.file("r2.json")));

    write_report(nlohmann::json::object(), dir.file("empty.json"));
    CHECK(read_file(dir.file("empty.json")) == "{}\n");

    CHECK_THROWS_AS(write_report(report, (dir.path / "missing" / "r.json").string()), IoError);
}

TEST_CASE("labels sidecar round trip") {
    TempDir dir;
    std::vector<LabelRow> rows = {{"P1", 0, {}},
                                  {"P2", 1, {"late_payment", "weekend_posting"}},
                                  {"P3", 1, {"high_cash"}}};
    save_labels(rows, dir.file("labels.csv"));
    auto back = load_labels(dir.file("labels.csv"));
    REQUIRE(back.size() == 3);
    CHECK(back[1].posting_id == "P2");
    CHECK(back[1].label == 1);
    CHECK(back[1].archetypes == std::vector<std::string>{"late_payment", "weekend_posting"});

    write_file(dir.file("bad.csv"), "posting_id,label\nP1,2\n");
    CHECK_THROWS_AS(load_labels(dir.file("bad.csv")), MalformedRowError);
}
