#include <doctest.h>

#include <regex>
#include <set>

#include "auditcopilot/prompt.hpp"
#include "prompt_fixture.hpp"
#include "test_util.hpp"

using namespace auditcopilot;
using namespace acptest;

namespace {

using Fixture = PromptFixture;

bool has_dangling_placeholder(const std::string& text) {
    static const std::regex pattern("\\{[a-z][a-z0-9_]*\\}");
    return std::regex_search(text, pattern);
}

}  // namespace

TEST_CASE("instance records escape memo text and parse as one object") {
    JournalEntry e = make_entry("E1", "P1", 199);
    e.memo = "he said \"pay now\"";
    std::string record = render_instance_record(e);
    nlohmann::json parsed = nlohmann::json::parse(record);
    CHECK(parsed.is_object());
    CHECK(parsed.at("memo").get<std::string>() == e.memo);
}

TEST_CASE("group records keep the entry list ordered") {
    Fixture fx;
    std::string record = render_instance_record(fx.probe());
    nlohmann::json parsed = nlohmann::json::parse(record);
    REQUIRE(parsed.at("entries").size() == 2);
    CHECK(parsed["entries"][0]["entry_id"] == "E100-1");
    CHECK(parsed["entries"][1]["entry_id"] == "E100-2");
    CHECK(parsed.at("debit_total") == doctest::Approx(125.50));
}

TEST_CASE("rendering is byte-deterministic") {
    Fixture fx;
    CHECK(render_instance_record(fx.probe()) == render_instance_record(fx.probe()));
    PromptVariant variant{PromptVariantKind::AuditCopilot};
    PromptBundle a = build_prompt(fx.probe(), &fx.stats, &fx.iforest, nullptr, variant);
    PromptBundle b = build_prompt(fx.probe(), &fx.stats, &fx.iforest, nullptr, variant);
    CHECK(a.system_text == b.system_text);
    CHECK(a.instance_text == b.instance_text);
}

TEST_CASE("every ledger schema field appears in the record") {
    Fixture fx;
    for (const std::string record :
         {render_instance_record(fx.probe()), render_instance_record(fx.ds.entries[0])}) {
        for (const char* field : {"entry_id", "posting_id", "posting_date", "posting_time",
                                  "transaction_date", "cd_flag", "amount", "currency", "tax_rate",
                                  "account_id", "user_id", "memo"})
            CHECK(record.find("\"" + std::string(field) + "\":") != std::string::npos);
    }
}

TEST_CASE("amounts render with two decimals") {
    JournalEntry e = make_entry("E1", "P1", 123450);  // 1234.50
    std::string record = render_instance_record(e);
    CHECK(record.find("\"amount\":1234.50") != std::string::npos);
}

TEST_CASE("synthetic records list the five feature values") {
    Fixture fx;
    std::string record = render_instance_record(fx.probe(), fx.flags);
    nlohmann::json parsed = nlohmann::json::parse(record);
    CHECK(parsed.at("promptly") == 3);
    CHECK(parsed.at("weekend") == 2);
    CHECK(parsed.at("nwh") == 0);
    CHECK(parsed.at("top_n") == 0);
    CHECK(parsed.at("high_cash") == 0);
}

TEST_CASE("audit-copilot prompt carries the hint and the figure headers") {
    Fixture fx;
    PromptBundle bundle = build_prompt(fx.probe(), &fx.stats, &fx.iforest, nullptr,
                                       PromptVariant{PromptVariantKind::AuditCopilot});
    CHECK(bundle.system_text.find("DATASET CONTEXT:") != std::string::npos);
    CHECK(bundle.system_text.find("ANOMALY DETECTION CRITERIA:") != std::string::npos);
    CHECK(bundle.system_text.find("RESPONSE FORMAT:") != std::string::npos);
    CHECK(bundle.system_text.find("Isolation Forest Hint: Normal (score: 0.2500)") !=
          std::string::npos);
    CHECK(bundle.system_text.find("Be conservative") != std::string::npos);
    CHECK(bundle.instance_text.find("TRANSACTION DATA:") != std::string::npos);
    CHECK_FALSE(has_dangling_placeholder(bundle.system_text));
    CHECK_FALSE(has_dangling_placeholder(bundle.instance_text));
}

TEST_CASE("variant omissions") {
    Fixture fx;
    PromptBundle no_if = build_prompt(fx.probe(), &fx.stats, &fx.iforest, nullptr,
                                      PromptVariant{PromptVariantKind::NoIF});
    CHECK(no_if.system_text.find("Isolation Forest") == std::string::npos);
    CHECK(no_if.system_text.find("DATASET CONTEXT:") != std::string::npos);

    PromptBundle bare = build_prompt(fx.probe(), nullptr, nullptr, nullptr,
                                     PromptVariant{PromptVariantKind::NoStatsNoIF});
    CHECK(bare.system_text.find("Isolation Forest") == std::string::npos);
    CHECK(bare.system_text.find("DATASET CONTEXT") == std::string::npos);
    CHECK(bare.system_text.find("ADDITIONAL CONTEXT") == std::string::npos);
    // No statistics values leak into the prompt.
    CHECK(bare.system_text.find("125.50") == std::string::npos);
    CHECK(bare.system_text.find("40000.00") == std::string::npos);
    CHECK_FALSE(has_dangling_placeholder(bare.system_text));
}

TEST_CASE("placeholder sets shrink strictly across the ablation chain") {
    Fixture fx;
    auto keys = [&](PromptVariantKind kind) {
        const DatasetStats* stats = kind == PromptVariantKind::NoStatsNoIF ? nullptr : &fx.stats;
        const IForestResult* iforest = kind == PromptVariantKind::AuditCopilot ? &fx.iforest : nullptr;
        PromptBundle b = build_prompt(fx.probe(), stats, iforest, nullptr, PromptVariant{kind});
        std::set<std::string> out;
        for (const auto& [k, v] : b.interpolation_record) out.insert(k);
        return out;
    };
    std::set<std::string> full = keys(PromptVariantKind::AuditCopilot);
    std::set<std::string> no_if = keys(PromptVariantKind::NoIF);
    std::set<std::string> bare = keys(PromptVariantKind::NoStatsNoIF);

    CHECK(bare.size() < no_if.size());
    CHECK(no_if.size() < full.size());
    CHECK(std::includes(no_if.begin(), no_if.end(), bare.begin(), bare.end()));
    CHECK(std::includes(full.begin(), full.end(), no_if.begin(), no_if.end()));
    CHECK(full.count("if_status") == 1);
    CHECK(no_if.count("if_status") == 0);
    CHECK(bare == std::set<std::string>{"transaction_data"});
}

TEST_CASE("missing inputs are rejected per variant") {
    Fixture fx;
    CHECK_THROWS_AS(build_prompt(fx.probe(), &fx.stats, nullptr, nullptr,
                                 PromptVariant{PromptVariantKind::AuditCopilot}),
                    MissingInputError);
    CHECK_THROWS_AS(build_prompt(fx.probe(), nullptr, nullptr, nullptr,
                                 PromptVariant{PromptVariantKind::NoIF}),
                    MissingInputError);
    CHECK_THROWS_AS(build_prompt(fx.probe(), nullptr, nullptr, nullptr,
                                 PromptVariant{PromptVariantKind::SyntheticFlags}),
                    MissingInputError);
    IForestResult missing_posting;  // lacks P100
    missing_posting.scores = {{"P200", 0.5}};
    missing_posting.decisions = {{"P200", IfDecision::Normal}};
    CHECK_THROWS_AS(build_prompt(fx.probe(), &fx.stats, &missing_posting, nullptr,
                                 PromptVariant{PromptVariantKind::AuditCopilot}),
                    MissingInputError);
}

TEST_CASE("prompts match the golden files") {
    // ACP_UPDATE_GOLDEN=1 rewrites the golden files instead of comparing.
    const bool update = std::getenv("ACP_UPDATE_GOLDEN") != nullptr;
    Fixture fx;
    auto check_golden = [&](PromptVariantKind kind, const std::string& name) {
        const DatasetStats* stats = kind == PromptVariantKind::NoStatsNoIF ? nullptr : &fx.stats;
        const IForestResult* iforest =
            kind == PromptVariantKind::AuditCopilot ? &fx.iforest : nullptr;
        const JetFlags* flags = kind == PromptVariantKind::SyntheticFlags ? &fx.flags : nullptr;
        PromptBundle bundle = build_prompt(fx.probe(), stats, iforest, flags, PromptVariant{kind});
        std::string golden_dir = ACP_GOLDEN_DIR;
        if (update) {
            write_file(golden_dir + "/" + name + ".system.txt", bundle.system_text);
            write_file(golden_dir + "/" + name + ".instance.txt", bundle.instance_text);
            return;
        }
        CHECK(bundle.system_text == read_file(golden_dir + "/" + name + ".system.txt"));
        CHECK(bundle.instance_text == read_file(golden_dir + "/" + name + ".instance.txt"));
    };
    check_golden(PromptVariantKind::AuditCopilot, "audit_copilot");
    check_golden(PromptVariantKind::NoIF, "no_if");
    check_golden(PromptVariantKind::NoStatsNoIF, "no_stats_no_if");
    check_golden(PromptVariantKind::SyntheticFlags, "synthetic_flags");
}

TEST_CASE("transaction-level prompts work from a single entry") {
    Fixture fx;
    PromptBundle bundle = build_prompt(fx.ds.entries[2], &fx.stats, &fx.iforest, nullptr,
                                       PromptVariant{PromptVariantKind::AuditCopilot});
    CHECK(bundle.posting_id == "P200");
    CHECK(bundle.system_text.find("Isolation Forest Hint: Anomaly (score: 0.8125)") !=
          std::string::npos);
    CHECK(bundle.system_text.find("This user (U002) has 1 total transactions") !=
          std::string::npos);
    size_t first = bundle.instance_text.find('{');
    size_t last = bundle.instance_text.rfind('}');
    nlohmann::json record =
        nlohmann::json::parse(bundle.instance_text.substr(first, last - first + 1));
    CHECK(record.at("entry_id") == "E200-1");
}
