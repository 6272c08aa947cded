#include <doctest.h>

#include <algorithm>

#include "auditcopilot/iforest.hpp"
#include "auditcopilot/rng.hpp"
#include "auditcopilot/stats.hpp"
#include "test_util.hpp"

using namespace auditcopilot;
using namespace acptest;

TEST_CASE("average path normalizer") {
    CHECK(average_path_normalizer(0) == 0.0);
    CHECK(average_path_normalizer(1) == 0.0);
    CHECK(average_path_normalizer(2) == 1.0);  // 2*H(1) - 2*(1/2)
    CHECK(average_path_normalizer(3) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    // c is increasing in n.
    double prev = 0.0;
    for (size_t n = 2; n < 2000; n += 17) {
        double c = average_path_normalizer(n);
        CHECK(c > prev);
        prev = c;
    }
}

TEST_CASE("score is 0.5 exactly when the average path equals c(psi)") {
    for (size_t psi : {2, 16, 256}) {
        double c = average_path_normalizer(psi);
        CHECK(isolation_score(c, psi) == 0.5);
        CHECK(isolation_score(0.5 * c, psi) > 0.5);
        CHECK(isolation_score(2.0 * c, psi) < 0.5);
    }
}

TEST_CASE("gross 1-D outlier receives the maximal score") {
    Dataset ds = dataset_from_amounts({1000, 1100, 900, 1200, 100000});
    IForestConfig config;
    config.n_trees = 100;
    config.seed = 1;
    config.contamination = 0.2;
    IForestResult result = fit_score(ds, config);

    // With identical dates/users/taxes, only the amount feature survives.
    CHECK(result.dropped_features.size() == default_feature_spec().size() - 1);

    auto best = std::max_element(result.scores.begin(), result.scores.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    CHECK(best->first == "P005");  // the 1000.00 amount
    for (const auto& [pid, score] : result.scores) {
        CHECK(score > 0.0);
        CHECK(score < 1.0);
    }
    CHECK(result.decisions.at("P005") == IfDecision::Anomaly);
}

TEST_CASE("fixed seed gives bit-identical scores") {
    Dataset ds = dataset_from_amounts({120, 340, 560, 9999, 780, 450, 230, 100});
    IForestConfig config;
    config.seed = 77;
    config.contamination = 0.125;
    IForestResult a = fit_score(ds, config);
    IForestResult b = fit_score(ds, config);
    CHECK(a.scores == b.scores);  // exact double equality
    CHECK(a.threshold_used == b.threshold_used);

    config.seed = 78;
    IForestResult c = fit_score(ds, config);
    CHECK(a.scores != c.scores);
}

TEST_CASE("contamination quantile flags exactly round(c*n) postings") {
    std::vector<int64_t> amounts;
    for (int i = 0; i < 50; ++i) amounts.push_back(100 + 7 * i);
    amounts[10] = 900000;
    amounts[20] = 800000;
    Dataset ds = dataset_from_amounts(amounts);

    IForestConfig config;
    config.seed = 5;
    config.contamination = 0.04;  // round(0.04 * 50) = 2
    IForestResult result = fit_score(ds, config);
    CHECK(result.anomaly_count() == 2);

    size_t at_or_above = 0;
    for (const auto& [pid, score] : result.scores)
        if (score >= result.threshold_used) ++at_or_above;
    CHECK(at_or_above >= 2);  // ties at the threshold resolved by posting_id
}

TEST_CASE("contamination 0.04 on 5000 single-entry postings flags exactly 200") {
    SplitMix64 rng(31337);
    std::vector<int64_t> amounts(5000);
    for (auto& a : amounts) a = 1 + static_cast<int64_t>(uniform_below(rng, 10000000));
    Dataset ds = dataset_from_amounts(amounts);

    IForestConfig config;
    config.seed = 4;
    config.contamination = 0.04;
    IForestResult result = fit_score(ds, config);
    CHECK(result.anomaly_count() == 200);

    DatasetStats stats = compute_stats(ds, &result);
    CHECK(stats.if_anomaly_count == 200);
    CHECK(stats.if_anomaly_rate == doctest::Approx(0.04));
}

TEST_CASE("ties at the contamination boundary break by posting_id") {
    // P001 and P002 are identical rows, so their scores tie at the top.
    Dataset ds = dataset_from_amounts({800000, 800000, 100, 110, 120, 130});
    IForestConfig config;
    config.seed = 3;
    config.contamination = 0.17;  // round(1.02) = 1 of 6
    IForestResult result = fit_score(ds, config);
    REQUIRE(result.scores.at("P001") == result.scores.at("P002"));
    CHECK(result.anomaly_count() == 1);
    CHECK(result.decisions.at("P001") == IfDecision::Anomaly);
    CHECK(result.decisions.at("P002") == IfDecision::Normal);
    CHECK(result.threshold_used == result.scores.at("P001"));
}

TEST_CASE("absolute threshold mode") {
    Dataset ds = dataset_from_amounts({100, 110, 120, 900000});
    IForestConfig config;
    config.seed = 9;
    config.contamination = 0.55;
    config.threshold_is_absolute = true;
    IForestResult result = fit_score(ds, config);
    CHECK(result.threshold_used == 0.55);
    for (const auto& [pid, score] : result.scores)
        CHECK((result.decisions.at(pid) == IfDecision::Anomaly) == (score >= 0.55));
}

TEST_CASE("degenerate feature handling") {
    SUBCASE("constant features are dropped with a warning") {
        Dataset ds = dataset_from_amounts({100, 200, 300, 400});
        IForestConfig config;
        config.contamination = 0.25;
        IForestResult result = fit_score(ds, config);
        CHECK(!result.dropped_features.empty());
        CHECK(!result.warnings.empty());
        CHECK(std::find(result.dropped_features.begin(), result.dropped_features.end(),
                        "tax_rate") != result.dropped_features.end());
    }
    SUBCASE("all-constant features cannot be fit") {
        Dataset ds = dataset_from_amounts({500, 500, 500});
        IForestConfig config;
        config.contamination = 0.3;
        CHECK_THROWS_AS(fit_score(ds, config), DegenerateFeaturesError);
    }
    SUBCASE("empty dataset is rejected") {
        Dataset empty;
        CHECK_THROWS_AS(fit_score(empty, IForestConfig{}), EmptyDatasetError);
    }
}

TEST_CASE("oversized subsample is clamped with a warning") {
    Dataset ds = dataset_from_amounts({100, 250, 400, 90000});
    IForestConfig config;
    config.subsample_size = 256;  // dataset has 4 postings
    config.contamination = 0.25;
    IForestResult result = fit_score(ds, config);
    bool clamped = false;
    for (const auto& w : result.warnings) clamped |= w.find("clamped") != std::string::npos;
    CHECK(clamped);
    CHECK(result.scores.size() == 4);
}

TEST_CASE("invalid contamination fraction is rejected") {
    Dataset ds = dataset_from_amounts({100, 200, 90000});
    IForestConfig config;
    config.contamination = 1.5;
    CHECK_THROWS_AS(fit_score(ds, config), std::invalid_argument);
}
