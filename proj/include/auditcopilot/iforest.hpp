#pragma once
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "auditcopilot/ledger.hpp"

namespace auditcopilot {

// From-scratch Isolation Forest over posting groups. Each tree is grown on a
// uniform subsample with uniformly drawn split attribute and split value; the
// anomaly score is s(x) = 2^(-E[h(x)] / c(psi)) where c is the average path
// normalizer of the unsuccessful-search model. Scores are deterministic for a
// fixed (dataset, config): per-tree seeds are derived from the master seed, so
// sequential and parallel construction give identical results.

struct IForestConfig {
    size_t n_trees = 100;
    size_t subsample_size = 256;  // clamped to dataset size with a warning
    uint64_t seed = 0;
    // Fraction of postings to flag (quantile threshold), or an absolute score
    // threshold when threshold_is_absolute is set.
    double contamination = 0.05;
    bool threshold_is_absolute = false;
    std::vector<std::string> feature_spec;  // empty = default_feature_spec()
};

// Posting-group features; covers the amount, timing, user and account
// criteria families. Constant features are dropped per fit, not per tree.
std::vector<std::string> default_feature_spec();

enum class IfDecision { Normal, Anomaly };

struct IForestResult {
    std::map<std::string, double> scores;        // posting_id -> score in (0,1)
    std::map<std::string, IfDecision> decisions;
    double threshold_used = 1.0;
    std::vector<std::string> dropped_features;   // constant across all postings
    std::vector<std::string> warnings;

    size_t anomaly_count() const {
        size_t n = 0;
        for (const auto& [id, d] : decisions)
            if (d == IfDecision::Anomaly) ++n;
        return n;
    }
};

class DegenerateFeaturesError : public std::runtime_error {
public:
    explicit DegenerateFeaturesError(const std::string& what) : std::runtime_error(what) {}
};

// c(n) = 2 H(n-1) - 2 (n-1)/n. Exact harmonic sum for small n (c(2) == 1,
// c(3) == 5/3); Euler-Mascheroni approximation for large n. Conventions:
// c(0) = c(1) = 0.
double average_path_normalizer(size_t n);

// s = 2^(-avg_path / c(subsample_n)); equals 0.5 exactly when avg_path == c.
double isolation_score(double avg_path, size_t subsample_n);

IForestResult fit_score(const Dataset& dataset, const IForestConfig& config);

}  // namespace auditcopilot
