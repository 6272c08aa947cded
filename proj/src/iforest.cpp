#include "auditcopilot/iforest.hpp"

#include <algorithm>
#include <cmath>

#include "auditcopilot/rng.hpp"

namespace auditcopilot {
namespace {

constexpr double kEulerMascheroni = 0.57721566490153286060651209;

double harmonic(size_t n) {
    if (n == 0) return 0.0;
    if (n <= 100000) {
        double h = 0.0;
        for (size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
        return h;
    }
    double x = static_cast<double>(n);
    return std::log(x) + kEulerMascheroni + 1.0 / (2.0 * x);
}

// Per-user / per-account entry counts needed by the activity features.
struct Counts {
    std::map<std::string, size_t> user;
    std::map<std::string, size_t> account;
};

Counts count_activity(const Dataset& dataset) {
    Counts c;
    for (const auto& e : dataset.entries) {
        ++c.user[e.user_id];
        ++c.account[e.account_id];
    }
    return c;
}

double group_posting_hour(const PostingGroup& g) {
    int max_minutes = -1;
    for (const auto& e : g.entries)
        if (e.posting_time && *e.posting_time > max_minutes) max_minutes = *e.posting_time;
    if (max_minutes < 0) return 12.0;  // no time recorded; neutral midday value
    return static_cast<double>(max_minutes) / 60.0;
}

double group_weekday(const PostingGroup& g) {
    CalDate latest = g.entries.front().posting_date;
    for (const auto& e : g.entries)
        if (e.posting_date > latest) latest = e.posting_date;
    return static_cast<double>(latest.weekday_iso());
}

double group_feature(const std::string& name, const PostingGroup& g, const Counts& counts) {
    if (name == "log_amount") return std::log1p(static_cast<double>(g.max_abs_amount_cents()) / 100.0);
    if (name == "payment_period") return static_cast<double>(g.max_payment_period_days());
    if (name == "posting_hour") return group_posting_hour(g);
    if (name == "weekday") return group_weekday(g);
    if (name == "user_count") {
        size_t min_count = SIZE_MAX;
        for (const auto& e : g.entries) min_count = std::min(min_count, counts.user.at(e.user_id));
        return std::log1p(static_cast<double>(min_count));
    }
    if (name == "account_count") {
        size_t min_count = SIZE_MAX;
        for (const auto& e : g.entries)
            min_count = std::min(min_count, counts.account.at(e.account_id));
        return std::log1p(static_cast<double>(min_count));
    }
    if (name == "tax_rate") {
        double max_rate = 0.0;
        for (const auto& e : g.entries) max_rate = std::max(max_rate, e.tax_rate.value_or(0.0));
        return max_rate;
    }
    throw std::invalid_argument("unknown feature '" + name + "'");
}

// Isolation tree over row indices into the feature matrix. Nodes are stored
// in a flat vector; leaves keep their point count for the c(size) credit.
struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    size_t size = 0;        // leaf only
};

class IsolationTree {
public:
    IsolationTree(const std::vector<std::vector<double>>& matrix, std::vector<size_t> sample,
                  size_t height_limit, SplitMix64& rng)
        : matrix_(matrix) {
        nodes_.reserve(sample.size() * 2);
        root_ = build(sample, 0, height_limit, rng);
    }

    double path_length(const std::vector<double>& row) const {
        int node = root_;
        double depth = 0.0;
        while (nodes_[node].feature >= 0) {
            node = row[nodes_[node].feature] < nodes_[node].split ? nodes_[node].left
                                                                  : nodes_[node].right;
            depth += 1.0;
        }
        return depth + average_path_normalizer(nodes_[node].size);
    }

private:
    int build(std::vector<size_t>& rows, size_t depth, size_t height_limit, SplitMix64& rng) {
        if (rows.size() <= 1 || depth >= height_limit) return make_leaf(rows.size());

        // Candidate features are those with spread among the current rows.
        size_t n_features = matrix_[rows[0]].size();
        std::vector<int> candidates;
        for (size_t f = 0; f < n_features; ++f) {
            double lo = matrix_[rows[0]][f], hi = lo;
            for (size_t r : rows) {
                lo = std::min(lo, matrix_[r][f]);
                hi = std::max(hi, matrix_[r][f]);
            }
            if (hi > lo) candidates.push_back(static_cast<int>(f));
        }
        if (candidates.empty()) return make_leaf(rows.size());

        int feature = candidates[uniform_below(rng, candidates.size())];
        double lo = matrix_[rows[0]][feature], hi = lo;
        for (size_t r : rows) {
            lo = std::min(lo, matrix_[r][feature]);
            hi = std::max(hi, matrix_[r][feature]);
        }
        double split = lo + uniform_unit(rng) * (hi - lo);
        if (split <= lo) split = std::nextafter(lo, hi);  // keep both sides non-empty

        std::vector<size_t> left, right;
        for (size_t r : rows)
            (matrix_[r][feature] < split ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        int node = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{feature, split, -1, -1, 0});
        int l = build(left, depth + 1, height_limit, rng);
        int r = build(right, depth + 1, height_limit, rng);
        nodes_[node].left = l;
        nodes_[node].right = r;
        return node;
    }

    int make_leaf(size_t size) {
        nodes_.push_back(TreeNode{-1, 0.0, -1, -1, size});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const std::vector<std::vector<double>>& matrix_;
    std::vector<TreeNode> nodes_;
    int root_ = -1;
};

}  // namespace

std::vector<std::string> default_feature_spec() {
    return {"log_amount", "payment_period", "posting_hour", "weekday",
            "user_count", "account_count",  "tax_rate"};
}

double average_path_normalizer(size_t n) {
    if (n < 2) return 0.0;  // c(0) = c(1) = 0 by convention
    double nd = static_cast<double>(n);
    return 2.0 * harmonic(n - 1) - 2.0 * (nd - 1.0) / nd;
}

double isolation_score(double avg_path, size_t subsample_n) {
    double c = average_path_normalizer(subsample_n);
    if (c <= 0.0) return 0.5;  // no isolation information at psi < 2
    return std::pow(2.0, -avg_path / c);
}

IForestResult fit_score(const Dataset& dataset, const IForestConfig& config) {
    if (dataset.entries.empty()) throw EmptyDatasetError("fit_score requires a non-empty dataset");

    IForestResult result;
    std::vector<std::string> spec =
        config.feature_spec.empty() ? default_feature_spec() : config.feature_spec;

    Counts counts = count_activity(dataset);
    std::vector<const PostingGroup*> groups;
    groups.reserve(dataset.groups.size());
    for (const auto& [pid, g] : dataset.groups) groups.push_back(&g);
    size_t n = groups.size();

    // Extract all features, then drop columns that are constant across the
    // whole dataset (zero-width split intervals).
    std::vector<std::vector<double>> full(n, std::vector<double>(spec.size()));
    for (size_t i = 0; i < n; ++i)
        for (size_t f = 0; f < spec.size(); ++f) {
            double v = group_feature(spec[f], *groups[i], counts);
            if (!std::isfinite(v))
                throw DegenerateFeaturesError("feature '" + spec[f] + "' is non-finite for posting " +
                                              groups[i]->posting_id);
            full[i][f] = v;
        }

    std::vector<size_t> kept;
    for (size_t f = 0; f < spec.size(); ++f) {
        bool constant = true;
        for (size_t i = 1; i < n && constant; ++i) constant = full[i][f] == full[0][f];
        if (constant && n > 1) {
            result.dropped_features.push_back(spec[f]);
            result.warnings.push_back("feature '" + spec[f] + "' is constant; dropped");
        } else {
            kept.push_back(f);
        }
    }
    if (kept.empty())
        throw DegenerateFeaturesError("all features are constant across postings");

    std::vector<std::vector<double>> matrix(n, std::vector<double>(kept.size()));
    for (size_t i = 0; i < n; ++i)
        for (size_t f = 0; f < kept.size(); ++f) matrix[i][f] = full[i][kept[f]];

    size_t psi = config.subsample_size;
    if (psi > n) {
        psi = n;
        result.warnings.push_back("subsample_size clamped to dataset size " + std::to_string(n));
    }
    size_t height_limit = psi >= 2
        ? static_cast<size_t>(std::ceil(std::log2(static_cast<double>(psi))))
        : 1;

    std::vector<double> path_sums(n, 0.0);
    std::vector<size_t> indices(n);
    for (size_t i = 0; i < n; ++i) indices[i] = i;

    if (psi >= 2) {
        for (size_t t = 0; t < config.n_trees; ++t) {
            SplitMix64 rng(derive_seed(config.seed, t));
            // Partial Fisher-Yates subsample without replacement.
            std::vector<size_t> pool = indices;
            std::vector<size_t> sample(psi);
            for (size_t i = 0; i < psi; ++i) {
                size_t j = i + uniform_below(rng, pool.size() - i);
                std::swap(pool[i], pool[j]);
                sample[i] = pool[i];
            }
            IsolationTree tree(matrix, std::move(sample), height_limit, rng);
            for (size_t i = 0; i < n; ++i) path_sums[i] += tree.path_length(matrix[i]);
        }
    }

    std::vector<std::pair<std::string, double>> scored(n);
    for (size_t i = 0; i < n; ++i) {
        double score = 0.5;
        if (psi >= 2 && config.n_trees > 0) {
            double avg = path_sums[i] / static_cast<double>(config.n_trees);
            score = isolation_score(avg, psi);
        }
        scored[i] = {groups[i]->posting_id, score};
        result.scores[groups[i]->posting_id] = score;
    }

    if (config.threshold_is_absolute) {
        result.threshold_used = config.contamination;
        for (const auto& [pid, score] : scored)
            result.decisions[pid] =
                score >= result.threshold_used ? IfDecision::Anomaly : IfDecision::Normal;
        return result;
    }

    if (config.contamination <= 0.0 || config.contamination >= 1.0)
        throw std::invalid_argument("contamination fraction must lie in (0, 1)");

    // Quantile rule: flag exactly round(contamination * n) postings, ranking
    // by score descending with posting_id as the deterministic tie-break.
    auto k = static_cast<size_t>(std::llround(config.contamination * static_cast<double>(n)));
    if (k > n) k = n;
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scored[a].second != scored[b].second) return scored[a].second > scored[b].second;
        return scored[a].first < scored[b].first;
    });
    result.threshold_used = k > 0 ? scored[order[k - 1]].second : 1.0;
    for (size_t i = 0; i < n; ++i)
        result.decisions[scored[order[i]].first] = i < k ? IfDecision::Anomaly : IfDecision::Normal;
    return result;
}

}  // namespace auditcopilot
