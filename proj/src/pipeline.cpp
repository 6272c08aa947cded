#include "auditcopilot/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

namespace auditcopilot {
namespace {

namespace fs = std::filesystem;

std::string timestamp_name(const char* prefix) {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s-%04d%02d%02d-%02d%02d%02d", prefix, tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

fs::path prepare_run_dir(const RunConfig& config, const char* prefix) {
    fs::path dir = fs::path(config.output_dir) /
                   (config.run_name.empty() ? timestamp_name(prefix) : config.run_name);
    fs::create_directories(dir);
    return dir;
}

struct PreparedData {
    Dataset dataset;
    std::optional<LabeledDataset> generated;
};

PreparedData prepare_dataset(const RunConfig& config, const fs::path& run_dir) {
    PreparedData out;
    if (config.gen) {
        GenConfig gen = *config.gen;
        gen.seed = config.seed;
        out.generated = generate(gen);
        out.dataset = out.generated->dataset;
        save_dataset(out.dataset, (run_dir / "ledger.csv").string(), LedgerFormat::Csv);
        save_labels(label_rows(*out.generated), (run_dir / "labels.csv").string());
        return out;
    }

    LoadOptions opts;
    opts.strict = config.strict;
    out.dataset = load_dataset(config.dataset_path, config.format, opts);
    if (!config.labels_path.empty()) {
        for (const auto& row : load_labels(config.labels_path)) {
            if (!out.dataset.groups.count(row.posting_id))
                throw MalformedRowError(0, "label for unknown posting '" + row.posting_id + "'");
            out.dataset.labels[row.posting_id] = row.label;
        }
        out.dataset.label_provenance = LabelProvenance::GroundTruth;
    } else if (config.pseudo_label_missing) {
        out.dataset = pseudo_label(out.dataset, config.jet);
    }
    return out;
}

std::string confidence_text(const std::optional<double>& confidence) {
    if (!confidence) return {};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *confidence);
    return buf;
}

struct StageOutputs {
    DatasetStats stats;
    IForestResult iforest;
    std::vector<PromptBundle> bundles;
};

StageOutputs run_stages(const Dataset& dataset, const RunConfig& config) {
    StageOutputs out;
    IForestConfig if_config = config.iforest;
    if_config.seed = config.seed;
    out.iforest = fit_score(dataset, if_config);
    out.stats = compute_stats(dataset, &out.iforest);

    bool synthetic = config.variant.kind == PromptVariantKind::SyntheticFlags;
    if (config.granularity == Granularity::Posting) {
        for (const auto& [pid, group] : dataset.groups) {
            if (synthetic) {
                JetFlags flags = compute_flags(group, config.jet, out.stats);
                out.bundles.push_back(
                    build_prompt(group, &out.stats, &out.iforest, &flags, config.variant));
            } else {
                out.bundles.push_back(
                    build_prompt(group, &out.stats, &out.iforest, nullptr, config.variant));
            }
        }
    } else {
        // Transaction granularity: one prompt per ledger line, in file order.
        // Flags and IF hints come from the line's posting group.
        for (const auto& entry : dataset.entries) {
            const PostingGroup& group = dataset.groups.at(entry.posting_id);
            PromptBundle bundle;
            if (synthetic) {
                JetFlags flags = compute_flags(group, config.jet, out.stats);
                bundle = build_prompt(entry, &out.stats, &out.iforest, &flags, config.variant);
            } else {
                bundle = build_prompt(entry, &out.stats, &out.iforest, nullptr, config.variant);
            }
            bundle.posting_id = entry.entry_id;  // verdict key at this granularity
            out.bundles.push_back(std::move(bundle));
        }
    }
    return out;
}

std::map<std::string, int> effective_labels(const Dataset& dataset, const RunConfig& config) {
    if (config.granularity == Granularity::Posting) return dataset.labels;
    std::map<std::string, int> out;
    for (const auto& entry : dataset.entries) {
        auto it = dataset.labels.find(entry.posting_id);
        if (it != dataset.labels.end()) out[entry.entry_id] = it->second;
    }
    return out;
}

EvalReport evaluate_verdicts(const std::vector<ModelVerdict>& verdicts,
                             const std::map<std::string, int>& labels, const RunConfig& config,
                             const std::string& method_name) {
    std::map<std::string, int> predictions;
    size_t excluded = 0;
    for (const auto& v : verdicts) {
        if (v.parse_status == ParseStatus::Failed) {
            ++excluded;
            continue;
        }
        predictions[v.posting_id] = v.anomaly;
    }

    EvalReport report;
    report.method_name = method_name;
    report.variant = variant_name(config.variant.kind);
    report.counts = confusion(predictions, labels, config.strict);
    report.metrics_macro = metrics(report.counts, Averaging::Macro);
    report.metrics_positive = metrics(report.counts, Averaging::PositiveClass);
    report.excluded = excluded;
    report.label_fingerprint = label_fingerprint(labels);
    report.run_metadata = run_config_to_json(config);
    return report;
}

DetectResult detect_into(const RunConfig& config, const fs::path& run_dir) {
    fs::create_directories(run_dir);
    write_report(run_config_to_json(config), (run_dir / "config.json").string());

    PreparedData data = prepare_dataset(config, run_dir);
    StageOutputs stages = run_stages(data.dataset, config);
    write_prompts_jsonl(stages.bundles, run_dir / "prompts.jsonl");

    std::vector<ModelVerdict> verdicts =
        infer_batch(stages.bundles, config.backend, BatchOptions{config.fail_fast});

    // Raw responses double as a replay fixture for regression runs.
    std::vector<std::pair<std::string, std::string>> fixture;
    fixture.reserve(verdicts.size());
    for (size_t i = 0; i < verdicts.size(); ++i)
        fixture.emplace_back(replay_key(stages.bundles[i], config.backend.model_name),
                             verdicts[i].raw_response);
    save_replay_fixture(fixture, (run_dir / "responses.jsonl").string());
    write_verdicts_jsonl(verdicts, run_dir / "verdicts.jsonl");

    DetectResult result;
    result.run_dir = run_dir;
    result.verdicts = std::move(verdicts);

    std::map<std::string, int> labels = effective_labels(data.dataset, config);
    if (!labels.empty()) {
        std::string method = config.method_name.empty() ? config.backend.model_name
                                                        : config.method_name;
        result.report = evaluate_verdicts(result.verdicts, labels, config, method);
        result.evaluated = true;
        write_report(report_to_json(result.report), (run_dir / "report.json").string());
        std::ofstream text(run_dir / "report.txt", std::ios::binary);
        text << report_to_text(result.report);
    }
    return result;
}

}  // namespace

const char* granularity_name(Granularity g) {
    return g == Granularity::Posting ? "posting" : "transaction";
}

Granularity granularity_from_name(const std::string& name) {
    if (name == "posting") return Granularity::Posting;
    if (name == "transaction") return Granularity::Transaction;
    throw std::invalid_argument("unknown granularity '" + name + "'");
}

void write_verdicts_jsonl(const std::vector<ModelVerdict>& verdicts, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& v : verdicts) {
        out << "{\"posting_id\":\"" << json_escape(v.posting_id) << "\",\"anomaly\":" << v.anomaly;
        if (v.confidence) out << ",\"confidence\":" << confidence_text(v.confidence);
        out << ",\"explanation\":\"" << json_escape(v.explanation) << "\",\"parse_status\":\""
            << parse_status_name(v.parse_status) << "\"}\n";
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_prompts_jsonl(const std::vector<PromptBundle>& bundles, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& b : bundles) {
        out << "{\"posting_id\":\"" << json_escape(b.posting_id) << "\",\"variant\":\""
            << variant_name(b.variant.kind) << "\",\"template_version\":\""
            << json_escape(b.variant.template_version) << "\",\"system\":\""
            << json_escape(b.system_text) << "\",\"instance\":\"" << json_escape(b.instance_text)
            << "\"}\n";
    }
    if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json run_config_to_json(const RunConfig& config) {
    nlohmann::json j;
    j["dataset_path"] = config.dataset_path;
    j["format"] = config.format == LedgerFormat::Csv ? "csv" : "jsonl";
    if (config.gen) {
        const GenConfig& g = *config.gen;
        nlohmann::json weights;
        for (const auto& [a, w] : g.archetype_weights) weights[archetype_name(a)] = w;
        j["gen"] = {{"seed", g.seed},
                    {"n_postings", g.n_postings},
                    {"anomaly_rate", g.anomaly_rate},
                    {"n_users", g.n_users},
                    {"n_accounts", g.n_accounts},
                    {"date_start", format_date(g.date_start)},
                    {"date_end", format_date(g.date_end)},
                    {"amount_log_mu", g.amount_log_mu},
                    {"amount_log_sigma", g.amount_log_sigma},
                    {"working_start", format_time_minutes(g.working_start_min)},
                    {"working_end", format_time_minutes(g.working_end_min)},
                    {"archetype_weights", weights},
                    {"currency", g.currency}};
    }
    j["labels_path"] = config.labels_path;
    j["pseudo_label_missing"] = config.pseudo_label_missing;
    j["jet"] = {{"working_start", format_time_minutes(config.jet.working_start_min)},
                {"working_end", format_time_minutes(config.jet.working_end_min)},
                {"top_n_count", config.jet.top_n_count},
                {"high_cash_percentile", config.jet.high_cash_percentile},
                {"cash_account_ids", config.jet.cash_account_ids}};
    j["iforest"] = {{"n_trees", config.iforest.n_trees},
                    {"subsample_size", config.iforest.subsample_size},
                    {"seed", config.iforest.seed},
                    {"contamination", config.iforest.contamination},
                    {"threshold_is_absolute", config.iforest.threshold_is_absolute},
                    {"feature_spec", config.iforest.feature_spec.empty()
                                         ? default_feature_spec()
                                         : config.iforest.feature_spec}};
    j["variant"] = variant_name(config.variant.kind);
    j["template_version"] = config.variant.template_version;
    j["backend"] = {{"kind", backend_kind_name(config.backend.kind)},
                    {"endpoint_url", config.backend.endpoint_url},
                    {"model_name", config.backend.model_name},
                    {"temperature", config.backend.temperature},
                    {"max_output_tokens", config.backend.max_output_tokens},
                    {"timeout_seconds", config.backend.timeout_seconds},
                    {"max_retries", config.backend.max_retries},
                    {"max_in_flight", config.backend.max_in_flight},
                    {"auth_token_env_var", config.backend.auth_token_env_var},
                    {"replay_path", config.backend.replay_path},
                    {"allow_repair", config.backend.allow_repair}};
    j["granularity"] = granularity_name(config.granularity);
    j["output_dir"] = config.output_dir;
    j["run_name"] = config.run_name;
    j["metric_averaging"] = averaging_name(config.metric_averaging);
    j["strict"] = config.strict;
    j["fail_fast"] = config.fail_fast;
    j["method_name"] = config.method_name;
    j["seed"] = config.seed;
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.dataset_path = j.value("dataset_path", c.dataset_path);
    if (j.contains("format"))
        c.format = j["format"] == "jsonl" ? LedgerFormat::Jsonl : LedgerFormat::Csv;
    if (j.contains("gen") && !j["gen"].is_null()) {
        const nlohmann::json& g = j["gen"];
        GenConfig gen;
        gen.seed = g.value("seed", gen.seed);
        gen.n_postings = g.value("n_postings", gen.n_postings);
        gen.anomaly_rate = g.value("anomaly_rate", gen.anomaly_rate);
        gen.n_users = g.value("n_users", gen.n_users);
        gen.n_accounts = g.value("n_accounts", gen.n_accounts);
        if (g.contains("date_start")) gen.date_start = parse_date(g["date_start"].get<std::string>());
        if (g.contains("date_end")) gen.date_end = parse_date(g["date_end"].get<std::string>());
        gen.amount_log_mu = g.value("amount_log_mu", gen.amount_log_mu);
        gen.amount_log_sigma = g.value("amount_log_sigma", gen.amount_log_sigma);
        if (g.contains("working_start"))
            gen.working_start_min = parse_time_minutes(g["working_start"].get<std::string>());
        if (g.contains("working_end"))
            gen.working_end_min = parse_time_minutes(g["working_end"].get<std::string>());
        if (g.contains("archetype_weights")) {
            gen.archetype_weights.clear();
            for (const auto& [name, w] : g["archetype_weights"].items())
                gen.archetype_weights[archetype_from_name(name)] = w.get<double>();
        }
        gen.currency = g.value("currency", gen.currency);
        c.gen = gen;
    }
    c.labels_path = j.value("labels_path", c.labels_path);
    c.pseudo_label_missing = j.value("pseudo_label_missing", c.pseudo_label_missing);
    if (j.contains("jet")) {
        const nlohmann::json& g = j["jet"];
        if (g.contains("working_start"))
            c.jet.working_start_min = parse_time_minutes(g["working_start"].get<std::string>());
        if (g.contains("working_end"))
            c.jet.working_end_min = parse_time_minutes(g["working_end"].get<std::string>());
        c.jet.top_n_count = g.value("top_n_count", c.jet.top_n_count);
        c.jet.high_cash_percentile = g.value("high_cash_percentile", c.jet.high_cash_percentile);
        if (g.contains("cash_account_ids"))
            c.jet.cash_account_ids = g["cash_account_ids"].get<std::set<std::string>>();
    }
    if (j.contains("iforest")) {
        const nlohmann::json& g = j["iforest"];
        c.iforest.n_trees = g.value("n_trees", c.iforest.n_trees);
        c.iforest.subsample_size = g.value("subsample_size", c.iforest.subsample_size);
        c.iforest.seed = g.value("seed", c.iforest.seed);
        c.iforest.contamination = g.value("contamination", c.iforest.contamination);
        c.iforest.threshold_is_absolute =
            g.value("threshold_is_absolute", c.iforest.threshold_is_absolute);
        if (g.contains("feature_spec"))
            c.iforest.feature_spec = g["feature_spec"].get<std::vector<std::string>>();
    }
    if (j.contains("variant")) c.variant.kind = variant_from_name(j["variant"].get<std::string>());
    if (j.contains("backend")) {
        const nlohmann::json& g = j["backend"];
        if (g.contains("kind")) c.backend.kind = backend_kind_from_name(g["kind"].get<std::string>());
        c.backend.endpoint_url = g.value("endpoint_url", c.backend.endpoint_url);
        c.backend.model_name = g.value("model_name", c.backend.model_name);
        c.backend.temperature = g.value("temperature", c.backend.temperature);
        c.backend.max_output_tokens = g.value("max_output_tokens", c.backend.max_output_tokens);
        c.backend.timeout_seconds = g.value("timeout_seconds", c.backend.timeout_seconds);
        c.backend.max_retries = g.value("max_retries", c.backend.max_retries);
        c.backend.max_in_flight = g.value("max_in_flight", c.backend.max_in_flight);
        c.backend.auth_token_env_var = g.value("auth_token_env_var", c.backend.auth_token_env_var);
        c.backend.replay_path = g.value("replay_path", c.backend.replay_path);
        c.backend.allow_repair = g.value("allow_repair", c.backend.allow_repair);
    }
    if (j.contains("granularity"))
        c.granularity = granularity_from_name(j["granularity"].get<std::string>());
    c.output_dir = j.value("output_dir", c.output_dir);
    c.run_name = j.value("run_name", c.run_name);
    if (j.contains("metric_averaging"))
        c.metric_averaging =
            j["metric_averaging"] == "macro" ? Averaging::Macro : Averaging::PositiveClass;
    c.strict = j.value("strict", c.strict);
    c.fail_fast = j.value("fail_fast", c.fail_fast);
    c.method_name = j.value("method_name", c.method_name);
    c.seed = j.value("seed", c.seed);
    return c;
}

DetectResult run_detect(const RunConfig& config) {
    fs::path run_dir = prepare_run_dir(config, "detect");
    return detect_into(config, run_dir);
}

AblateResult run_ablate(const RunConfig& config) {
    fs::path run_dir = prepare_run_dir(config, "ablate");

    AblateResult result;
    result.run_dir = run_dir;
    std::vector<std::pair<std::string, std::string>> merged_fixture;

    for (PromptVariantKind kind : {PromptVariantKind::AuditCopilot, PromptVariantKind::NoIF,
                                   PromptVariantKind::NoStatsNoIF}) {
        RunConfig sub = config;
        sub.variant.kind = kind;
        sub.output_dir = run_dir.string();
        sub.run_name = variant_name(kind);
        sub.method_name = (config.method_name.empty() ? config.backend.model_name
                                                      : config.method_name);
        DetectResult detect = detect_into(sub, run_dir / variant_name(kind));
        if (!detect.evaluated)
            throw std::invalid_argument("ablate requires labels (ground truth or pseudo-labels)");
        result.reports.push_back(detect.report);

        for (const auto& [key, raw] : load_replay_fixture(
                 (run_dir / variant_name(kind) / "responses.jsonl").string()))
            merged_fixture.emplace_back(key, raw);
    }

    save_replay_fixture(merged_fixture, (run_dir / "responses.jsonl").string());
    result.comparison = compare(result.reports, config.metric_averaging);
    write_report(result.comparison.machine, (run_dir / "comparison.json").string());
    std::ofstream text(run_dir / "comparison.txt", std::ios::binary);
    text << result.comparison.text;
    return result;
}

}  // namespace auditcopilot
