// auditcopilot — journal-entry anomaly detection workbench.
//
// Subcommands mirror the pipeline stages: generate, stats, jet, iforest,
// prompt, detect, evaluate, ablate. A JSON run configuration (--config) seeds
// every option; command-line flags win over the file.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "auditcopilot/pipeline.hpp"

using namespace auditcopilot;

namespace {

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json j;
    in >> j;
    return run_config_from_json(j);
}

LedgerFormat format_from_name(const std::string& name) {
    if (name == "csv") return LedgerFormat::Csv;
    if (name == "jsonl") return LedgerFormat::Jsonl;
    throw std::invalid_argument("unknown format '" + name + "'");
}

Dataset load_for(const RunConfig& config) {
    LoadOptions opts;
    opts.strict = config.strict;
    return load_dataset(config.dataset_path, config.format, opts);
}

void write_text(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

// Shared flag block for subcommands that execute the pipeline.
struct CommonFlags {
    std::string config_path;
    std::string dataset;
    std::string format;
    std::string labels;
    bool pseudo_label = false;
    std::string variant;
    std::string backend;
    std::string endpoint;
    std::string model;
    std::string replay_path;
    std::string auth_env;
    int max_in_flight = 0;
    bool strict_json = false;
    bool strict_files = false;
    bool lenient = false;
    bool fail_fast = false;
    std::string granularity;
    std::string averaging;
    std::string method;
    std::string output_dir;
    std::string run_name;
    uint64_t seed = 0;
    double contamination = 0.0;
    size_t gen_postings = 0;
    double gen_rate = -1.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration JSON");
        cmd->add_option("--dataset", dataset, "ledger file to analyze");
        cmd->add_option("--format", format, "ledger format: csv or jsonl");
        cmd->add_option("--labels", labels, "ground-truth labels sidecar CSV");
        cmd->add_flag("--pseudo-label", pseudo_label, "label unlabeled data with JET verdicts");
        cmd->add_option("--variant", variant,
                        "prompt variant: audit-copilot, no-if, no-stats-no-if, synthetic-flags");
        cmd->add_option("--backend", backend, "model backend: http, mock, replay");
        cmd->add_option("--endpoint", endpoint, "chat-completion endpoint URL (http backend)");
        cmd->add_option("--model", model, "model name sent to the backend");
        cmd->add_option("--replay", replay_path, "replay fixture JSONL (replay backend)");
        cmd->add_option("--auth-env", auth_env, "env var holding the backend auth token");
        cmd->add_option("--max-in-flight", max_in_flight, "bounded request parallelism");
        cmd->add_flag("--strict-json", strict_json, "fail verdicts on any JSON deviation");
        cmd->add_flag("--strict", strict_files, "fail on unknown ledger columns (default)");
        cmd->add_flag("--lenient", lenient, "ignore unknown ledger columns");
        cmd->add_flag("--fail-fast", fail_fast, "abort the batch on the first transport error");
        cmd->add_option("--granularity", granularity, "posting or transaction");
        cmd->add_option("--averaging", averaging, "metric averaging: macro or positive");
        cmd->add_option("--method", method, "method name used in reports");
        cmd->add_option("--output-dir", output_dir, "parent directory for run artifacts");
        cmd->add_option("--run-name", run_name, "pinned run directory name");
        cmd->add_option("--seed", seed, "master seed for generator and isolation forest");
        cmd->add_option("--contamination", contamination, "isolation forest contamination");
        cmd->add_option("--generate", gen_postings, "generate N synthetic postings instead of loading");
        cmd->add_option("--anomaly-rate", gen_rate, "anomaly rate for --generate");
    }

    RunConfig to_run_config(const CLI::App* cmd) const {
        RunConfig c = load_run_config(config_path);
        if (cmd->count("--dataset")) c.dataset_path = dataset;
        if (cmd->count("--format")) c.format = format_from_name(format);
        if (cmd->count("--labels")) c.labels_path = labels;
        if (cmd->count("--pseudo-label")) c.pseudo_label_missing = true;
        if (cmd->count("--variant")) c.variant.kind = variant_from_name(variant);
        if (cmd->count("--backend")) c.backend.kind = backend_kind_from_name(backend);
        if (cmd->count("--endpoint")) c.backend.endpoint_url = endpoint;
        if (cmd->count("--model")) c.backend.model_name = model;
        if (cmd->count("--replay")) c.backend.replay_path = replay_path;
        if (cmd->count("--auth-env")) c.backend.auth_token_env_var = auth_env;
        if (cmd->count("--max-in-flight")) c.backend.max_in_flight = max_in_flight;
        if (cmd->count("--strict-json")) c.backend.allow_repair = false;
        if (cmd->count("--strict")) c.strict = true;
        if (cmd->count("--lenient")) c.strict = false;
        if (cmd->count("--fail-fast")) c.fail_fast = true;
        if (cmd->count("--granularity")) c.granularity = granularity_from_name(granularity);
        if (cmd->count("--averaging"))
            c.metric_averaging = averaging == "macro" ? Averaging::Macro : Averaging::PositiveClass;
        if (cmd->count("--method")) c.method_name = method;
        if (cmd->count("--output-dir")) c.output_dir = output_dir;
        if (cmd->count("--run-name")) c.run_name = run_name;
        if (cmd->count("--seed")) c.seed = seed;
        if (cmd->count("--contamination")) c.iforest.contamination = contamination;
        if (cmd->count("--generate")) {
            GenConfig gen = c.gen.value_or(GenConfig{});
            gen.n_postings = gen_postings;
            if (cmd->count("--anomaly-rate")) gen.anomaly_rate = gen_rate;
            c.gen = gen;
            c.jet = matching_jet_config(gen);
        }
        return c;
    }
};

int cmd_generate(const CommonFlags& flags, const CLI::App* cmd, const std::string& out_path,
                 const std::string& labels_out) {
    RunConfig run = flags.to_run_config(cmd);
    GenConfig gen = run.gen.value_or(GenConfig{});
    gen.seed = run.seed;  // master seed wins, matching the detect pipeline
    if (cmd->count("--generate")) gen.n_postings = flags.gen_postings;
    if (cmd->count("--anomaly-rate")) gen.anomaly_rate = flags.gen_rate;

    LabeledDataset data = generate(gen);
    save_dataset(data.dataset, out_path, run.format);
    if (!labels_out.empty()) save_labels(label_rows(data), labels_out);

    GenSummary s = describe(data);
    std::cout << "postings:  " << s.postings << "\n"
              << "entries:   " << s.entries << "\n"
              << "anomalies: " << s.anomalies << "\n"
              << "users:     " << s.users << "\n"
              << "accounts:  " << s.accounts << "\n";
    for (const auto& [name, count] : s.archetype_histogram)
        std::cout << "archetype " << name << ": " << count << "\n";
    return 0;
}

int cmd_stats(const CommonFlags& flags, const CLI::App* cmd, bool with_iforest,
              const std::string& out_path) {
    RunConfig run = flags.to_run_config(cmd);
    Dataset ds = load_for(run);
    DatasetStats stats;
    if (with_iforest) {
        IForestConfig ifc = run.iforest;
        ifc.seed = run.seed;
        IForestResult result = fit_score(ds, ifc);
        stats = compute_stats(ds, &result);
    } else {
        stats = compute_stats(ds);
    }
    write_text(out_path, stats_to_json(stats).dump(2) + "\n");
    return 0;
}

int cmd_jet(const CommonFlags& flags, const CLI::App* cmd, const std::string& out_path) {
    RunConfig run = flags.to_run_config(cmd);
    Dataset ds = load_for(run);
    DatasetStats stats = compute_stats(ds);

    std::string csv = "posting_id,promptly,weekend,nwh,top_n,high_cash,triggered,verdict\n";
    for (const auto& [pid, group] : ds.groups) {
        JetFlags f = compute_flags(group, run.jet, stats);
        csv += pid + "," + std::to_string(f.promptly) + "," + std::to_string(f.weekend) + "," +
               std::to_string(f.nwh) + "," + std::to_string(f.top_n) + "," +
               std::to_string(f.high_cash) + "," + std::to_string(f.triggered_count) + "," +
               std::to_string(f.verdict) + "\n";
    }
    write_text(out_path, csv);
    return 0;
}

int cmd_iforest(const CommonFlags& flags, const CLI::App* cmd, const std::string& out_path,
                const std::string& meta_path) {
    RunConfig run = flags.to_run_config(cmd);
    Dataset ds = load_for(run);
    IForestConfig ifc = run.iforest;
    ifc.seed = run.seed;
    IForestResult result = fit_score(ds, ifc);

    std::string csv = "posting_id,score,decision\n";
    for (const auto& [pid, score] : result.scores) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", score);
        csv += pid + "," + buf + "," +
               (result.decisions.at(pid) == IfDecision::Anomaly ? "1" : "0") + "\n";
    }
    write_text(out_path, csv);

    nlohmann::json meta;
    meta["config"] = {{"n_trees", ifc.n_trees},
                      {"subsample_size", ifc.subsample_size},
                      {"seed", ifc.seed},
                      {"contamination", ifc.contamination},
                      {"threshold_is_absolute", ifc.threshold_is_absolute}};
    meta["threshold_used"] = result.threshold_used;
    meta["anomaly_count"] = result.anomaly_count();
    meta["dropped_features"] = result.dropped_features;
    meta["warnings"] = result.warnings;
    write_text(meta_path.empty() ? "-" : meta_path, meta.dump(2) + "\n");
    return 0;
}

int cmd_prompt(const CommonFlags& flags, const CLI::App* cmd, const std::string& posting) {
    RunConfig run = flags.to_run_config(cmd);
    Dataset ds = load_for(run);
    IForestConfig ifc = run.iforest;
    ifc.seed = run.seed;
    IForestResult iforest = fit_score(ds, ifc);
    DatasetStats stats = compute_stats(ds, &iforest);

    std::string pid = posting.empty() ? ds.groups.begin()->first : posting;
    auto it = ds.groups.find(pid);
    if (it == ds.groups.end()) throw std::invalid_argument("unknown posting '" + pid + "'");

    PromptBundle bundle;
    if (run.variant.kind == PromptVariantKind::SyntheticFlags) {
        JetFlags f = compute_flags(it->second, run.jet, stats);
        bundle = build_prompt(it->second, &stats, &iforest, &f, run.variant);
    } else {
        bundle = build_prompt(it->second, &stats, &iforest, nullptr, run.variant);
    }
    std::cout << "--- system (" << variant_name(bundle.variant.kind) << ", template "
              << bundle.variant.template_version << ") ---\n"
              << bundle.system_text << "\n--- instance ---\n"
              << bundle.instance_text << "\n";
    return 0;
}

int cmd_detect(const CommonFlags& flags, const CLI::App* cmd) {
    RunConfig run = flags.to_run_config(cmd);
    DetectResult result = run_detect(run);
    std::cout << "run directory: " << result.run_dir.string() << "\n";
    if (result.evaluated) std::cout << report_to_text(result.report);
    else std::cout << "no labels available; wrote verdicts without evaluation\n";
    return 0;
}

int cmd_evaluate(const std::string& verdicts_path, const std::string& labels_path,
                 const std::string& method, const std::string& out_path) {
    std::ifstream in(verdicts_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + verdicts_path);
    std::map<std::string, int> predictions;
    size_t excluded = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json v = nlohmann::json::parse(line);
        if (v.value("parse_status", "failed") == std::string("failed")) {
            ++excluded;
            continue;
        }
        predictions[v.at("posting_id").get<std::string>()] = v.at("anomaly").get<int>();
    }

    std::map<std::string, int> labels;
    for (const auto& row : load_labels(labels_path)) labels[row.posting_id] = row.label;

    EvalReport report;
    report.method_name = method.empty() ? "verdicts" : method;
    report.counts = confusion(predictions, labels);
    report.metrics_macro = metrics(report.counts, Averaging::Macro);
    report.metrics_positive = metrics(report.counts, Averaging::PositiveClass);
    report.excluded = excluded;
    report.label_fingerprint = label_fingerprint(labels);

    if (!out_path.empty()) write_report(report_to_json(report), out_path);
    std::cout << report_to_text(report);
    return 0;
}

int cmd_ablate(const CommonFlags& flags, const CLI::App* cmd) {
    RunConfig run = flags.to_run_config(cmd);
    AblateResult result = run_ablate(run);
    std::cout << "run directory: " << result.run_dir.string() << "\n" << result.comparison.text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"journal-entry anomaly detection workbench"};
    app.require_subcommand(1);

    CommonFlags generate_flags, stats_flags, jet_flags, iforest_flags, prompt_flags, detect_flags,
        ablate_flags;

    auto* generate_cmd = app.add_subcommand("generate", "emit a synthetic labeled ledger");
    generate_flags.attach(generate_cmd);
    std::string gen_out = "ledger.csv", gen_labels_out = "labels.csv";
    generate_cmd->add_option("--out", gen_out, "ledger output path");
    generate_cmd->add_option("--labels-out", gen_labels_out, "labels sidecar output path");

    auto* stats_cmd = app.add_subcommand("stats", "dataset context statistics as JSON");
    stats_flags.attach(stats_cmd);
    bool stats_with_if = false;
    std::string stats_out;
    stats_cmd->add_flag("--with-iforest", stats_with_if, "include isolation forest summary");
    stats_cmd->add_option("--out", stats_out, "output path (default stdout)");

    auto* jet_cmd = app.add_subcommand("jet", "per-posting JET flag rows as CSV");
    jet_flags.attach(jet_cmd);
    std::string jet_out;
    jet_cmd->add_option("--out", jet_out, "output path (default stdout)");

    auto* iforest_cmd = app.add_subcommand("iforest", "isolation forest scores as CSV");
    iforest_flags.attach(iforest_cmd);
    std::string if_out, if_meta;
    iforest_cmd->add_option("--out", if_out, "scores output path (default stdout)");
    iforest_cmd->add_option("--meta-out", if_meta, "metadata JSON output path");

    auto* prompt_cmd = app.add_subcommand("prompt", "print a prompt bundle for inspection");
    prompt_flags.attach(prompt_cmd);
    std::string prompt_posting;
    prompt_cmd->add_option("--posting", prompt_posting, "posting ID (default: first)");

    auto* detect_cmd = app.add_subcommand("detect", "full detection pipeline");
    detect_flags.attach(detect_cmd);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "score a verdict file against labels");
    std::string eval_verdicts, eval_labels, eval_method, eval_out;
    evaluate_cmd->add_option("--verdicts", eval_verdicts, "verdicts.jsonl path")->required();
    evaluate_cmd->add_option("--labels", eval_labels, "labels sidecar CSV")->required();
    evaluate_cmd->add_option("--method", eval_method, "method name for the report");
    evaluate_cmd->add_option("--out", eval_out, "report JSON output path");

    auto* ablate_cmd = app.add_subcommand("ablate", "run the three prompt-variant ablation");
    ablate_flags.attach(ablate_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate_cmd->parsed())
            return cmd_generate(generate_flags, generate_cmd, gen_out, gen_labels_out);
        if (stats_cmd->parsed()) return cmd_stats(stats_flags, stats_cmd, stats_with_if, stats_out);
        if (jet_cmd->parsed()) return cmd_jet(jet_flags, jet_cmd, jet_out);
        if (iforest_cmd->parsed()) return cmd_iforest(iforest_flags, iforest_cmd, if_out, if_meta);
        if (prompt_cmd->parsed()) return cmd_prompt(prompt_flags, prompt_cmd, prompt_posting);
        if (detect_cmd->parsed()) return cmd_detect(detect_flags, detect_cmd);
        if (evaluate_cmd->parsed())
            return cmd_evaluate(eval_verdicts, eval_labels, eval_method, eval_out);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_flags, ablate_cmd);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
