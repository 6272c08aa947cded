#pragma once
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "auditcopilot/eval.hpp"
#include "auditcopilot/gateway.hpp"
#include "auditcopilot/iforest.hpp"
#include "auditcopilot/jet.hpp"
#include "auditcopilot/ledger.hpp"
#include "auditcopilot/prompt.hpp"
#include "auditcopilot/stats.hpp"
#include "auditcopilot/synthgen.hpp"

namespace auditcopilot {

// Declarative run configuration for the end-to-end workflow. A run executes
// stats -> isolation forest -> prompts -> gateway -> parse -> evaluate and
// persists every artifact (config echo, prompts, raw responses, verdicts,
// report) under one run directory, so a run is reconstructible from that
// directory alone. With the mock or replay backend the verdict files are
// byte-identical across runs for the same config and seed.

enum class Granularity { Posting, Transaction };

const char* granularity_name(Granularity g);
Granularity granularity_from_name(const std::string& name);

struct RunConfig {
    std::string dataset_path;
    LedgerFormat format = LedgerFormat::Csv;
    std::optional<GenConfig> gen;  // generate instead of loading when set
    std::string labels_path;       // ground-truth sidecar
    bool pseudo_label_missing = false;  // label via JET when no labels given

    JetConfig jet;
    IForestConfig iforest;
    PromptVariant variant;
    BackendConfig backend;
    Granularity granularity = Granularity::Posting;

    std::string output_dir = "runs";
    std::string run_name;  // pinned run directory name; empty = timestamped
    Averaging metric_averaging = Averaging::PositiveClass;
    bool strict = true;      // file ingestion mode
    bool fail_fast = false;
    std::string method_name;  // report label; defaults to the model name
    uint64_t seed = 42;       // pins generator and isolation forest seeds
};

RunConfig run_config_from_json(const nlohmann::json& j);
// Secrets never appear in the echo: only the auth env var NAME is recorded.
nlohmann::json run_config_to_json(const RunConfig& config);

struct DetectResult {
    std::filesystem::path run_dir;
    std::vector<ModelVerdict> verdicts;
    bool evaluated = false;
    EvalReport report;  // valid when evaluated
};

DetectResult run_detect(const RunConfig& config);

struct AblateResult {
    std::filesystem::path run_dir;
    std::vector<EvalReport> reports;
    Comparison comparison;
};

// Runs the AuditCopilot, w/o IF and w/o Stats+IF variants over the same
// dataset and backend, then emits the side-by-side comparison.
AblateResult run_ablate(const RunConfig& config);

// Deterministic artifact writers shared with the CLI.
void write_verdicts_jsonl(const std::vector<ModelVerdict>& verdicts,
                          const std::filesystem::path& path);
void write_prompts_jsonl(const std::vector<PromptBundle>& bundles,
                         const std::filesystem::path& path);

}  // namespace auditcopilot
