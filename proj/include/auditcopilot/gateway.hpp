#pragma once
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "auditcopilot/prompt.hpp"

namespace auditcopilot {

// Sends prompt bundles to a chat-completion backend and parses the responses
// into strict verdicts. Three backends share one interface: a live HTTP
// server speaking the common chat-completion JSON protocol, a deterministic
// mock that applies the two-or-more-flags rule (or the Isolation Forest hint
// for vanilla prompts), and a replay cache keyed by prompt content hash.

enum class BackendKind { Http, MockRuleOracle, Replay };

const char* backend_kind_name(BackendKind kind);
BackendKind backend_kind_from_name(const std::string& name);

struct BackendConfig {
    BackendKind kind = BackendKind::MockRuleOracle;
    std::string endpoint_url;  // Http only, e.g. http://127.0.0.1:8080/v1/chat/completions
    std::string model_name = "mock-rule-oracle";
    double temperature = 0.0;  // deterministic by default
    int max_output_tokens = 256;
    double timeout_seconds = 30.0;
    int max_retries = 2;
    int max_in_flight = 4;
    std::string auth_token_env_var;  // name of the env var holding the secret
    std::string replay_path;         // Replay only: fixture JSONL
    bool allow_repair = true;        // false = strict JSON, any deviation fails
};

enum class ParseStatus { Clean, Repaired, Failed };

const char* parse_status_name(ParseStatus status);

struct ModelVerdict {
    std::string posting_id;
    int anomaly = 0;
    std::optional<double> confidence;  // in [0,1] when present
    std::string explanation;
    std::string raw_response;
    ParseStatus parse_status = ParseStatus::Failed;
    double latency_ms = 0.0;
};

enum class ParseDialect { Vanilla, Synthetic };

struct ParsedVerdict {
    int anomaly = 0;
    std::optional<double> confidence;
    std::string explanation;
    ParseStatus status = ParseStatus::Failed;
};

// Synthetic dialect strips a trailing <|endofanalysis|> terminator and
// accepts the optional confidence field. With repair enabled, the first
// balanced {...} object carrying an "anomaly" key is extracted from
// surrounding prose and near-miss anomaly encodings (true/false, "1", 1.0)
// are normalized; both cases are marked Repaired. anomaly values other than
// 0/1 never parse.
ParsedVerdict parse_verdict(const std::string& raw, ParseDialect dialect, bool allow_repair = true);

class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

class ReplayMissError : public std::runtime_error {
public:
    ReplayMissError(const std::string& key, const std::string& posting_id)
        : std::runtime_error("replay miss for posting '" + posting_id + "' (key " + key + ")"),
          key(key), posting_id(posting_id) {}
    std::string key;
    std::string posting_id;
};

class AuthMissingError : public std::runtime_error {
public:
    explicit AuthMissingError(const std::string& env_var)
        : std::runtime_error("auth token environment variable '" + env_var + "' is not set") {}
};

// Model backends are safe for concurrent complete() calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const PromptBundle& bundle) = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

ParseDialect dialect_for(const PromptBundle& bundle);

// Content hash key for replay fixtures: system text, instance text and model
// name, FNV-1a 64 rendered as 16 hex digits.
std::string replay_key(const PromptBundle& bundle, const std::string& model_name);

ModelVerdict infer(const PromptBundle& bundle, const BackendConfig& config);

struct BatchOptions {
    bool fail_fast = false;  // abort the batch on the first transport failure
};

// Bounded parallelism (max_in_flight workers); output order equals input
// order. Per-item transport failures become Failed verdicts unless fail_fast
// is set; replay misses and missing auth always abort the run.
std::vector<ModelVerdict> infer_batch(const std::vector<PromptBundle>& bundles,
                                      const BackendConfig& config, const BatchOptions& opts = {});

// Replay fixtures: JSONL of {"key": ..., "raw_response": ...}.
void save_replay_fixture(const std::vector<std::pair<std::string, std::string>>& rows,
                         const std::string& path);
std::map<std::string, std::string> load_replay_fixture(const std::string& path);

}  // namespace auditcopilot
