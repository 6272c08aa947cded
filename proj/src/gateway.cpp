#include "auditcopilot/gateway.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "auditcopilot/rng.hpp"

namespace auditcopilot {
namespace {

constexpr const char* kTerminator = "<|endofanalysis|>";

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

// Finds balanced {...} spans outside of string literals, starting at `from`.
// Returns the span or npos pair when none is left.
std::pair<size_t, size_t> next_balanced_object(const std::string& text, size_t from) {
    size_t start = text.find('{', from);
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
            } else if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) return {start, i - start + 1};
            }
        }
        start = text.find('{', start + 1);
    }
    return {std::string::npos, 0};
}

// Accepts 0/1 integers as Clean; normalizes booleans, "0"/"1" strings and
// exact-integer floats as Repaired. Everything else is invalid.
bool normalize_anomaly(const nlohmann::json& value, int& anomaly, bool& repaired) {
    if (value.is_number_integer()) {
        int64_t v = value.get<int64_t>();
        if (v == 0 || v == 1) {
            anomaly = static_cast<int>(v);
            return true;
        }
        return false;
    }
    if (value.is_boolean()) {
        anomaly = value.get<bool>() ? 1 : 0;
        repaired = true;
        return true;
    }
    if (value.is_string()) {
        const std::string& s = value.get_ref<const std::string&>();
        if (s == "0" || s == "1") {
            anomaly = s == "1" ? 1 : 0;
            repaired = true;
            return true;
        }
        return false;
    }
    if (value.is_number_float()) {
        double v = value.get<double>();
        if (v == 0.0 || v == 1.0) {
            anomaly = v == 1.0 ? 1 : 0;
            repaired = true;
            return true;
        }
    }
    return false;
}

// Extracts the verdict fields from a parsed object. Returns false when the
// object cannot yield a valid verdict under the given strictness.
bool verdict_from_object(const nlohmann::json& obj, bool allow_repair, bool already_repaired,
                         ParsedVerdict& out) {
    if (!obj.is_object() || !obj.contains("anomaly")) return false;

    bool repaired = already_repaired;
    int anomaly = 0;
    if (!normalize_anomaly(obj.at("anomaly"), anomaly, repaired)) return false;
    if (repaired && !allow_repair) return false;

    ParsedVerdict v;
    v.anomaly = anomaly;

    if (obj.contains("explanation") && obj.at("explanation").is_string()) {
        v.explanation = obj.at("explanation").get<std::string>();
    } else if (allow_repair) {
        v.explanation = obj.contains("explanation") ? obj.at("explanation").dump() : "";
        repaired = true;
    } else {
        return false;
    }

    if (obj.contains("confidence")) {
        const auto& c = obj.at("confidence");
        if (c.is_number() && c.get<double>() >= 0.0 && c.get<double>() <= 1.0) {
            v.confidence = c.get<double>();
        } else if (allow_repair) {
            repaired = true;  // out-of-range or non-numeric confidence dropped
        } else {
            return false;
        }
    }

    v.status = repaired ? ParseStatus::Repaired : ParseStatus::Clean;
    out = v;
    return true;
}

// ---------------------------------------------------------------------------
// Backends

class MockRuleOracleBackend : public Backend {
public:
    std::string complete(const PromptBundle& bundle) override {
        if (bundle.variant.kind == PromptVariantKind::SyntheticFlags)
            return synthetic_response(bundle);
        return vanilla_response(bundle);
    }

private:
    static std::string synthetic_response(const PromptBundle& bundle) {
        auto [pos, len] = next_balanced_object(bundle.instance_text, 0);
        if (pos == std::string::npos)
            return std::string("{\"anomaly\": 0, \"confidence\": 0.50, \"explanation\": "
                               "\"no instance record found\"}") + kTerminator;
        nlohmann::json record = nlohmann::json::parse(bundle.instance_text.substr(pos, len),
                                                      nullptr, false);
        int triggered = 0;
        std::string names;
        auto flag = [&](const char* key, int threshold) {
            if (record.contains(key) && record[key].is_number_integer() &&
                record[key].get<int>() >= threshold) {
                ++triggered;
                if (!names.empty()) names += ", ";
                names += key;
            }
        };
        flag("promptly", 2);
        flag("weekend", 1);
        flag("nwh", 1);
        flag("top_n", 1);
        flag("high_cash", 1);

        int anomaly = triggered >= 2 ? 1 : 0;
        double confidence = 0.55 + 0.08 * triggered;
        std::string explanation = triggered == 0 ? "no flags triggered"
                                                 : "triggered flags: " + names;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f", confidence);
        return "{\"anomaly\": " + std::to_string(anomaly) + ", \"confidence\": " + buf +
               ", \"explanation\": \"" + json_escape(explanation) + "\"}" + kTerminator;
    }

    static std::string vanilla_response(const PromptBundle& bundle) {
        bool hinted = bundle.system_text.find("Isolation Forest Hint: Anomaly") != std::string::npos;
        if (hinted)
            return "{\"anomaly\": 1, \"explanation\": \"isolation forest hint marks this posting "
                   "anomalous\"}";
        return "{\"anomaly\": 0, \"explanation\": \"no anomaly hint; within normal range\"}";
    }
};

class ReplayBackend : public Backend {
public:
    ReplayBackend(std::string model_name, std::map<std::string, std::string> responses)
        : model_name_(std::move(model_name)), responses_(std::move(responses)) {}

    std::string complete(const PromptBundle& bundle) override {
        std::string key = replay_key(bundle, model_name_);
        auto it = responses_.find(key);
        if (it == responses_.end()) throw ReplayMissError(key, bundle.posting_id);
        return it->second;
    }

private:
    std::string model_name_;
    std::map<std::string, std::string> responses_;
};

struct ParsedUrl {
    std::string base;  // scheme://host:port
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw TransportError("endpoint URL must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpBackend : public Backend {
public:
    explicit HttpBackend(const BackendConfig& config) : config_(config) {
        if (config_.endpoint_url.empty())
            throw TransportError("http backend requires an endpoint URL");
        url_ = split_url(config_.endpoint_url);
        if (!config_.auth_token_env_var.empty()) {
            const char* token = std::getenv(config_.auth_token_env_var.c_str());
            if (!token) throw AuthMissingError(config_.auth_token_env_var);
            token_ = token;
        }
    }

    std::string complete(const PromptBundle& bundle) override {
        nlohmann::json request = {
            {"model", config_.model_name},
            {"messages",
             {{{"role", "system"}, {"content", bundle.system_text}},
              {{"role", "user"}, {"content", bundle.instance_text}}}},
            {"temperature", config_.temperature},
            {"max_tokens", config_.max_output_tokens},
        };
        std::string body = request.dump();

        std::string last_error;
        int attempts = config_.max_retries + 1;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0) {
                auto delay = std::chrono::milliseconds(100LL << (attempt - 1));
                if (delay > std::chrono::milliseconds(2000)) delay = std::chrono::milliseconds(2000);
                std::this_thread::sleep_for(delay);
            }
            httplib::Client client(url_.base);
            client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
            client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
            httplib::Headers headers;
            if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

            auto res = client.Post(url_.path, headers, body, "application/json");
            if (!res) {
                last_error = "connection failed: " + httplib::to_string(res.error());
                continue;  // transient
            }
            if (res->status >= 200 && res->status < 300) return extract_content(res->body);
            if (res->status >= 500 || res->status == 429) {
                last_error = "server returned status " + std::to_string(res->status);
                continue;  // transient
            }
            throw TransportError("request rejected with status " + std::to_string(res->status));
        }
        throw TransportError("retries exhausted (" + std::to_string(attempts) + " attempts): " +
                             last_error);
    }

private:
    static std::string extract_content(const std::string& body) {
        nlohmann::json response = nlohmann::json::parse(body, nullptr, false);
        if (response.is_discarded())
            throw TransportError("response body is not valid JSON");
        try {
            return response.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception&) {
            throw TransportError("response lacks choices[0].message.content");
        }
    }

    BackendConfig config_;
    ParsedUrl url_;
    std::string token_;
};

}  // namespace

const char* backend_kind_name(BackendKind kind) {
    switch (kind) {
        case BackendKind::Http: return "http";
        case BackendKind::MockRuleOracle: return "mock";
        case BackendKind::Replay: return "replay";
    }
    return "unknown";
}

BackendKind backend_kind_from_name(const std::string& name) {
    for (BackendKind kind : {BackendKind::Http, BackendKind::MockRuleOracle, BackendKind::Replay})
        if (name == backend_kind_name(kind)) return kind;
    throw std::invalid_argument("unknown backend '" + name + "'");
}

const char* parse_status_name(ParseStatus status) {
    switch (status) {
        case ParseStatus::Clean: return "clean";
        case ParseStatus::Repaired: return "repaired";
        case ParseStatus::Failed: return "failed";
    }
    return "unknown";
}

ParsedVerdict parse_verdict(const std::string& raw, ParseDialect dialect, bool allow_repair) {
    std::string text = trim(raw);
    if (dialect == ParseDialect::Synthetic && text.size() >= std::strlen(kTerminator) &&
        text.compare(text.size() - std::strlen(kTerminator), std::string::npos, kTerminator) == 0)
        text = trim(text.substr(0, text.size() - std::strlen(kTerminator)));

    ParsedVerdict out;
    out.status = ParseStatus::Failed;

    // Clean path: the whole payload is one JSON object.
    nlohmann::json whole = nlohmann::json::parse(text, nullptr, false);
    if (!whole.is_discarded() && whole.is_object()) {
        if (verdict_from_object(whole, allow_repair, false, out)) return out;
        return out;  // object with an anomaly key that fails validation never parses
    }

    if (!allow_repair) return out;

    // Repair path: first balanced object carrying an anomaly key.
    size_t from = 0;
    for (;;) {
        auto [pos, len] = next_balanced_object(text, from);
        if (pos == std::string::npos) break;
        nlohmann::json obj = nlohmann::json::parse(text.substr(pos, len), nullptr, false);
        if (!obj.is_discarded() && obj.is_object() && obj.contains("anomaly")) {
            verdict_from_object(obj, allow_repair, true, out);
            return out;
        }
        from = pos + 1;
    }
    return out;
}

ParseDialect dialect_for(const PromptBundle& bundle) {
    return bundle.variant.kind == PromptVariantKind::SyntheticFlags ? ParseDialect::Synthetic
                                                                    : ParseDialect::Vanilla;
}

std::string replay_key(const PromptBundle& bundle, const std::string& model_name) {
    std::string material = bundle.system_text;
    material.push_back('\x1f');
    material += bundle.instance_text;
    material.push_back('\x1f');
    material += model_name;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(material.data(), material.size())));
    return buf;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    switch (config.kind) {
        case BackendKind::MockRuleOracle: return std::make_unique<MockRuleOracleBackend>();
        case BackendKind::Replay:
            return std::make_unique<ReplayBackend>(config.model_name,
                                                   load_replay_fixture(config.replay_path));
        case BackendKind::Http: return std::make_unique<HttpBackend>(config);
    }
    throw std::invalid_argument("unknown backend kind");
}

namespace {

ModelVerdict infer_with(Backend& backend, const PromptBundle& bundle, const BackendConfig& config) {
    ModelVerdict verdict;
    verdict.posting_id = bundle.posting_id;
    auto t0 = std::chrono::steady_clock::now();
    verdict.raw_response = backend.complete(bundle);
    auto t1 = std::chrono::steady_clock::now();
    verdict.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

    ParsedVerdict parsed = parse_verdict(verdict.raw_response, dialect_for(bundle),
                                         config.allow_repair);
    verdict.anomaly = parsed.anomaly;
    verdict.confidence = parsed.confidence;
    verdict.explanation = parsed.explanation;
    verdict.parse_status = parsed.status;
    return verdict;
}

}  // namespace

ModelVerdict infer(const PromptBundle& bundle, const BackendConfig& config) {
    auto backend = make_backend(config);
    return infer_with(*backend, bundle, config);
}

std::vector<ModelVerdict> infer_batch(const std::vector<PromptBundle>& bundles,
                                      const BackendConfig& config, const BatchOptions& opts) {
    std::vector<ModelVerdict> results(bundles.size());
    if (bundles.empty()) return results;

    auto backend = make_backend(config);
    auto workers = static_cast<size_t>(std::max(1, config.max_in_flight));
    workers = std::min(workers, bundles.size());

    std::atomic<size_t> next{0};
    std::atomic<bool> abort{false};
    std::atomic<size_t> transport_failures{0};
    std::mutex error_mutex;
    std::exception_ptr fatal;
    std::exception_ptr first_transport;

    auto work = [&] {
        for (;;) {
            if (abort.load()) return;
            size_t i = next.fetch_add(1);
            if (i >= bundles.size()) return;
            try {
                results[i] = infer_with(*backend, bundles[i], config);
            } catch (const ReplayMissError&) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!fatal) fatal = std::current_exception();
                abort.store(true);
                return;
            } catch (const TransportError& e) {
                if (opts.fail_fast) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!fatal) fatal = std::current_exception();
                    abort.store(true);
                    return;
                }
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_transport) first_transport = std::current_exception();
                }
                ++transport_failures;
                ModelVerdict failed;
                failed.posting_id = bundles[i].posting_id;
                failed.parse_status = ParseStatus::Failed;
                failed.explanation = e.what();
                results[i] = failed;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    if (fatal) std::rethrow_exception(fatal);
    // Per-item transport failures are isolated, but when not a single request
    // got through the backend itself is down; surface that as the error.
    if (transport_failures == bundles.size() && first_transport)
        std::rethrow_exception(first_transport);
    return results;
}

void save_replay_fixture(const std::vector<std::pair<std::string, std::string>>& rows,
                         const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& [key, raw] : rows)
        out << "{\"key\":\"" << json_escape(key) << "\",\"raw_response\":\"" << json_escape(raw)
            << "\"}\n";
    if (!out) throw IoError("write failed for " + path);
}

std::map<std::string, std::string> load_replay_fixture(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open replay fixture " + path);
    std::map<std::string, std::string> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("key") ||
            !obj.contains("raw_response"))
            throw MalformedRowError(line_no, "replay fixture rows need key and raw_response");
        out[obj["key"].get<std::string>()] = obj["raw_response"].get<std::string>();
    }
    return out;
}

}  // namespace auditcopilot
