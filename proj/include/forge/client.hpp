#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace forge {

struct BackendConfig {
    std::string base_url;       // http(s)://host[/prefix] or scripted://<path>
    std::string model_name;
    std::string api_key_env;    // name of the env var holding the key; never the key itself
    double temperature = 0.0;
    int max_attempts_per_call = 3;
    std::chrono::milliseconds timeout{30000};
    std::optional<std::int64_t> request_seed;
    std::chrono::milliseconds backoff_base{500}; // doubled per retry, jitterless
};

struct ChatExchange {
    std::string request_text;
    std::string response_text; // on a failed call, a short error description
    std::int64_t call_index = 0;
    bool ok = true;
};

struct EmbeddingVector {
    std::vector<double> values;
    int dimension = 0;
};

struct ChatRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    std::optional<std::int64_t> seed;
};

/// One physical round-trip to a chat endpoint. Implementations throw
/// TransportError for reachability/status failures (retried by the client)
/// and ProtocolError for malformed payloads (not retried).
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string send(const ChatRequest& req) = 0;
};

class EmbeddingTransport {
public:
    virtual ~EmbeddingTransport() = default;
    virtual std::vector<double> embed(const std::string& model, const std::string& text) = 0;
};

/// Wraps a std::function as a transport; the workhorse for scripted oracles in tests.
class FunctionChatTransport : public ChatTransport {
public:
    explicit FunctionChatTransport(std::function<std::string(const ChatRequest&)> fn)
        : fn_(std::move(fn)) {}
    std::string send(const ChatRequest& req) override { return fn_(req); }

private:
    std::function<std::string(const ChatRequest&)> fn_;
};

class FunctionEmbeddingTransport : public EmbeddingTransport {
public:
    explicit FunctionEmbeddingTransport(std::function<std::vector<double>(const std::string&)> fn)
        : fn_(std::move(fn)) {}
    std::vector<double> embed(const std::string&, const std::string& text) override { return fn_(text); }

private:
    std::function<std::vector<double>(const std::string&)> fn_;
};

/// Fully scripted offline backend, loaded from a JSON file:
///   {
///     "chat":       { "<sha256-of-prompt>": ["response", {"error": "503"}, ...], ... },
///     "embeddings": { "<text>": [0.1, 0.2, ...], ... }
///   }
/// Chat keys may also be the verbatim prompt. Each list is consumed in order;
/// once exhausted the final entry repeats. An {"error": ...} entry raises a
/// TransportError for that call.
class ScriptedBackend : public ChatTransport, public EmbeddingTransport {
public:
    explicit ScriptedBackend(const std::string& path);
    static std::shared_ptr<ScriptedBackend> from_json_text(const std::string& text);

    std::string send(const ChatRequest& req) override;
    std::vector<double> embed(const std::string& model, const std::string& text) override;

private:
    struct Entry {
        std::string text;
        bool is_error = false;
    };
    ScriptedBackend() = default;
    void load(const std::string& text);

    std::mutex mu_;
    std::unordered_map<std::string, std::vector<Entry>> chat_;
    std::unordered_map<std::string, std::size_t> cursor_;
    std::unordered_map<std::string, std::vector<double>> embeddings_;
};

/// Chat-completion client: owns the retry policy (exponential backoff, capped
/// by max_attempts_per_call) and the append-only audit log. Shareable across
/// concurrent tasks.
class ChatClient {
public:
    /// Builds the transport from cfg.base_url (scripted:// or http(s)://).
    explicit ChatClient(BackendConfig cfg);
    ChatClient(BackendConfig cfg, std::shared_ptr<ChatTransport> transport);

    /// Returns the raw response text. Transport failures are retried with
    /// backoff; after max_attempts_per_call the last TransportError is thrown.
    std::string chat_complete(const std::string& prompt,
                              std::optional<double> temperature_override = std::nullopt);

    const BackendConfig& config() const { return cfg_; }
    std::vector<ChatExchange> audit_snapshot() const;
    std::size_t call_count() const;

private:
    BackendConfig cfg_;
    std::shared_ptr<ChatTransport> transport_;
    mutable std::mutex mu_;
    std::vector<ChatExchange> audit_;
    std::atomic<std::int64_t> next_index_{0};
};

class EmbeddingClient {
public:
    explicit EmbeddingClient(BackendConfig cfg);
    EmbeddingClient(BackendConfig cfg, std::shared_ptr<EmbeddingTransport> transport);

    /// Finite vector of the backend-declared dimension. The first successful
    /// call pins the dimension; a later mismatch is a ProtocolError.
    EmbeddingVector embed_text(const std::string& text);

    const BackendConfig& config() const { return cfg_; }

private:
    BackendConfig cfg_;
    std::shared_ptr<EmbeddingTransport> transport_;
    std::mutex mu_;
    int dimension_ = 0; // 0 until pinned
};

/// POST {base_url}/chat/completions with {model, messages, temperature, seed?}.
std::shared_ptr<ChatTransport> make_http_chat_transport(const BackendConfig& cfg);
/// POST {base_url}/embeddings with {model, input}.
std::shared_ptr<EmbeddingTransport> make_http_embedding_transport(const BackendConfig& cfg);

} // namespace forge
