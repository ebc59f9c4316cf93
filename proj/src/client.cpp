#include "forge/client.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "forge/errors.hpp"
#include "forge/util.hpp"

namespace forge {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(const std::string& path) {
    load(read_file(path));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json_text(const std::string& text) {
    auto backend = std::shared_ptr<ScriptedBackend>(new ScriptedBackend());
    backend->load(text);
    return backend;
}

void ScriptedBackend::load(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scripted backend file is not valid JSON: ") + e.what());
    }
    if (doc.contains("chat")) {
        for (auto& [key, value] : doc.at("chat").items()) {
            std::vector<Entry> entries;
            if (!value.is_array()) throw ConfigError("scripted chat entry must be a list: " + key);
            for (const auto& item : value) {
                if (item.is_string()) {
                    entries.push_back({item.get<std::string>(), false});
                } else if (item.is_object() && item.contains("error")) {
                    entries.push_back({item.at("error").get<std::string>(), true});
                } else {
                    throw ConfigError("scripted chat entries must be strings or {\"error\": ...}");
                }
            }
            if (entries.empty()) throw ConfigError("scripted chat list is empty: " + key);
            chat_.emplace(key, std::move(entries));
        }
    }
    if (doc.contains("embeddings")) {
        for (auto& [key, value] : doc.at("embeddings").items()) {
            embeddings_.emplace(key, value.get<std::vector<double>>());
        }
    }
}

std::string ScriptedBackend::send(const ChatRequest& req) {
    std::lock_guard<std::mutex> lock(mu_);
    const std::string hash = sha256_hex(req.prompt);
    auto it = chat_.find(hash);
    if (it == chat_.end()) it = chat_.find(req.prompt);
    if (it == chat_.end()) {
        throw ProtocolError("no scripted response for prompt hash " + hash + " (prompt starts: " +
                            req.prompt.substr(0, 80) + ")");
    }
    auto& entries = it->second;
    std::size_t& cur = cursor_[it->first];
    const Entry& entry = entries[std::min(cur, entries.size() - 1)];
    if (cur < entries.size()) ++cur;
    if (entry.is_error) throw TransportError("scripted failure: " + entry.text);
    return entry.text;
}

std::vector<double> ScriptedBackend::embed(const std::string&, const std::string& text) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = embeddings_.find(text);
    if (it == embeddings_.end()) {
        throw ProtocolError("no scripted embedding for text: " + text.substr(0, 80));
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// HTTP transports
// ---------------------------------------------------------------------------

namespace {

struct UrlParts {
    std::string host; // scheme://host[:port]
    std::string prefix;
};

UrlParts split_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base_url missing scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

std::string bearer_from_env(const std::string& env_name) {
    if (env_name.empty()) return "";
    const char* value = std::getenv(env_name.c_str());
    return value ? value : "";
}

class HttpChatTransport : public ChatTransport {
public:
    explicit HttpChatTransport(const BackendConfig& cfg)
        : parts_(split_url(cfg.base_url)), cfg_(cfg) {}

    std::string send(const ChatRequest& req) override {
        httplib::Client client(parts_.host);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
        client.set_read_timeout(static_cast<time_t>(std::max<std::int64_t>(1, secs.count())), 0);
        client.set_connection_timeout(static_cast<time_t>(std::max<std::int64_t>(1, secs.count())), 0);
        httplib::Headers headers;
        const std::string key = bearer_from_env(cfg_.api_key_env);
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        json body;
        body["model"] = req.model;
        body["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt}}});
        body["temperature"] = req.temperature;
        if (req.seed) body["seed"] = *req.seed;

        auto res = client.Post(parts_.prefix + "/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res) throw TransportError("chat/completions: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300) {
            throw TransportError("chat/completions: HTTP " + std::to_string(res->status));
        }
        if (res->body.empty()) throw ProtocolError("chat/completions: empty response body");
        try {
            const json doc = json::parse(res->body);
            const auto& content = doc.at("choices").at(0).at("message").at("content");
            std::string text = content.get<std::string>();
            if (text.empty()) throw ProtocolError("chat/completions: empty completion");
            return text;
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("chat/completions: malformed payload: ") + e.what());
        }
    }

private:
    UrlParts parts_;
    BackendConfig cfg_;
};

class HttpEmbeddingTransport : public EmbeddingTransport {
public:
    explicit HttpEmbeddingTransport(const BackendConfig& cfg)
        : parts_(split_url(cfg.base_url)), cfg_(cfg) {}

    std::vector<double> embed(const std::string& model, const std::string& text) override {
        httplib::Client client(parts_.host);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
        client.set_read_timeout(static_cast<time_t>(std::max<std::int64_t>(1, secs.count())), 0);
        httplib::Headers headers;
        const std::string key = bearer_from_env(cfg_.api_key_env);
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        json body{{"model", model}, {"input", text}};
        auto res = client.Post(parts_.prefix + "/embeddings", headers, body.dump(), "application/json");
        if (!res) throw TransportError("embeddings: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300) {
            throw TransportError("embeddings: HTTP " + std::to_string(res->status));
        }
        if (res->body.empty()) throw ProtocolError("embeddings: empty response body");
        try {
            const json doc = json::parse(res->body);
            return doc.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("embeddings: malformed payload: ") + e.what());
        }
    }

private:
    UrlParts parts_;
    BackendConfig cfg_;
};

constexpr const char* kScriptedScheme = "scripted://";

std::shared_ptr<ChatTransport> chat_transport_from_config(const BackendConfig& cfg) {
    if (cfg.base_url.rfind(kScriptedScheme, 0) == 0) {
        return std::make_shared<ScriptedBackend>(cfg.base_url.substr(std::string(kScriptedScheme).size()));
    }
    return std::make_shared<HttpChatTransport>(cfg);
}

std::shared_ptr<EmbeddingTransport> embedding_transport_from_config(const BackendConfig& cfg) {
    if (cfg.base_url.rfind(kScriptedScheme, 0) == 0) {
        return std::make_shared<ScriptedBackend>(cfg.base_url.substr(std::string(kScriptedScheme).size()));
    }
    return std::make_shared<HttpEmbeddingTransport>(cfg);
}

} // namespace

std::shared_ptr<ChatTransport> make_http_chat_transport(const BackendConfig& cfg) {
    return std::make_shared<HttpChatTransport>(cfg);
}

std::shared_ptr<EmbeddingTransport> make_http_embedding_transport(const BackendConfig& cfg) {
    return std::make_shared<HttpEmbeddingTransport>(cfg);
}

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

ChatClient::ChatClient(BackendConfig cfg)
    : cfg_(std::move(cfg)), transport_(chat_transport_from_config(cfg_)) {}

ChatClient::ChatClient(BackendConfig cfg, std::shared_ptr<ChatTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

std::string ChatClient::chat_complete(const std::string& prompt,
                                      std::optional<double> temperature_override) {
    if (cfg_.max_attempts_per_call < 1) throw ConfigError("max_attempts_per_call must be >= 1");
    ChatRequest req;
    req.model = cfg_.model_name;
    req.prompt = prompt;
    req.temperature = temperature_override.value_or(cfg_.temperature);
    req.seed = cfg_.request_seed;

    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.max_attempts_per_call; ++attempt) {
        const std::int64_t index = next_index_.fetch_add(1);
        try {
            std::string response = transport_->send(req);
            if (response.empty()) throw ProtocolError("empty response body");
            {
                std::lock_guard<std::mutex> lock(mu_);
                audit_.push_back({prompt, response, index, true});
            }
            return response;
        } catch (const TransportError& e) {
            last_error = e.what();
            {
                std::lock_guard<std::mutex> lock(mu_);
                audit_.push_back({prompt, std::string("<transport-error> ") + e.what(), index, false});
            }
            if (attempt < cfg_.max_attempts_per_call && cfg_.backoff_base.count() > 0) {
                std::this_thread::sleep_for(cfg_.backoff_base * (1ll << (attempt - 1)));
            }
        } catch (const ProtocolError& e) {
            std::lock_guard<std::mutex> lock(mu_);
            audit_.push_back({prompt, std::string("<protocol-error> ") + e.what(), index, false});
            throw;
        }
    }
    throw TransportError("exhausted " + std::to_string(cfg_.max_attempts_per_call) +
                         " attempts; last: " + last_error);
}

std::vector<ChatExchange> ChatClient::audit_snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return audit_;
}

std::size_t ChatClient::call_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return audit_.size();
}

EmbeddingClient::EmbeddingClient(BackendConfig cfg)
    : cfg_(std::move(cfg)), transport_(embedding_transport_from_config(cfg_)) {}

EmbeddingClient::EmbeddingClient(BackendConfig cfg, std::shared_ptr<EmbeddingTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

EmbeddingVector EmbeddingClient::embed_text(const std::string& text) {
    if (trim(text).empty()) throw ConfigError("embed_text requires non-empty text");
    std::vector<double> values = transport_->embed(cfg_.model_name, text);
    if (values.empty()) throw ProtocolError("embedding has zero dimension");
    for (double v : values) {
        if (!std::isfinite(v)) throw ProtocolError("embedding contains a non-finite value");
    }
    const int dim = static_cast<int>(values.size());
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (dimension_ == 0) {
            dimension_ = dim;
        } else if (dimension_ != dim) {
            throw ProtocolError("embedding dimension mismatch: expected " +
                                std::to_string(dimension_) + ", got " + std::to_string(dim));
        }
    }
    return EmbeddingVector{std::move(values), dim};
}

} // namespace forge
