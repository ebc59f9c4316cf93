#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "forge/client.hpp"
#include "forge/mcq.hpp"
#include "forge/prompts.hpp"

namespace forge::testing {

/// Pulls the two distractor slot values out of a rendered ranker prompt.
/// Works for every variant because they share the slot labels.
inline std::pair<std::string, std::string> extract_pair_from_prompt(const std::string& prompt) {
    auto slot = [&](const std::string& label) {
        const auto pos = prompt.find(label);
        if (pos == std::string::npos) throw std::runtime_error("prompt missing " + label);
        const auto begin = pos + label.size();
        auto end = prompt.find('\n', begin);
        if (end == std::string::npos) end = prompt.size();
        return trim(prompt.substr(begin, end - begin));
    };
    return {slot("[Distractor A] "), slot("[Distractor B] ")};
}

/// Chat backend that answers ranker prompts according to a preference over
/// distractor texts: prefer(a, b) == true means the A-slot text wins.
inline std::shared_ptr<ChatTransport> make_order_oracle(
    std::function<bool(const std::string&, const std::string&)> prefer) {
    return std::make_shared<FunctionChatTransport>([prefer = std::move(prefer)](const ChatRequest& req) {
        const auto [a, b] = extract_pair_from_prompt(req.prompt);
        const char choice = prefer(a, b) ? 'A' : 'B';
        return std::string("### Review: considered both options.\n### Choice: ") + choice;
    });
}

/// Order-invariant oracle: the lexicographically smaller text always wins.
inline std::shared_ptr<ChatTransport> make_lexicographic_oracle() {
    return make_order_oracle([](const std::string& a, const std::string& b) { return a < b; });
}

/// Positionally biased backend: answers the literal token regardless of content.
inline std::shared_ptr<ChatTransport> make_literal_oracle(char token) {
    return std::make_shared<FunctionChatTransport>([token](const ChatRequest&) {
        return std::string("### Review: looks plausible.\n### Choice: ") + token;
    });
}

/// Oracle consistent with a hidden total order (earlier in `order` = more
/// plausible). Unknown texts lose to known ones.
inline std::shared_ptr<ChatTransport> make_total_order_oracle(std::vector<std::string> order) {
    auto rank = [order = std::move(order)](const std::string& text) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (order[i] == text) return i;
        }
        return order.size();
    };
    return make_order_oracle(
        [rank](const std::string& a, const std::string& b) { return rank(a) < rank(b); });
}

inline BackendConfig test_backend(const std::string& model = "test-model") {
    BackendConfig cfg;
    cfg.base_url = "scripted://unused";
    cfg.model_name = model;
    cfg.temperature = 0.5;
    cfg.max_attempts_per_call = 3;
    cfg.backoff_base = std::chrono::milliseconds(0);
    return cfg;
}

inline ChatClient make_client(std::shared_ptr<ChatTransport> transport,
                              const std::string& model = "test-model") {
    return ChatClient(test_backend(model), std::move(transport));
}

inline McqItem make_item(const std::string& id, std::vector<std::pair<std::string, double>> rated,
                         const std::string& subject = "Python") {
    McqItem item;
    item.id = id;
    item.subject = subject;
    item.kind = QuestionKind::Statement;
    item.polarity = Polarity::AskingCorrect;
    item.question = "Which statement about " + id + " is correct?";
    item.answer = "the documented behaviour";
    for (auto& [text, rate] : rated) {
        item.distractors.push_back(Distractor{text, Origin::human(), rate});
    }
    return item;
}

/// Scratch directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("forge_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path path() const { return path_; }
    std::string str(const std::string& name = "") const {
        return name.empty() ? path_.string() : (path_ / name).string();
    }

private:
    std::filesystem::path path_;
};

} // namespace forge::testing
