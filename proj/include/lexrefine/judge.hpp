#pragma once

// Machine-judge evaluation: prompt rendering, verdict parsing, a chat-completion
// client with retries, and agreement with human consensus (3x3 table, MCC).

#include <lexrefine/annotation.hpp>
#include <lexrefine/corpus.hpp>
#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/tagger.hpp>

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace lexrefine {

enum class JudgeClass { TruePositive, FalsePositive, Uncertain };

inline std::string_view judge_class_text(JudgeClass c) {
    switch (c) {
        case JudgeClass::TruePositive: return "True Positive";
        case JudgeClass::FalsePositive: return "False Positive";
        case JudgeClass::Uncertain: return "Uncertain";
    }
    return "?";
}

// Only the three literal class strings are accepted.
inline JudgeClass parse_judge_class(std::string_view s) {
    if (s == "True Positive") return JudgeClass::TruePositive;
    if (s == "False Positive") return JudgeClass::FalsePositive;
    if (s == "Uncertain") return JudgeClass::Uncertain;
    throw Error(Errc::parse, "unknown token_class '" + std::string(s) + "'");
}

struct JudgePrompt {
    std::string system_text;
    std::string user_text;
    std::string post_text;  // raw text with the span in asterisks
    std::string matched_token;
    std::string parent_term;
    std::string type;
};

struct JudgeVerdict {
    std::string match_id;
    JudgeClass token_class{};
    std::string reason;
    std::string raw_response;

    bool operator==(const JudgeVerdict&) const = default;
};

// Default system text; {{placeholders}} are filled per match.
inline const char* kDefaultJudgeTemplate = R"(You review automatic dictionary tags in social media posts.
A tagger marked one term in the post below with asterisks. Decide whether the marked term carries the
meaning recorded for it in the dictionary, given its parent_term (a synonym or closely related concept)
and its type (Allergen, Drug, Medical Term or Natural Product).

Classify the marked term as:
- "True Positive" when its use in the post matches the dictionary meaning of {{parent_term}} ({{type}}).
- "False Positive" when it is used with an unrelated meaning, for example as a name, a color or an idiom.
- "Uncertain" when the post does not give enough context to decide.

Reply with a single JSON object and nothing else:
{"token_class": <one of "True Positive", "False Positive", "Uncertain">, "reason": <short justification>}
)";

namespace detail {

inline std::string escape_asterisks(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '*') out += '\\';
        out += c;
    }
    return out;
}

inline std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tpl.size()) {
        auto open = tpl.find("{{", i);
        if (open == std::string_view::npos) {
            out.append(tpl.substr(i));
            break;
        }
        auto close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos) throw Error(Errc::invalid_argument, "unterminated {{ in prompt template");
        std::string key(tpl.substr(open + 2, close - open - 2));
        auto it = values.find(key);
        if (it == values.end()) throw Error(Errc::invalid_argument, "unknown template field {{" + key + "}}");
        out.append(tpl.substr(i, open - i));
        out += it->second;
        i = close + 2;
    }
    return out;
}

}  // namespace detail

// The matched span is wrapped in asterisks on the raw text; asterisks already
// in the post are escaped so the wrapped span is the only bare pair.
inline JudgePrompt build_prompt(const TermMatch& match, const Post& post,
                                std::string_view guidelines_template = kDefaultJudgeTemplate) {
    if (match.post_id != post.post_id)
        throw Error(Errc::invalid_argument, "match " + match.match_id + " does not belong to post " + post.post_id);
    if (match.start >= match.end || match.end > post.text.size())
        throw Error(Errc::invalid_argument, "match " + match.match_id + " offsets out of range");
    std::string_view text = post.text;
    JudgePrompt p;
    p.matched_token = std::string(text.substr(match.start, match.end - match.start));
    p.post_text = detail::escape_asterisks(text.substr(0, match.start)) + "*" +
                  detail::escape_asterisks(p.matched_token) + "*" + detail::escape_asterisks(text.substr(match.end));
    p.parent_term = match.parent_term;
    p.type = std::string(display_name(match.category));
    p.system_text = detail::fill_template(guidelines_template, {{"matched_token", p.matched_token},
                                                                {"parent_term", p.parent_term},
                                                                {"type", p.type},
                                                                {"post_text", p.post_text}});
    nlohmann::ordered_json u = {{"post_text", p.post_text},
                                {"matched_token", p.matched_token},
                                {"parent_term", p.parent_term},
                                {"type", p.type}};
    p.user_text = u.dump();
    return p;
}

inline std::string render_verdict(const JudgeVerdict& v) {
    nlohmann::ordered_json j = {{"token_class", judge_class_text(v.token_class)}, {"reason", v.reason}};
    return j.dump();
}

// First balanced JSON object in `raw` carrying both token_class and reason.
// Prose and code fences around it are ignored.
inline JudgeVerdict parse_verdict(std::string_view raw, std::string match_id = {}) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos; start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        std::size_t end = std::string_view::npos;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                end = i;
                break;
            }
        }
        if (end == std::string_view::npos) continue;
        auto j = nlohmann::json::parse(raw.substr(start, end - start + 1), nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("token_class") || !j.contains("reason")) continue;
        if (!j["token_class"].is_string()) throw Error(Errc::parse, "token_class is not a string");
        JudgeVerdict v;
        v.match_id = std::move(match_id);
        v.token_class = parse_judge_class(j["token_class"].get<std::string>());
        v.reason = j["reason"].is_string() ? j["reason"].get<std::string>() : j["reason"].dump();
        v.raw_response = std::string(raw);
        return v;
    }
    throw Error(Errc::parse, "no JSON object with token_class and reason in response");
}

// ---------------------------------------------------------------------------
// Evaluation against human consensus

enum class Grouping { uncertain_as_negative, discard_uncertain };

inline std::string_view to_string(Grouping g) {
    return g == Grouping::uncertain_as_negative ? "uncertain_as_negative" : "discard_uncertain";
}

inline Grouping parse_grouping(std::string_view s) {
    if (s == "uncertain_as_negative") return Grouping::uncertain_as_negative;
    if (s == "discard_uncertain") return Grouping::discard_uncertain;
    throw Error(Errc::invalid_argument, "unknown grouping '" + std::string(s) + "'");
}

// Rows: judge (match, mismatch, uncertain); columns: human consensus, same order.
using Contingency3 = std::array<std::array<std::uint64_t, 3>, 3>;

struct EvalReport {
    Contingency3 contingency{};
    Grouping grouping{};
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::uint64_t discarded = 0;
    double mcc = 0;
    bool degenerate = false;  // some marginal was 0; mcc reported as 0

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (const auto& r : contingency)
            for (auto v : r) s += v;
        return s;
    }
};

// 0 (flagged) when any marginal is empty.
inline double mcc(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn, bool* degenerate = nullptr) {
    const double a = static_cast<double>(tp), b = static_cast<double>(fp), c = static_cast<double>(fn),
                 d = static_cast<double>(tn);
    const double denom = (a + b) * (a + c) * (d + b) * (d + c);
    if (degenerate) *degenerate = denom == 0;
    if (denom == 0) return 0.0;
    return (a * d - b * c) / std::sqrt(denom);
}

inline EvalReport evaluate_table(const Contingency3& table, Grouping grouping) {
    EvalReport r;
    r.contingency = table;
    r.grouping = grouping;
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t h = 0; h < 3; ++h) {
            const auto n = table[j][h];
            if (grouping == Grouping::discard_uncertain && (j == 2 || h == 2)) {
                r.discarded += n;
                continue;
            }
            const bool jp = j == 0, hp = h == 0;
            (jp ? (hp ? r.tp : r.fp) : (hp ? r.fn : r.tn)) += n;
        }
    r.mcc = mcc(r.tp, r.fp, r.fn, r.tn, &r.degenerate);
    return r;
}

inline std::size_t judge_row(JudgeClass c) {
    switch (c) {
        case JudgeClass::TruePositive: return 0;
        case JudgeClass::FalsePositive: return 1;
        case JudgeClass::Uncertain: return 2;
    }
    return 2;
}

inline std::size_t human_column(Consensus c) {
    switch (c) {
        case Consensus::Match: return 0;
        case Consensus::Mismatch: return 1;
        case Consensus::Uncertain: return 2;
    }
    return 2;
}

inline EvalReport evaluate(const std::vector<JudgeVerdict>& verdicts, const std::vector<ConsensusRecord>& consensus,
                           Grouping grouping) {
    std::unordered_map<std::string, JudgeClass> judged;
    for (const auto& v : verdicts)
        if (!judged.emplace(v.match_id, v.token_class).second)
            throw Error(Errc::invalid_argument, "duplicate verdict for match " + v.match_id);
    if (judged.size() != consensus.size())
        throw Error(Errc::invalid_argument, "verdicts cover " + std::to_string(judged.size()) + " matches, consensus " +
                                                std::to_string(consensus.size()));
    Contingency3 table{};
    for (const auto& c : consensus) {
        auto it = judged.find(c.match_id);
        if (it == judged.end()) throw Error(Errc::invalid_argument, "no verdict for match " + c.match_id);
        ++table[judge_row(it->second)][human_column(c.consensus)];
    }
    return evaluate_table(table, grouping);
}

inline nlohmann::json to_json(const EvalReport& r) {
    return {{"grouping", to_string(r.grouping)},
            {"contingency", r.contingency},
            {"rows", {"judge_match", "judge_mismatch", "judge_uncertain"}},
            {"columns", {"human_match", "human_mismatch", "human_uncertain"}},
            {"total", r.total()},
            {"tp", r.tp},
            {"fp", r.fp},
            {"fn", r.fn},
            {"tn", r.tn},
            {"discarded", r.discarded},
            {"mcc", r.mcc},
            {"mcc_degenerate", r.degenerate}};
}

// ---------------------------------------------------------------------------
// Verdict files

inline nlohmann::json to_json(const JudgeVerdict& v) {
    nlohmann::ordered_json j = {{"match_id", v.match_id},
                                {"token_class", judge_class_text(v.token_class)},
                                {"reason", v.reason},
                                {"raw_response", v.raw_response}};
    return j;
}

inline JudgeVerdict verdict_from_json(const nlohmann::json& j) {
    return {j.at("match_id").get<std::string>(), parse_judge_class(j.at("token_class").get<std::string>()),
            j.value("reason", std::string()), j.value("raw_response", std::string())};
}

inline std::string verdicts_to_jsonl(const std::vector<JudgeVerdict>& vs) {
    std::string out;
    for (const auto& v : vs) out += to_json(v).dump() + "\n";
    return out;
}

inline std::vector<JudgeVerdict> parse_verdicts(std::string_view content) {
    std::vector<JudgeVerdict> out;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty()) continue;
        try {
            out.push_back(verdict_from_json(nlohmann::json::parse(line.text)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, "verdicts line " + std::to_string(line.number) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Client

struct JudgeClientConfig {
    std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
    std::string model;
    std::string auth_env = "AUTH_TOKEN";
    double rate_per_second = 0;  // 0: unlimited
    unsigned retries = 3;        // attempts after the first
    unsigned initial_backoff_ms = 500;
    unsigned parallel = 1;
    unsigned timeout_seconds = 60;
    std::optional<fs::path> mock;  // JSONL fixture replayed instead of HTTP
    std::string guidelines_template = kDefaultJudgeTemplate;
};

struct JudgeFailure {
    std::string match_id;
    unsigned attempts = 0;
    std::string error;
    std::string last_response;
};

struct JudgeRun {
    std::vector<JudgeVerdict> verdicts;  // by match_id
    std::vector<JudgeFailure> failures;  // by match_id
};

// Refills at `rate` tokens per second up to `burst`.
class TokenBucket {
public:
    TokenBucket(double rate, double burst) : rate_(rate), burst_(std::max(1.0, burst)), tokens_(burst_) {}

    void acquire() {
        if (rate_ <= 0) return;
        std::unique_lock lock(mu_);
        for (;;) {
            auto now = std::chrono::steady_clock::now();
            tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
            lock.unlock();
            std::this_thread::sleep_for(wait);
            lock.lock();
        }
    }

private:
    double rate_, burst_, tokens_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
    std::mutex mu_;
};

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline ParsedUrl parse_url(std::string_view url) {
    auto scheme = url.find("://");
    if (scheme == std::string_view::npos) throw Error(Errc::invalid_argument, "endpoint URL needs a scheme: " + std::string(url));
    auto s = url.substr(0, scheme);
    if (s != "http" && s != "https") throw Error(Errc::invalid_argument, "unsupported URL scheme: " + std::string(s));
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string_view::npos) return {std::string(url), "/"};
    return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

// One request attempt: returns the assistant text or an error string; sets
// `transient` when a retry may help (network failure, 429, 5xx).
using JudgeTransport = std::function<std::optional<std::string>(const JudgePrompt&, std::string& error, bool& transient)>;

inline JudgeTransport http_transport(const JudgeClientConfig& cfg) {
    const char* token = std::getenv(cfg.auth_env.c_str());
    if (!token || !*token) throw Error(Errc::unavailable, "environment variable " + cfg.auth_env + " is not set");
    auto url = parse_url(cfg.endpoint);
    std::string auth = std::string("Bearer ") + token;
    return [url, auth, cfg](const JudgePrompt& p, std::string& error, bool& transient) -> std::optional<std::string> {
        httplib::Client cli(url.origin);
        cli.set_connection_timeout(static_cast<time_t>(cfg.timeout_seconds), 0);
        cli.set_read_timeout(static_cast<time_t>(cfg.timeout_seconds), 0);
        nlohmann::json body = {{"model", cfg.model},
                               {"temperature", 0},
                               {"messages",
                                {{{"role", "system"}, {"content", p.system_text}},
                                 {{"role", "user"}, {"content", p.user_text}}}}};
        httplib::Headers headers = {{"Authorization", auth}};
        auto res = cli.Post(url.path, headers, body.dump(), "application/json");
        if (!res) {
            error = "request failed: " + httplib::to_string(res.error());
            transient = true;
            return std::nullopt;
        }
        if (res->status != 200) {
            error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
            transient = res->status == 429 || res->status >= 500;
            return std::nullopt;
        }
        auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
            error = "malformed completion body";
            transient = false;
            return std::nullopt;
        }
        const auto& msg = j["choices"][0]["message"]["content"];
        if (!msg.is_string()) {
            error = "completion has no message content";
            transient = false;
            return std::nullopt;
        }
        return msg.get<std::string>();
    };
}

namespace detail {

struct JudgeTask {
    const TermMatch* match;
    JudgePrompt prompt;
};

}  // namespace detail

// Mock fixture lines: {"match_id", "raw_response"} or {"match_id",
// "token_class", "reason"}. One verdict or one failure per match. Output order is by match_id whatever
// the completion order.
inline JudgeRun run_judge(const MatchSet& sample, const Corpus& corpus, const JudgeClientConfig& cfg,
                          JudgeTransport transport = nullptr) {
    std::unordered_map<std::string, std::string> mock_replies;
    const bool mock = static_cast<bool>(cfg.mock) && !transport;
    if (mock) {
        const std::string fixture = read_file(*cfg.mock);
        for (const auto& line : split_lines(fixture)) {
            if (line.text.empty()) continue;
            auto j = nlohmann::json::parse(line.text, nullptr, false);
            if (j.is_discarded() || !j.contains("match_id"))
                throw Error(Errc::parse, cfg.mock->string() + ":" + std::to_string(line.number) + ": malformed fixture line");
            std::string raw = j.contains("raw_response")
                                  ? j["raw_response"].get<std::string>()
                                  : nlohmann::ordered_json{{"token_class", j.at("token_class")},
                                                           {"reason", j.value("reason", "")}}
                                        .dump();
            mock_replies[j["match_id"].get<std::string>()] = raw;
        }
    } else if (!transport) {
        transport = http_transport(cfg);
    }

    std::vector<detail::JudgeTask> tasks;
    for (const auto& m : sample.matches) {
        const Post* post = corpus.find(m.post_id);
        if (!post) throw Error(Errc::not_found, "match " + m.match_id + " references unknown post " + m.post_id);
        tasks.push_back({&m, build_prompt(m, *post, cfg.guidelines_template)});
    }

    std::vector<std::optional<JudgeVerdict>> verdicts(tasks.size());
    std::vector<std::optional<JudgeFailure>> failures(tasks.size());
    TokenBucket bucket(cfg.rate_per_second, std::max(1.0, cfg.rate_per_second));
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& t = tasks[i];
            const std::string& id = t.match->match_id;
            if (mock) {
                auto it = mock_replies.find(id);
                if (it == mock_replies.end()) {
                    failures[i] = JudgeFailure{id, 0, "no fixture response", ""};
                    continue;
                }
                try {
                    verdicts[i] = parse_verdict(it->second, id);
                } catch (const Error& e) {
                    failures[i] = JudgeFailure{id, 1, e.what(), it->second};
                }
                continue;
            }
            JudgeFailure fail{id, 0, "", ""};
            for (unsigned attempt = 0; attempt <= cfg.retries; ++attempt) {
                if (attempt > 0)
                    std::this_thread::sleep_for(std::chrono::milliseconds(
                        static_cast<long long>(cfg.initial_backoff_ms) << std::min(attempt - 1, 16u)));
                bucket.acquire();
                ++fail.attempts;
                std::string error;
                bool transient = false;
                auto reply = transport(t.prompt, error, transient);
                if (reply) {
                    try {
                        verdicts[i] = parse_verdict(*reply, id);
                    } catch (const Error& e) {
                        fail.error = e.what();
                        fail.last_response = *reply;
                    }
                    break;  // a parse failure is not transient
                }
                fail.error = error;
                if (!transient) break;
            }
            if (!verdicts[i]) failures[i] = std::move(fail);
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(cfg.parallel, static_cast<unsigned>(tasks.size())));
    if (threads <= 1 || mock) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    JudgeRun run;
    for (auto& v : verdicts)
        if (v) run.verdicts.push_back(std::move(*v));
    for (auto& f : failures)
        if (f) run.failures.push_back(std::move(*f));
    std::sort(run.verdicts.begin(), run.verdicts.end(),
              [](const JudgeVerdict& a, const JudgeVerdict& b) { return a.match_id < b.match_id; });
    std::sort(run.failures.begin(), run.failures.end(),
              [](const JudgeFailure& a, const JudgeFailure& b) { return a.match_id < b.match_id; });
    return run;
}

inline nlohmann::json to_json(const JudgeFailure& f) {
    return {{"match_id", f.match_id}, {"attempts", f.attempts}, {"error", f.error}, {"last_response", f.last_response}};
}

inline std::string failures_to_jsonl(const std::vector<JudgeFailure>& fs) {
    std::string out;
    for (const auto& f : fs) out += to_json(f).dump() + "\n";
    return out;
}

}  // namespace lexrefine
