#pragma once

// Post corpora: JSONL ingestion with regram de-duplication, and a directory
// store keyed by corpus id. A loaded Corpus is immutable.

#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/text.hpp>

#include <json.hpp>

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace lexrefine {

struct Post {
    std::string post_id;
    std::string user_id;
    std::string timestamp;  // as given, ISO-8601
    UtcTime time{};
    std::string text;
    nlohmann::json extra = nlohmann::json::object();  // unknown fields, carried through untouched
};

struct IngestIssue {
    std::size_t line;
    std::string message;
};

struct CorpusHandle {
    std::string corpus_id;
    std::size_t post_count = 0;
    std::string source_path;
    std::size_t dedup_count = 0;
    std::vector<IngestIssue> malformed;
};

class Corpus {
public:
    Corpus() = default;
    Corpus(CorpusHandle handle, std::vector<Post> posts) : handle_(std::move(handle)), posts_(std::move(posts)) {
        for (std::size_t i = 0; i < posts_.size(); ++i) index_.emplace(posts_[i].post_id, i);
        handle_.post_count = posts_.size();
    }

    const CorpusHandle& handle() const { return handle_; }
    const std::string& id() const { return handle_.corpus_id; }
    const std::vector<Post>& posts() const { return posts_; }
    std::size_t size() const { return posts_.size(); }

    const Post* find(std::string_view post_id) const {
        auto it = index_.find(std::string(post_id));
        return it == index_.end() ? nullptr : &posts_[it->second];
    }
    // Position of the post in corpus order.
    std::optional<std::size_t> position(std::string_view post_id) const {
        auto it = index_.find(std::string(post_id));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    CorpusHandle handle_;
    std::vector<Post> posts_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline nlohmann::json to_json(const Post& p) {
    nlohmann::json j = p.extra;
    j["post_id"] = p.post_id;
    j["user_id"] = p.user_id;
    j["timestamp"] = p.timestamp;
    j["text"] = p.text;
    return j;
}

namespace detail {

inline bool blank(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size())
        if (!is_space(next_cp(s, i))) return false;
    return true;
}

inline std::optional<Post> parse_post(std::string_view line, std::string& why) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        why = std::string("invalid JSON: ") + e.what();
        return std::nullopt;
    }
    if (!j.is_object()) {
        why = "record is not a JSON object";
        return std::nullopt;
    }
    Post p;
    for (const char* key : {"post_id", "user_id", "timestamp", "text"}) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) {
            why = std::string("missing or non-string field '") + key + "'";
            return std::nullopt;
        }
    }
    p.post_id = j["post_id"].get<std::string>();
    p.user_id = j["user_id"].get<std::string>();
    p.timestamp = j["timestamp"].get<std::string>();
    p.text = j["text"].get<std::string>();
    if (p.post_id.empty()) {
        why = "empty post_id";
        return std::nullopt;
    }
    auto t = parse_iso8601(p.timestamp);
    if (!t) {
        why = "unparseable timestamp '" + p.timestamp + "'";
        return std::nullopt;
    }
    p.time = *t;
    if (blank(p.text)) {
        why = "empty text";
        return std::nullopt;
    }
    for (const char* key : {"post_id", "user_id", "timestamp", "text"}) j.erase(key);
    p.extra = std::move(j);
    return p;
}

}  // namespace detail

// Parses a JSONL corpus. Records repeating an earlier (user_id, timestamp,
// text) triple are dropped and counted; malformed lines are skipped and
// reported; a post_id reused by a different record is a hard error.
inline Corpus parse_corpus(std::string_view content, std::string source_path = {},
                           std::optional<std::string> corpus_id = std::nullopt) {
    CorpusHandle handle;
    handle.source_path = std::move(source_path);
    handle.corpus_id = corpus_id ? *corpus_id : "c-" + hex64(fnv1a64(content));
    std::vector<Post> posts;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::unordered_map<std::string, std::size_t> ids;
    for (const auto& line : split_lines(content)) {
        if (detail::blank(line.text)) continue;
        std::string why;
        auto post = detail::parse_post(line.text, why);
        if (!post) {
            handle.malformed.push_back({line.number, why});
            continue;
        }
        if (!seen.emplace(post->user_id, post->timestamp, post->text).second) {
            ++handle.dedup_count;
            continue;
        }
        if (!ids.emplace(post->post_id, line.number).second)
            throw Error(Errc::conflict, handle.source_path + ":" + std::to_string(line.number) + ": duplicate post_id '" +
                                            post->post_id + "' (first seen on line " +
                                            std::to_string(ids[post->post_id]) + ")");
        posts.push_back(std::move(*post));
    }
    if (posts.empty()) throw Error(Errc::parse, handle.source_path + ": no valid post records");
    return Corpus(std::move(handle), std::move(posts));
}

inline std::string export_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& p : corpus.posts()) out += to_json(p).dump() + "\n";
    return out;
}

inline nlohmann::json to_json(const CorpusHandle& h) {
    nlohmann::json issues = nlohmann::json::array();
    for (const auto& i : h.malformed) issues.push_back({{"line", i.line}, {"message", i.message}});
    return {{"corpus_id", h.corpus_id},
            {"post_count", h.post_count},
            {"source_path", h.source_path},
            {"dedup_count", h.dedup_count},
            {"malformed", issues}};
}

inline CorpusHandle handle_from_json(const nlohmann::json& j) {
    CorpusHandle h;
    h.corpus_id = j.at("corpus_id").get<std::string>();
    h.post_count = j.at("post_count").get<std::size_t>();
    h.source_path = j.value("source_path", std::string());
    h.dedup_count = j.value("dedup_count", std::size_t{0});
    for (const auto& i : j.value("malformed", nlohmann::json::array()))
        h.malformed.push_back({i.at("line").get<std::size_t>(), i.at("message").get<std::string>()});
    return h;
}

// Directory store: <root>/<corpus_id>/{posts.jsonl,handle.json}.
class CorpusStore {
public:
    explicit CorpusStore(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }

    CorpusHandle ingest(const fs::path& path, std::optional<std::string> corpus_id = std::nullopt) const {
        if (!fs::exists(path)) throw Error(Errc::io, "corpus file not found: " + path.string());
        Corpus c = parse_corpus(read_file(path), path.string(), std::move(corpus_id));
        save(c);
        return c.handle();
    }

    void save(const Corpus& c) const {
        fs::path dir = root_ / c.id();
        write_file(dir / "posts.jsonl", export_jsonl(c));
        write_file(dir / "handle.json", to_json(c.handle()).dump(2) + "\n");
    }

    bool contains(std::string_view corpus_id) const { return fs::exists(root_ / corpus_id / "handle.json"); }

    Corpus load(std::string_view corpus_id) const {
        fs::path dir = root_ / corpus_id;
        if (!fs::exists(dir / "handle.json"))
            throw Error(Errc::not_found, "corpus '" + std::string(corpus_id) + "' not in store " + root_.string());
        CorpusHandle h = handle_from_json(nlohmann::json::parse(read_file(dir / "handle.json")));
        Corpus stored = parse_corpus(read_file(dir / "posts.jsonl"), h.source_path, h.corpus_id);
        std::vector<Post> posts = stored.posts();
        return Corpus(std::move(h), std::move(posts));
    }

    std::vector<std::string> list() const {
        std::vector<std::string> out;
        if (!fs::exists(root_)) return out;
        for (const auto& d : fs::directory_iterator(root_))
            if (fs::exists(d.path() / "handle.json")) out.push_back(d.path().filename().string());
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    fs::path root_;
};

}  // namespace lexrefine
