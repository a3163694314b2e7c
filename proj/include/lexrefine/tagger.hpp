#pragma once

// Dictionary tagging. Child terms are matched as token sequences, so "hot"
// never fires inside "shotgun" or "#hottea". Within a category the matcher
// keeps leftmost-longest, non-overlapping matches; categories are independent.

#include <lexrefine/corpus.hpp>
#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/lexicon.hpp>
#include <lexrefine/text.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace lexrefine {

struct TermMatch {
    std::string match_id;
    std::string post_id;
    std::string child_term;
    std::string parent_term;
    Category category{};
    std::size_t start = 0;
    std::size_t end = 0;
    std::optional<std::string> sample_of;

    bool operator==(const TermMatch&) const = default;
};

// Stable across lexicon refinements: one match per (post, span, category).
inline std::string make_match_id(std::string_view post_id, std::size_t start, std::size_t end, Category c) {
    return std::string(post_id) + "@" + std::to_string(start) + "-" + std::to_string(end) + ":" + category_code(c);
}

struct MatchSet {
    std::string corpus_id;
    std::string lexicon_version;
    std::vector<TermMatch> matches;

    std::size_t total_matches() const { return matches.size(); }
};

// Occurrence counts keyed by (term, category).
struct FrequencyTable {
    std::map<std::pair<std::string, Category>, std::uint64_t> counts;

    std::uint64_t get(const std::string& term, Category c) const {
        auto it = counts.find({term, c});
        return it == counts.end() ? 0 : it->second;
    }
    void merge(const FrequencyTable& other) {
        for (const auto& [k, v] : other.counts) counts[k] += v;
    }
};

inline FrequencyTable child_frequencies(const MatchSet& ms) {
    FrequencyTable t;
    for (const auto& m : ms.matches) ++t.counts[{m.child_term, m.category}];
    return t;
}

inline FrequencyTable parent_frequencies(const MatchSet& ms) {
    FrequencyTable t;
    for (const auto& m : ms.matches) ++t.counts[{m.parent_term, m.category}];
    return t;
}

inline std::string frequencies_to_tsv(const FrequencyTable& t) {
    std::string out = "term\tcategory\tcount\n";
    for (const auto& [k, v] : t.counts)
        out += k.first + "\t" + std::string(to_string(k.second)) + "\t" + std::to_string(v) + "\n";
    return out;
}

inline FrequencyTable parse_frequencies(std::string_view content) {
    FrequencyTable t;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty() || (line.number == 1 && line.text.rfind("term\t", 0) == 0)) continue;
        auto cols = split_tabs(line.text);
        auto n = cols.size() == 3 ? parse_int(cols[2]) : std::nullopt;
        if (!n || *n < 0) throw Error(Errc::parse, "frequency table line " + std::to_string(line.number) + ": malformed");
        t.counts[{std::string(cols[0]), category_or_throw(cols[1])}] += static_cast<std::uint64_t>(*n);
    }
    return t;
}

// ---------------------------------------------------------------------------

class Matcher {
public:
    explicit Matcher(const Lexicon& lexicon) : lexicon_version_(lexicon.version()) {
        if (lexicon.empty()) throw Error(Errc::invalid_argument, "cannot build a matcher from an empty lexicon");
        nodes_.emplace_back();
        for (const auto& e : lexicon.entries()) {
            auto toks = term_tokens(e.child_term);
            if (toks.empty()) {
                skipped_.push_back(e.child_term);
                continue;
            }
            std::uint32_t node = 0;
            for (auto& t : toks) {
                auto it = nodes_[node].next.find(t);
                if (it == nodes_[node].next.end()) {
                    auto id = static_cast<std::uint32_t>(nodes_.size());
                    nodes_[node].next.emplace(t, id);
                    nodes_.emplace_back();
                    node = id;
                } else {
                    node = it->second;
                }
            }
            auto& slot = nodes_[node].terminal[static_cast<int>(e.category)];
            // Two spellings with the same token key ("st john's", "st. john's"):
            // the lexicographically smallest child wins.
            if (slot < 0 || e.child_term < entries_[static_cast<std::size_t>(slot)].child_term) {
                if (slot < 0) ++pattern_count_;
                slot = static_cast<std::int32_t>(entries_.size());
                entries_.push_back({e.child_term, e.parent_term});
            }
            max_len_ = std::max(max_len_, toks.size());
        }
    }

    const std::string& lexicon_version() const { return lexicon_version_; }
    std::size_t pattern_count() const { return pattern_count_; }
    std::size_t max_pattern_tokens() const { return max_len_; }
    std::size_t node_count() const { return nodes_.size(); }
    // Child terms that tokenize to nothing (pure punctuation or emoji).
    const std::vector<std::string>& skipped_terms() const { return skipped_; }

    std::vector<TermMatch> tag(std::string_view post_id, std::string_view text) const {
        const auto tokens = tokenize(text);
        const std::size_t n = tokens.size();
        // Longest match (in tokens) starting at each position, per category.
        std::array<std::vector<std::pair<std::uint32_t, std::int32_t>>, 4> best;
        for (auto& b : best) b.assign(n, {0, -1});
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t node = 0;
            for (std::size_t j = i; j < n; ++j) {
                auto it = nodes_[node].next.find(tokens[j].surface);
                if (it == nodes_[node].next.end()) break;
                node = it->second;
                for (int c = 0; c < 4; ++c)
                    if (nodes_[node].terminal[c] >= 0)
                        best[c][i] = {static_cast<std::uint32_t>(j - i + 1), nodes_[node].terminal[c]};
            }
        }
        std::vector<TermMatch> out;
        for (int c = 0; c < 4; ++c) {
            std::size_t i = 0;
            while (i < n) {
                auto [len, entry] = best[c][i];
                if (len == 0) {
                    ++i;
                    continue;
                }
                const auto& e = entries_[static_cast<std::size_t>(entry)];
                TermMatch m;
                m.post_id = std::string(post_id);
                m.child_term = e.child_term;
                m.parent_term = e.parent_term;
                m.category = static_cast<Category>(c);
                m.start = tokens[i].start;
                m.end = tokens[i + len - 1].end;
                m.match_id = make_match_id(post_id, m.start, m.end, m.category);
                out.push_back(std::move(m));
                i += len;
            }
        }
        std::sort(out.begin(), out.end(), [](const TermMatch& a, const TermMatch& b) {
            return std::tie(a.start, a.category, a.end) < std::tie(b.start, b.category, b.end);
        });
        return out;
    }

    std::vector<TermMatch> tag(const Post& post) const { return tag(post.post_id, post.text); }

private:
    struct Node {
        std::unordered_map<std::string, std::uint32_t> next;
        std::array<std::int32_t, 4> terminal{-1, -1, -1, -1};
    };
    struct Target {
        std::string child_term;
        std::string parent_term;
    };

    std::string lexicon_version_;
    std::vector<Node> nodes_;
    std::vector<Target> entries_;
    std::vector<std::string> skipped_;
    std::size_t pattern_count_ = 0;
    std::size_t max_len_ = 0;
};

inline Matcher build_matcher(const Lexicon& lexicon) { return Matcher(lexicon); }

inline std::vector<TermMatch> tag_post(const Matcher& matcher, const Post& post) { return matcher.tag(post); }

// Tags every post; the result is in corpus order regardless of `threads`.
inline MatchSet tag_corpus(const Matcher& matcher, const Corpus& corpus, unsigned threads = 1) {
    MatchSet ms;
    ms.corpus_id = corpus.id();
    ms.lexicon_version = matcher.lexicon_version();
    const auto& posts = corpus.posts();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(posts.size())));
    std::vector<std::vector<TermMatch>> parts(threads);
    auto work = [&](unsigned t) {
        std::size_t lo = posts.size() * t / threads, hi = posts.size() * (t + 1) / threads;
        for (std::size_t i = lo; i < hi; ++i) {
            auto m = matcher.tag(posts[i]);
            parts[t].insert(parts[t].end(), std::make_move_iterator(m.begin()), std::make_move_iterator(m.end()));
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    for (auto& p : parts)
        ms.matches.insert(ms.matches.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
    return ms;
}

// ---------------------------------------------------------------------------
// Persistence: JSONL lines plus a `<path>.meta.json` sidecar.

inline nlohmann::json to_json(const TermMatch& m) {
    nlohmann::json j = {{"match_id", m.match_id},       {"post_id", m.post_id},
                        {"child_term", m.child_term},   {"parent_term", m.parent_term},
                        {"category", to_string(m.category)}, {"start", m.start},
                        {"end", m.end}};
    if (m.sample_of) j["sample_of"] = *m.sample_of;
    return j;
}

inline TermMatch match_from_json(const nlohmann::json& j) {
    TermMatch m;
    m.match_id = j.at("match_id").get<std::string>();
    m.post_id = j.at("post_id").get<std::string>();
    m.child_term = j.at("child_term").get<std::string>();
    m.parent_term = j.at("parent_term").get<std::string>();
    m.category = category_or_throw(j.at("category").get<std::string>());
    m.start = j.at("start").get<std::size_t>();
    m.end = j.at("end").get<std::size_t>();
    if (j.contains("sample_of")) m.sample_of = j["sample_of"].get<std::string>();
    return m;
}

inline std::string matches_to_jsonl(const MatchSet& ms) {
    std::string out;
    for (const auto& m : ms.matches) out += to_json(m).dump() + "\n";
    return out;
}

inline fs::path meta_path(const fs::path& p) {
    fs::path m = p;
    m += ".meta.json";
    return m;
}

inline void save_matchset(const MatchSet& ms, const fs::path& path) {
    write_file(path, matches_to_jsonl(ms));
    nlohmann::json meta = {{"corpus_id", ms.corpus_id},
                           {"lexicon_version", ms.lexicon_version},
                           {"total_matches", ms.total_matches()}};
    write_file(meta_path(path), meta.dump(2) + "\n");
}

inline MatchSet load_matchset(const fs::path& path) {
    MatchSet ms;
    const std::string content = read_file(path);
    for (const auto& line : split_lines(content)) {
        if (line.text.empty()) continue;
        try {
            ms.matches.push_back(match_from_json(nlohmann::json::parse(line.text)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, path.string() + ":" + std::to_string(line.number) + ": " + e.what());
        }
    }
    if (fs::exists(meta_path(path))) {
        auto meta = nlohmann::json::parse(read_file(meta_path(path)));
        ms.corpus_id = meta.value("corpus_id", std::string());
        ms.lexicon_version = meta.value("lexicon_version", std::string());
        if (meta.value("total_matches", ms.total_matches()) != ms.total_matches())
            throw Error(Errc::conflict, path.string() + ": match count disagrees with metadata");
    }
    return ms;
}

}  // namespace lexrefine
