#pragma once

// Seeded uniform sampling of posts that carry at least one dictionary match.

#include <lexrefine/corpus.hpp>
#include <lexrefine/random.hpp>
#include <lexrefine/tagger.hpp>

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lexrefine {

struct AnnotationSample {
    std::string sample_id;
    std::string corpus_id;
    std::uint64_t seed = 0;
    std::string prng = "mt19937_64";
    std::size_t eligible_posts = 0;
    // Indices into the eligible-post list (corpus order), in draw order.
    std::vector<std::size_t> draw_sequence;
    std::vector<std::string> post_ids;   // sorted
    std::vector<std::string> match_ids;  // grouped by post, post_ids order
    std::map<Category, std::size_t> counts_by_category;

    bool operator==(const AnnotationSample&) const = default;
};

inline AnnotationSample sample_matched_posts(const Corpus& corpus, const MatchSet& matches, std::size_t n_posts,
                                             std::optional<std::uint64_t> seed) {
    if (!seed) throw Error(Errc::invalid_argument, "sampling requires an explicit seed");
    if (!matches.corpus_id.empty() && matches.corpus_id != corpus.id())
        throw Error(Errc::conflict, "matches were produced from corpus '" + matches.corpus_id + "', not '" +
                                        corpus.id() + "'");

    std::map<std::size_t, std::vector<const TermMatch*>> by_post;  // corpus position -> matches
    for (const auto& m : matches.matches) {
        auto pos = corpus.position(m.post_id);
        if (!pos) throw Error(Errc::not_found, "match " + m.match_id + " references unknown post " + m.post_id);
        by_post[*pos].push_back(&m);
    }
    std::vector<std::size_t> eligible;
    for (const auto& [pos, _] : by_post) eligible.push_back(pos);
    if (n_posts > eligible.size())
        throw Error(Errc::invalid_argument, "requested " + std::to_string(n_posts) + " posts but only " +
                                                std::to_string(eligible.size()) + " carry a match");

    AnnotationSample s;
    s.corpus_id = corpus.id();
    s.seed = *seed;
    s.eligible_posts = eligible.size();
    Rng rng(*seed);
    s.draw_sequence = sample_without_replacement(rng, eligible.size(), n_posts);
    for (Category c : kCategories) s.counts_by_category[c] = 0;

    std::vector<std::size_t> chosen;
    for (std::size_t d : s.draw_sequence) chosen.push_back(eligible[d]);
    std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
        return corpus.posts()[a].post_id < corpus.posts()[b].post_id;
    });
    for (std::size_t pos : chosen) {
        s.post_ids.push_back(corpus.posts()[pos].post_id);
        for (const TermMatch* m : by_post[pos]) {
            s.match_ids.push_back(m->match_id);
            ++s.counts_by_category[m->category];
        }
    }
    std::string key = corpus.id() + "|" + std::to_string(*seed) + "|" + std::to_string(n_posts) + "|" +
                      matches.lexicon_version;
    s.sample_id = "s-" + hex64(fnv1a64(key)).substr(0, 12);
    return s;
}

// The sample's matches, tagged with sample_of, in manifest order.
inline MatchSet sample_matches(const AnnotationSample& sample, const MatchSet& matches) {
    std::unordered_map<std::string, const TermMatch*> by_id;
    for (const auto& m : matches.matches) by_id.emplace(m.match_id, &m);
    MatchSet out;
    out.corpus_id = matches.corpus_id;
    out.lexicon_version = matches.lexicon_version;
    for (const auto& id : sample.match_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(Errc::not_found, "sample references unknown match " + id);
        TermMatch m = *it->second;
        m.sample_of = sample.sample_id;
        out.matches.push_back(std::move(m));
    }
    return out;
}

inline nlohmann::json to_json(const AnnotationSample& s) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [c, n] : s.counts_by_category) counts[std::string(to_string(c))] = n;
    return {{"sample_id", s.sample_id},
            {"corpus_id", s.corpus_id},
            {"seed", s.seed},
            {"prng", s.prng},
            {"eligible_posts", s.eligible_posts},
            {"draw_sequence", s.draw_sequence},
            {"post_ids", s.post_ids},
            {"match_ids", s.match_ids},
            {"counts_by_category", counts}};
}

inline AnnotationSample sample_from_json(const nlohmann::json& j) {
    AnnotationSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.corpus_id = j.value("corpus_id", std::string());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.prng = j.value("prng", std::string("mt19937_64"));
    s.eligible_posts = j.value("eligible_posts", std::size_t{0});
    s.draw_sequence = j.value("draw_sequence", std::vector<std::size_t>{});
    s.post_ids = j.at("post_ids").get<std::vector<std::string>>();
    s.match_ids = j.at("match_ids").get<std::vector<std::string>>();
    for (Category c : kCategories) s.counts_by_category[c] = 0;
    const auto counts = j.value("counts_by_category", nlohmann::json::object());
    for (const auto& [k, v] : counts.items())
        s.counts_by_category[category_or_throw(k)] = v.get<std::size_t>();
    return s;
}

inline std::string manifest_text(const AnnotationSample& s) { return to_json(s).dump(2) + "\n"; }

}  // namespace lexrefine
