#pragma once

// Parent-level co-mention networks and eigenvector centrality.

#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/lexicon.hpp>
#include <lexrefine/tagger.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace lexrefine {

// Undirected, no self-loops; weight = number of posts mentioning both parents.
struct CoMentionGraph {
    std::vector<std::string> nodes;  // sorted
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> edges;  // first < second
    std::string corpus_id;
    std::string lexicon_version;

    std::optional<std::uint32_t> index_of(std::string_view label) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), label);
        if (it == nodes.end() || *it != label) return std::nullopt;
        return static_cast<std::uint32_t>(it - nodes.begin());
    }

    std::uint64_t weight(std::string_view a, std::string_view b) const {
        auto ia = index_of(a), ib = index_of(b);
        if (!ia || !ib || *ia == *ib) return 0;
        auto key = std::minmax(*ia, *ib);
        auto it = edges.find({key.first, key.second});
        return it == edges.end() ? 0 : it->second;
    }
};

// Pre-digested MatchSet: per post, the (child, parent) ids it mentions. Lets
// the null model rebuild networks under many removal sets without re-reading
// matches.
class CoMentionIndex {
public:
    explicit CoMentionIndex(const MatchSet& matches) : corpus_id_(matches.corpus_id), lexicon_version_(matches.lexicon_version) {
        std::set<std::string> parent_set;
        for (const auto& m : matches.matches) parent_set.insert(m.parent_term);
        parents_.assign(parent_set.begin(), parent_set.end());
        std::unordered_map<std::string, std::uint32_t> parent_id;
        for (std::uint32_t i = 0; i < parents_.size(); ++i) parent_id.emplace(parents_[i], i);

        std::string current;
        bool first = true;
        for (const auto& m : matches.matches) {
            if (first || m.post_id != current) {
                // Matches of one post may be split across the set; merge them.
                auto it = post_index_.find(m.post_id);
                if (it == post_index_.end()) {
                    it = post_index_.emplace(m.post_id, posts_.size()).first;
                    posts_.emplace_back();
                }
                current = m.post_id;
                first = false;
            }
            TermRef key{m.child_term, m.category};
            auto cit = child_id_.find(key);
            if (cit == child_id_.end()) {
                cit = child_id_.emplace(key, static_cast<std::uint32_t>(children_.size())).first;
                children_.push_back(key);
            }
            posts_[post_index_[m.post_id]].push_back({cit->second, parent_id.at(m.parent_term)});
        }
        for (auto& p : posts_) {
            std::sort(p.begin(), p.end());
            p.erase(std::unique(p.begin(), p.end()), p.end());
        }
    }

    const std::vector<TermRef>& children() const { return children_; }
    std::optional<std::uint32_t> child_id(const TermRef& t) const {
        auto it = child_id_.find(t);
        if (it == child_id_.end()) return std::nullopt;
        return it->second;
    }

    // Network with the matches of excluded children dropped.
    CoMentionGraph graph(const std::vector<bool>& excluded = {}) const {
        std::unordered_map<std::uint64_t, std::uint64_t> weights;
        std::vector<bool> present(parents_.size(), false);
        std::vector<std::uint32_t> ids;
        for (const auto& post : posts_) {
            ids.clear();
            for (const auto& [child, parent] : post)
                if (excluded.empty() || !excluded[child]) ids.push_back(parent);
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            for (std::size_t i = 0; i < ids.size(); ++i) {
                present[ids[i]] = true;
                for (std::size_t j = i + 1; j < ids.size(); ++j)
                    ++weights[(static_cast<std::uint64_t>(ids[i]) << 32) | ids[j]];
            }
        }
        CoMentionGraph g;
        g.corpus_id = corpus_id_;
        g.lexicon_version = lexicon_version_;
        std::vector<std::uint32_t> remap(parents_.size(), 0);
        for (std::uint32_t p = 0; p < parents_.size(); ++p) {
            if (!present[p]) continue;
            remap[p] = static_cast<std::uint32_t>(g.nodes.size());
            g.nodes.push_back(parents_[p]);
        }
        for (const auto& [key, w] : weights)
            g.edges[{remap[static_cast<std::uint32_t>(key >> 32)], remap[static_cast<std::uint32_t>(key & 0xffffffffu)]}] = w;
        return g;
    }

    CoMentionGraph graph_without(const std::vector<TermRef>& removed) const {
        std::vector<bool> excluded(children_.size(), false);
        for (const auto& t : removed)
            if (auto id = child_id(t)) excluded[*id] = true;
        return graph(excluded);
    }

private:
    std::string corpus_id_;
    std::string lexicon_version_;
    std::vector<std::string> parents_;  // sorted
    std::vector<TermRef> children_;
    std::map<TermRef, std::uint32_t> child_id_;
    std::unordered_map<std::string, std::size_t> post_index_;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> posts_;
};

// Each post contributes 1 to every unordered pair of distinct parents it mentions.
inline CoMentionGraph build_network(const MatchSet& matches) {
    if (matches.matches.empty()) throw Error(Errc::invalid_argument, "cannot build a network from no matches");
    return CoMentionIndex(matches).graph();
}

inline std::string edges_to_tsv(const CoMentionGraph& g) {
    std::vector<std::tuple<std::string, std::string, std::uint64_t>> rows;
    for (const auto& [e, w] : g.edges) rows.emplace_back(g.nodes[e.first], g.nodes[e.second], w);
    std::sort(rows.begin(), rows.end());
    std::string out = "parent_a\tparent_b\tweight\n";
    for (const auto& [a, b, w] : rows) out += a + "\t" + b + "\t" + std::to_string(w) + "\n";
    return out;
}

inline CoMentionGraph parse_edges(std::string_view content) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> raw;
    std::set<std::string> nodes;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty() || (line.number == 1 && line.text.rfind("parent_a\t", 0) == 0)) continue;
        auto cols = split_tabs(line.text);
        auto w = cols.size() == 3 ? parse_int(cols[2]) : std::nullopt;
        if (!w || *w < 1) throw Error(Errc::parse, "edge list line " + std::to_string(line.number) + ": malformed");
        std::string a(cols[0]), b(cols[1]);
        if (a == b) throw Error(Errc::parse, "edge list line " + std::to_string(line.number) + ": self-loop");
        if (b < a) std::swap(a, b);
        raw[{a, b}] += static_cast<std::uint64_t>(*w);
        nodes.insert(a);
        nodes.insert(b);
    }
    CoMentionGraph g;
    g.nodes.assign(nodes.begin(), nodes.end());
    for (const auto& [e, w] : raw) g.edges[{*g.index_of(e.first), *g.index_of(e.second)}] = w;
    return g;
}

// ---------------------------------------------------------------------------
// Eigenvector centrality

struct CentralityResult {
    std::vector<std::string> nodes;
    std::vector<double> scores;  // aligned with nodes, unit L2 norm, non-negative
    double dominant_eigenvalue = 0;
    std::size_t iterations = 0;
    double residual = 0;  // max |A x - lambda x|

    double score(std::string_view label) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] == label) return scores[i];
        return 0.0;
    }
};

struct CentralityOptions {
    double tolerance = 1e-12;
    std::size_t max_iterations = 100000;
};

// Power iteration on the weighted adjacency from a uniform positive start.
// Each step applies A + c I with c half the current Rayleigh quotient; the
// shift leaves eigenvectors alone but breaks the +/-lambda tie that makes
// plain power iteration oscillate on bipartite components.
inline CentralityResult eigenvector_centrality(const CoMentionGraph& g, CentralityOptions opt = {}) {
    if (g.edges.empty()) throw Error(Errc::invalid_argument, "eigenvector centrality needs at least one edge");
    const std::size_t n = g.nodes.size();
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(n);
    for (const auto& [e, w] : g.edges) {
        adj[e.first].emplace_back(e.second, static_cast<double>(w));
        adj[e.second].emplace_back(e.first, static_cast<double>(w));
    }
    auto multiply = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0;
            for (const auto& [j, w] : adj[i]) s += w * x[j];
            y[i] = s;
        }
    };
    auto norm2 = [](const std::vector<double>& v) {
        double s = 0;
        for (double d : v) s += d * d;
        return std::sqrt(s);
    };

    std::size_t active = 0;
    for (std::size_t i = 0; i < n; ++i) active += adj[i].empty() ? 0 : 1;
    std::vector<double> x(n, 0.0), ax(n, 0.0), next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = adj[i].empty() ? 0.0 : 1.0 / std::sqrt(static_cast<double>(active));

    CentralityResult r;
    r.nodes = g.nodes;
    bool converged = false;
    double diff = 0;
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        multiply(x, ax);
        double rayleigh = 0;
        for (std::size_t i = 0; i < n; ++i) rayleigh += x[i] * ax[i];
        const double shift = 0.5 * std::max(rayleigh, 0.0);
        for (std::size_t i = 0; i < n; ++i) next[i] = ax[i] + shift * x[i];
        const double nn = norm2(next);
        diff = 0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] /= nn;
            diff = std::max(diff, std::abs(next[i] - x[i]));
        }
        x.swap(next);
        r.iterations = it;
        if (diff < opt.tolerance) {
            converged = true;
            break;
        }
    }
    multiply(x, ax);
    double lambda = 0;
    for (std::size_t i = 0; i < n; ++i) lambda += x[i] * ax[i];
    double residual = 0;
    for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(ax[i] - lambda * x[i]));
    r.dominant_eigenvalue = lambda;
    r.residual = residual;
    if (!converged)
        throw Error(Errc::convergence, "power iteration did not converge in " + std::to_string(opt.max_iterations) +
                                           " iterations (step " + std::to_string(diff) + ", residual " +
                                           std::to_string(residual) + ")");
    r.scores = std::move(x);
    return r;
}

// ---------------------------------------------------------------------------
// Rankings

struct RankedItem {
    std::size_t rank = 0;  // 1-based
    std::string term;
    double score = 0;
};

struct RankedList {
    std::size_t k = 0;
    std::vector<RankedItem> items;

    std::vector<std::string> terms() const {
        std::vector<std::string> out;
        for (const auto& i : items) out.push_back(i.term);
        return out;
    }
};

// Score descending, ties by term ascending; nodes scoring exactly 0
// (isolated) are not ranked.
inline RankedList top_k(const CentralityResult& result, std::size_t k) {
    if (k < 1) throw Error(Errc::invalid_argument, "k must be >= 1");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < result.nodes.size(); ++i)
        if (result.scores[i] > 0) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (result.scores[a] != result.scores[b]) return result.scores[a] > result.scores[b];
        return result.nodes[a] < result.nodes[b];
    });
    RankedList out;
    out.k = k;
    for (std::size_t i = 0; i < order.size() && i < k; ++i)
        out.items.push_back({i + 1, result.nodes[order[i]], result.scores[order[i]]});
    return out;
}

inline std::string ranked_to_tsv(const RankedList& list) {
    std::string out = "rank\tparent_term\tscore\n";
    for (const auto& i : list.items) out += std::to_string(i.rank) + "\t" + i.term + "\t" + fixed(i.score, 6) + "\n";
    return out;
}

// k defaults to the number of rows.
inline RankedList parse_ranked(std::string_view content, std::optional<std::size_t> k = std::nullopt) {
    RankedList out;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty() || (line.number == 1 && line.text.rfind("rank\t", 0) == 0)) continue;
        auto cols = split_tabs(line.text);
        auto rank = cols.size() == 3 ? parse_int(cols[0]) : std::nullopt;
        auto score = cols.size() == 3 ? parse_double(cols[2]) : std::nullopt;
        if (!rank || !score) throw Error(Errc::parse, "ranking line " + std::to_string(line.number) + ": malformed");
        out.items.push_back({static_cast<std::size_t>(*rank), std::string(cols[1]), *score});
    }
    std::sort(out.items.begin(), out.items.end(), [](const RankedItem& a, const RankedItem& b) { return a.rank < b.rank; });
    out.k = k ? *k : out.items.size();
    if (out.items.size() > out.k) out.items.resize(out.k);
    return out;
}

}  // namespace lexrefine
