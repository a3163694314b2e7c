#pragma once

// Brute-force reference implementations and fixture builders shared by the
// unit suites and the acceptance runner. None of these call the code they
// check except to load inputs.

// Eigen first: <resolv.h>, pulled in by the HTTP client, defines a `_res` macro.
#include <Eigen/Dense>

#include <lexrefine/lexrefine.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

namespace oracle {

namespace lr = lexrefine;

inline lr::fs::path data_dir() { return lr::fs::path(LEXREFINE_DATA_DIR); }

struct TempDir {
    lr::fs::path path;
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path = lr::fs::temp_directory_path() /
               ("lexrefine-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        lr::fs::remove_all(path);
        lr::fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        lr::fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

// ---------------------------------------------------------------------------
// Tagger: ASCII fixtures, words are maximal [A-Za-z0-9] runs.

struct SpanMatch {
    std::string post_id;
    std::size_t start, end;
    lr::Category category;
    std::string child, parent;

    auto key() const { return std::tie(post_id, start, category, end, child, parent); }
    bool operator==(const SpanMatch& o) const { return key() == o.key(); }
    bool operator<(const SpanMatch& o) const { return key() < o.key(); }
};

struct Pattern {
    std::string text;  // lower-case words joined by single spaces
    lr::Category category;
    std::string parent;
};

// Substring scan over " w1 w2 ... wn " for every pattern; per category the
// leftmost word position wins, and from it the pattern covering the most words.
inline std::vector<SpanMatch> naive_tag(const std::string& post_id, const std::string& text,
                                        const std::vector<Pattern>& patterns) {
    std::vector<std::pair<std::size_t, std::size_t>> words;
    for (std::size_t i = 0; i < text.size();) {
        if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
        words.push_back({i, j});
        i = j;
    }
    std::string joined = " ";
    std::vector<std::size_t> word_at;  // offset in `joined` of each word
    for (auto [s, e] : words) {
        word_at.push_back(joined.size());
        for (std::size_t k = s; k < e; ++k) joined.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[k]))));
        joined.push_back(' ');
    }
    auto word_count = [](const std::string& p) { return static_cast<std::size_t>(std::count(p.begin(), p.end(), ' ')) + 1; };

    std::vector<SpanMatch> out;
    for (lr::Category c : lr::kCategories) {
        std::size_t i = 0;
        while (i < words.size()) {
            const Pattern* best = nullptr;
            std::size_t best_len = 0;
            for (const auto& p : patterns) {
                if (p.category != c) continue;
                const std::string needle = " " + p.text + " ";
                if (joined.compare(word_at[i] - 1, needle.size(), needle) != 0) continue;
                std::size_t len = word_count(p.text);
                if (len > best_len || (len == best_len && p.text < best->text)) {
                    best = &p;
                    best_len = len;
                }
            }
            if (!best) {
                ++i;
                continue;
            }
            out.push_back({post_id, words[i].first, words[i + best_len - 1].second, c, best->text, best->parent});
            i += best_len;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<SpanMatch> as_spans(const std::vector<lr::TermMatch>& ms) {
    std::vector<SpanMatch> out;
    for (const auto& m : ms) out.push_back({m.post_id, m.start, m.end, m.category, m.child_term, m.parent_term});
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<Pattern> patterns_of(const lr::Lexicon& lex) {
    std::vector<Pattern> out;
    for (const auto& e : lex.entries()) out.push_back({e.child_term, e.category, e.parent_term});
    return out;
}

struct TaggerFixture {
    std::string lexicon_tsv;
    std::vector<std::pair<std::string, std::string>> posts;  // (post_id, text)
};

inline TaggerFixture random_tagger_fixture(std::mt19937_64& rng) {
    static const std::vector<std::string> vocab = {"hot",  "cold",  "feeling", "rose", "tea",    "night",
                                                   "high", "ginger", "ale",    "sore", "throat", "b12"};
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    TaggerFixture f;
    f.lexicon_tsv = "child_term\tparent_term\tcategory\tsource\n";
    std::set<std::pair<std::string, int>> used;
    const std::size_t n_entries = 1 + pick(14);
    for (std::size_t e = 0; e < n_entries; ++e) {
        std::string term;
        const std::size_t len = 1 + pick(3);
        for (std::size_t w = 0; w < len; ++w) term += (w ? " " : "") + vocab[pick(vocab.size())];
        const int cat = static_cast<int>(pick(4));
        if (!used.insert({term, cat}).second) continue;
        f.lexicon_tsv += term + "\tqqparent" + std::to_string(pick(5)) + "\t" +
                         std::string(lr::to_string(static_cast<lr::Category>(cat))) + "\tfixture\n";
    }
    static const std::vector<std::string> seps = {" ", " ", " ", ", ", ". ", "! ", "? ", " (", ") ", "  "};
    const std::size_t n_posts = 1 + pick(6);
    for (std::size_t p = 0; p < n_posts; ++p) {
        std::string text;
        const std::size_t n_words = pick(14);
        for (std::size_t w = 0; w < n_words; ++w) {
            std::string word = pick(8) == 0 ? "zz" + std::to_string(pick(3)) : vocab[pick(vocab.size())];
            if (pick(5) == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
            if (pick(8) == 0)
                for (auto& ch : word) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            text += word + seps[pick(seps.size())];
        }
        f.posts.push_back({"p" + std::to_string(p), text});
    }
    return f;
}

// Empty when the matcher agrees with the naive scan on the fixture, before and
// after removing a random subset of entries; otherwise the first discrepancy.
inline std::string tagger_fixture_failure(const TaggerFixture& f, std::mt19937_64& rng) {
    auto lex = lr::parse_lexicon(f.lexicon_tsv);
    std::vector<lr::TermRef> removed;
    for (const auto& e : lex.entries())
        if (rng() % 3 == 0) removed.push_back({e.child_term, e.category});
    if (removed.size() == lex.size()) removed.pop_back();
    auto refined = lr::remove_terms(lex, removed, "2024-01-01T00:00:00Z");
    std::set<lr::TermRef> gone(removed.begin(), removed.end());
    const auto all = patterns_of(lex);
    std::vector<Pattern> kept;
    for (const auto& p : all)
        if (!gone.count({p.text, p.category})) kept.push_back(p);
    lr::Matcher full(lex), less(refined);
    for (const auto& [id, text] : f.posts) {
        auto before = as_spans(full.tag(id, text));
        if (before != naive_tag(id, text, all)) return "base lexicon differs on '" + text + "'";
        auto after = as_spans(less.tag(id, text));
        if (after != naive_tag(id, text, kept)) return "refined lexicon differs on '" + text + "'";
        for (const auto& b : before) {
            if (gone.count({b.child, b.category})) continue;
            bool near_removed = false;
            for (const auto& o : before)
                if (o.category == b.category && gone.count({o.child, o.category})) near_removed = true;
            if (!near_removed && std::find(after.begin(), after.end(), b) == after.end())
                return "surviving match of '" + b.child + "' lost on '" + text + "'";
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Fagin K with ties: an element missing from a list ranks below every present
// one. A pair tied in one list costs p when the other list ranks both; any
// other pair costs 1 when the two lists order it differently.

inline double fagin_pairwise(const std::vector<int>& a, const std::vector<int>& b, double p) {
    const double inf = std::numeric_limits<double>::infinity();
    std::set<int> uni(a.begin(), a.end());
    uni.insert(b.begin(), b.end());
    auto rank = [&](const std::vector<int>& l, int x) {
        for (std::size_t i = 0; i < l.size(); ++i)
            if (l[i] == x) return static_cast<double>(i);
        return inf;
    };
    std::vector<int> u(uni.begin(), uni.end());
    double total = 0;
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = i + 1; j < u.size(); ++j) {
            const double ai = rank(a, u[i]), aj = rank(a, u[j]), bi = rank(b, u[i]), bj = rank(b, u[j]);
            const bool tie_a = ai == aj, tie_b = bi == bj;
            if (tie_a || tie_b) {
                total += p;
                continue;
            }
            if ((ai < aj) != (bi < bj)) total += 1;
        }
    return total;
}

// Every ordered selection of k distinct elements from {0..u-1}.
inline std::vector<std::vector<int>> all_top_k(int u, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::vector<bool> used(static_cast<std::size_t>(u), false);
    auto rec = [&](auto&& self) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int x = 0; x < u; ++x) {
            if (used[static_cast<std::size_t>(x)]) continue;
            used[static_cast<std::size_t>(x)] = true;
            cur.push_back(x);
            self(self);
            cur.pop_back();
            used[static_cast<std::size_t>(x)] = false;
        }
    };
    rec(rec);
    return out;
}

// ---------------------------------------------------------------------------
// Dense spectral reference for eigenvector centrality.

inline lr::CoMentionGraph random_connected_graph(std::mt19937_64& rng, std::size_t n) {
    lr::CoMentionGraph g;
    for (std::size_t i = 0; i < n; ++i) {
        std::string name = "n" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        g.nodes.push_back(name);
    }
    auto w = [&] { return static_cast<std::uint64_t>(1 + rng() % 50); };
    for (std::size_t i = 1; i < n; ++i) {
        auto j = static_cast<std::uint32_t>(rng() % i);
        g.edges[{j, static_cast<std::uint32_t>(i)}] = w();
    }
    const double density = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j)
            if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < density) g.edges[{i, j}] = w();
    return g;
}

// Unit-norm non-negative eigenvector of the largest eigenvalue.
inline std::vector<double> spectral_centrality(const lr::CoMentionGraph& g, double* lambda = nullptr) {
    const auto n = static_cast<Eigen::Index>(g.nodes.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [e, w] : g.edges) {
        a(e.first, e.second) = static_cast<double>(w);
        a(e.second, e.first) = static_cast<double>(w);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    Eigen::VectorXd v = es.eigenvectors().col(n - 1);
    if (v.sum() < 0) v = -v;
    v /= v.norm();
    if (lambda) *lambda = es.eigenvalues()(n - 1);
    return {v.data(), v.data() + n};
}

// ---------------------------------------------------------------------------
// Agreement statistics computed from first principles.

inline double kappa_reference(const std::vector<std::vector<double>>& t) {
    double n = 0, diag = 0;
    std::vector<double> rows(t.size(), 0), cols(t.size(), 0);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j) {
            n += t[i][j];
            rows[i] += t[i][j];
            cols[j] += t[i][j];
            if (i == j) diag += t[i][j];
        }
    double chance = 0;
    for (std::size_t i = 0; i < t.size(); ++i) chance += rows[i] * cols[i] / (n * n);
    return (diag / n - chance) / (1 - chance);
}

// Pearson correlation of the two 0/1 indicator vectors behind a 2x2 table.
inline double mcc_reference(double tp, double fp, double fn, double tn) {
    const double n = tp + fp + fn + tn;
    const double mean_j = (tp + fp) / n, mean_h = (tp + fn) / n;
    const double cov = tp / n - mean_j * mean_h;
    return cov / std::sqrt(mean_j * (1 - mean_j) * mean_h * (1 - mean_h));
}

inline std::vector<std::vector<double>> read_table(const lr::fs::path& p) {
    std::vector<std::vector<double>> t;
    const std::string content = lr::read_file(p);
    for (const auto& line : lr::split_lines(content)) {
        if (line.text.empty()) continue;
        std::vector<double> row;
        for (auto c : lr::split_tabs(line.text)) row.push_back(*lr::parse_double(c));
        t.push_back(row);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Fixture with fixed per-category match and false-positive counts: category c
// gets `total` matches over a few terms, the first `fp` of them Mismatch or
// Uncertain, the rest Match.

struct CategoryFixture {
    lr::MatchSet sample;
    std::vector<lr::ConsensusRecord> consensus;
};

inline CategoryFixture category_fixture(const std::map<lr::Category, std::pair<std::size_t, std::size_t>>& counts) {
    CategoryFixture f;
    std::size_t serial = 0;
    for (const auto& [cat, tf] : counts) {
        const auto [total, fp] = tf;
        for (std::size_t i = 0; i < total; ++i) {
            lr::TermMatch m;
            m.post_id = "post" + std::to_string(serial);
            m.child_term = std::string(lr::to_string(cat)) + "-term" + std::to_string(i % 7);
            m.parent_term = "parent" + std::to_string(i % 3);
            m.category = cat;
            m.start = 0;
            m.end = 4;
            m.match_id = lr::make_match_id(m.post_id, m.start, m.end, cat);
            ++serial;
            lr::Consensus c = i < fp ? (i % 3 == 0 ? lr::Consensus::Uncertain : lr::Consensus::Mismatch)
                                     : lr::Consensus::Match;
            f.consensus.push_back({m.match_id, c});
            f.sample.matches.push_back(std::move(m));
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// The synthetic pipeline end to end. Returns every artifact by name.

struct PipelineResult {
    std::map<std::string, std::string> files;
    std::vector<lr::TermRef> planted;
    std::vector<lr::TermRef> selected;
    lr::NullModelReport report;
};

inline PipelineResult run_synthetic_pipeline(std::uint64_t seed, unsigned threads = 4,
                                             std::size_t n_samples = 1000,
                                             std::vector<std::size_t> ks = {10, 20, 50, 100}) {
    PipelineResult r;
    lr::SynthConfig sc;
    sc.seed = seed;
    auto data = lr::generate_synthetic(sc);
    r.planted = data.planted;
    const std::string ts = "2024-01-01T00:00:00Z";

    auto corpus = lr::parse_corpus(data.corpus_jsonl, "synthetic.jsonl");
    auto lex = lr::parse_lexicon(data.lexicon_tsv, "synthetic-lexicon");
    auto filtered = lr::filter_common_words(lex, lr::parse_word_frequencies(data.word_frequencies_tsv), 300, ts);
    auto matches = lr::tag_corpus(lr::Matcher(filtered), corpus, threads);
    auto sample = lr::sample_matched_posts(corpus, matches, 800, seed);
    auto sample_ms = lr::sample_matches(sample, matches);
    auto session = lr::create_session(sample, {"a1", "a2", "a3"}, seed, "");
    auto labels = lr::scripted_labels(session, sample_ms, data.truth, {0.9, seed, ts});
    for (const auto& l : labels) session.record_label(l);
    auto fpr = lr::compute_fpr(lr::consensus(session), sample_ms, lr::child_frequencies(matches));
    r.selected = lr::select_removable(fpr, 0.5, 20);
    auto refined = lr::remove_terms(filtered, r.selected, ts);

    lr::NullModelConfig cfg;
    cfg.seed = seed;
    cfg.n_samples = n_samples;
    cfg.k_values = std::move(ks);
    cfg.threads = threads;
    r.report = lr::run_null_model(matches, fpr, r.selected, cfg);

    auto base_rank = lr::top_k(lr::eigenvector_centrality(lr::build_network(matches)), 10);
    auto refined_rank =
        lr::top_k(lr::eigenvector_centrality(lr::build_network(lr::tag_corpus(lr::Matcher(refined), corpus))), 10);

    r.files["matches.jsonl"] = lr::matches_to_jsonl(matches);
    r.files["sample.json"] = lr::manifest_text(sample);
    r.files["labels.jsonl"] = lr::labels_to_jsonl(labels);
    r.files["fpr.tsv"] = lr::fpr_to_tsv(fpr);
    r.files["ledger.jsonl"] = lr::ledger_to_jsonl(refined.ledger());
    r.files["refined_lexicon.tsv"] = refined.to_tsv();
    r.files["base_top10.tsv"] = lr::ranked_to_tsv(base_rank);
    r.files["refined_top10.tsv"] = lr::ranked_to_tsv(refined_rank);
    r.files["compare.txt"] = "K " + lr::compact(lr::fagin_k(base_rank, refined_rank, 0.5)) + "\nCER " +
                             lr::compact(lr::common_elements_ratio(base_rank, refined_rank)) + "\n";
    r.files["nullmodel.json"] = to_json(r.report).dump(2) + "\n";
    r.files["nullmodel.tsv"] = lr::null_model_to_tsv(r.report);
    return r;
}

}  // namespace oracle
