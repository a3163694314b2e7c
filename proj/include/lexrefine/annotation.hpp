#pragma once

// Dual-annotator labeling sessions, consensus, inter-rater agreement and
// per-term false-positive rates.

#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/lexicon.hpp>
#include <lexrefine/random.hpp>
#include <lexrefine/sample.hpp>
#include <lexrefine/tagger.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lexrefine {

enum class Verdict { TruePositive, FalsePositive, Unclear };
enum class Consensus { Match, Mismatch, Uncertain };
enum class SessionStatus { open, complete, adjudicated };

inline std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::TruePositive: return "TruePositive";
        case Verdict::FalsePositive: return "FalsePositive";
        case Verdict::Unclear: return "Unclear";
    }
    return "?";
}

inline std::string_view to_string(Consensus c) {
    switch (c) {
        case Consensus::Match: return "Match";
        case Consensus::Mismatch: return "Mismatch";
        case Consensus::Uncertain: return "Uncertain";
    }
    return "?";
}

inline std::string_view to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::open: return "open";
        case SessionStatus::complete: return "complete";
        case SessionStatus::adjudicated: return "adjudicated";
    }
    return "?";
}

inline Verdict parse_verdict_name(std::string_view s) {
    if (s == "TruePositive") return Verdict::TruePositive;
    if (s == "FalsePositive") return Verdict::FalsePositive;
    if (s == "Unclear") return Verdict::Unclear;
    throw Error(Errc::parse, "unknown verdict '" + std::string(s) + "'");
}

inline Consensus parse_consensus_name(std::string_view s) {
    if (s == "Match") return Consensus::Match;
    if (s == "Mismatch") return Consensus::Mismatch;
    if (s == "Uncertain") return Consensus::Uncertain;
    throw Error(Errc::parse, "unknown consensus '" + std::string(s) + "'");
}

inline SessionStatus parse_status_name(std::string_view s) {
    if (s == "open") return SessionStatus::open;
    if (s == "complete") return SessionStatus::complete;
    if (s == "adjudicated") return SessionStatus::adjudicated;
    throw Error(Errc::parse, "unknown session status '" + std::string(s) + "'");
}

// Match only when both say TruePositive, Mismatch only when both say
// FalsePositive; any Unclear or disagreement is Uncertain.
constexpr Consensus consensus_of(Verdict a, Verdict b) {
    if (a == Verdict::TruePositive && b == Verdict::TruePositive) return Consensus::Match;
    if (a == Verdict::FalsePositive && b == Verdict::FalsePositive) return Consensus::Mismatch;
    return Consensus::Uncertain;
}

struct Label {
    std::string match_id;
    std::string annotator_id;
    Verdict verdict{};
    std::string note;
    std::string timestamp;

    bool operator==(const Label&) const = default;
};

struct ConsensusRecord {
    std::string match_id;
    Consensus consensus{};

    bool operator==(const ConsensusRecord&) const = default;
};

struct Adjudication {
    std::string match_id;
    Consensus consensus{};
    std::string adjudicator_id;
    std::string note;
    std::string timestamp;
};

struct Progress {
    std::size_t labeled = 0;  // labels present
    std::size_t total = 0;    // labels required (2 per match)
};

// What a labeler gets back: never the other assignee's verdict.
struct LabelReceipt {
    std::string match_id;
    std::string annotator_id;
    Verdict verdict{};
    bool changed = false;
    Progress progress;
    SessionStatus status{};
};

class AnnotationSession {
public:
    struct Assignment {
        std::string match_id;
        std::array<std::string, 2> annotators;
    };

    AnnotationSession() = default;
    AnnotationSession(std::string session_id, std::string sample_id, std::vector<std::string> annotators,
                      std::vector<Assignment> assignment)
        : session_id_(std::move(session_id)),
          sample_id_(std::move(sample_id)),
          annotators_(std::move(annotators)),
          assignment_(std::move(assignment)) {
        for (std::size_t i = 0; i < assignment_.size(); ++i) {
            if (assignment_[i].annotators[0] == assignment_[i].annotators[1])
                throw Error(Errc::invalid_argument, "match " + assignment_[i].match_id + " assigned twice to one annotator");
            if (!index_.emplace(assignment_[i].match_id, i).second)
                throw Error(Errc::conflict, "match " + assignment_[i].match_id + " assigned twice");
        }
    }

    const std::string& session_id() const { return session_id_; }
    const std::string& sample_id() const { return sample_id_; }
    const std::vector<std::string>& annotators() const { return annotators_; }
    const std::vector<Assignment>& assignment() const { return assignment_; }
    SessionStatus status() const { return status_; }
    const std::vector<Label>& audit() const { return audit_; }
    const std::map<std::string, Adjudication>& adjudications() const { return adjudications_; }

    bool is_assigned(std::string_view match_id, std::string_view annotator) const {
        auto it = index_.find(std::string(match_id));
        if (it == index_.end()) return false;
        const auto& a = assignment_[it->second].annotators;
        return a[0] == annotator || a[1] == annotator;
    }

    bool has_match(std::string_view match_id) const { return index_.count(std::string(match_id)) > 0; }

    Progress progress() const { return {labels_.size(), assignment_.size() * 2}; }

    Progress progress_for(std::string_view annotator) const {
        Progress p;
        for (const auto& a : assignment_) {
            if (a.annotators[0] != annotator && a.annotators[1] != annotator) continue;
            ++p.total;
            if (labels_.count({a.match_id, std::string(annotator)})) ++p.labeled;
        }
        return p;
    }

    // Matches assigned to `annotator` that still need their label, in session order.
    std::vector<std::string> pending_for(std::string_view annotator) const {
        std::vector<std::string> out;
        for (const auto& a : assignment_) {
            if (a.annotators[0] != annotator && a.annotators[1] != annotator) continue;
            if (!labels_.count({a.match_id, std::string(annotator)})) out.push_back(a.match_id);
        }
        return out;
    }

    // The caller's own label, if any.
    std::optional<Label> own_label(std::string_view match_id, std::string_view annotator) const {
        auto it = labels_.find({std::string(match_id), std::string(annotator)});
        if (it == labels_.end()) return std::nullopt;
        return it->second;
    }

    LabelReceipt record_label(Label label) {
        auto it = index_.find(label.match_id);
        if (it == index_.end()) throw Error(Errc::not_found, "unknown match " + label.match_id);
        const auto& who = assignment_[it->second].annotators;
        if (who[0] != label.annotator_id && who[1] != label.annotator_id)
            throw Error(Errc::conflict,
                        "annotator " + label.annotator_id + " is not assigned to match " + label.match_id);
        auto key = std::make_pair(label.match_id, label.annotator_id);
        auto existing = labels_.find(key);
        bool same = existing != labels_.end() && existing->second.verdict == label.verdict &&
                    existing->second.note == label.note;
        if (!same && status_ != SessionStatus::open)
            throw Error(Errc::conflict, "session " + session_id_ + " is " + std::string(to_string(status_)));
        LabelReceipt r{label.match_id, label.annotator_id, label.verdict, !same, {}, status_};
        if (!same) {
            audit_.push_back(label);
            labels_[key] = std::move(label);
            if (labels_.size() == assignment_.size() * 2) status_ = SessionStatus::complete;
        }
        r.progress = progress();
        r.status = status_;
        return r;
    }

    // Both verdicts per match, assignment order. Only after completion.
    std::vector<std::pair<Verdict, Verdict>> verdict_pairs() const {
        require_complete();
        std::vector<std::pair<Verdict, Verdict>> out;
        for (const auto& a : assignment_)
            out.emplace_back(labels_.at({a.match_id, a.annotators[0]}).verdict,
                             labels_.at({a.match_id, a.annotators[1]}).verdict);
        return out;
    }

    // All labels, only after completion (blinding).
    std::vector<Label> labels() const {
        require_complete();
        std::vector<Label> out;
        for (const auto& a : assignment_)
            for (const auto& who : a.annotators) out.push_back(labels_.at({a.match_id, who}));
        return out;
    }

    void adjudicate(Adjudication adj) {
        require_complete();
        if (!has_match(adj.match_id)) throw Error(Errc::not_found, "unknown match " + adj.match_id);
        adjudications_[adj.match_id] = std::move(adj);
        status_ = SessionStatus::adjudicated;
    }

    bool is_complete() const { return status_ != SessionStatus::open; }

private:
    void require_complete() const {
        if (status_ == SessionStatus::open)
            throw Error(Errc::conflict, "session " + session_id_ + " is still open");
    }

    std::string session_id_;
    std::string sample_id_;
    std::vector<std::string> annotators_;
    std::vector<Assignment> assignment_;
    std::unordered_map<std::string, std::size_t> index_;
    std::map<std::pair<std::string, std::string>, Label> labels_;
    std::vector<Label> audit_;
    std::map<std::string, Adjudication> adjudications_;
    SessionStatus status_ = SessionStatus::open;
};

// Every match goes to two distinct annotators. Slots are filled block by
// block, each block a seeded permutation of the annotators, so loads differ
// by at most one task.
inline AnnotationSession create_session(const AnnotationSample& sample, std::vector<std::string> annotators,
                                        std::uint64_t seed, std::string session_id = {}) {
    {
        std::set<std::string> uniq(annotators.begin(), annotators.end());
        if (uniq.size() != annotators.size()) throw Error(Errc::invalid_argument, "duplicate annotator ids");
    }
    if (annotators.size() < 2) throw Error(Errc::invalid_argument, "a session needs at least 2 annotators");
    if (sample.match_ids.empty()) throw Error(Errc::invalid_argument, "sample has no matches");

    Rng rng(seed);
    std::vector<std::string> order = sample.match_ids;
    shuffle(rng, order);

    const std::size_t a = annotators.size();
    std::vector<std::size_t> slots;
    slots.reserve(order.size() * 2);
    while (slots.size() < order.size() * 2) {
        std::vector<std::size_t> perm(a);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        shuffle(rng, perm);
        // A match straddling two blocks must not get the same annotator twice.
        if (slots.size() % 2 == 1 && perm[0] == slots.back()) std::swap(perm[0], perm[1]);
        slots.insert(slots.end(), perm.begin(), perm.end());
    }

    std::unordered_map<std::string, std::array<std::string, 2>> pairs;
    for (std::size_t i = 0; i < order.size(); ++i)
        pairs[order[i]] = {annotators[slots[2 * i]], annotators[slots[2 * i + 1]]};
    std::vector<AnnotationSession::Assignment> assignment;
    for (const auto& m : sample.match_ids) assignment.push_back({m, pairs[m]});
    if (session_id.empty())
        session_id = "sess-" + hex64(fnv1a64(sample.sample_id + "|" + std::to_string(seed))).substr(0, 12);
    return AnnotationSession(std::move(session_id), sample.sample_id, std::move(annotators), std::move(assignment));
}

inline std::vector<ConsensusRecord> consensus(const AnnotationSession& session) {
    std::vector<ConsensusRecord> out;
    auto pairs = session.verdict_pairs();
    for (std::size_t i = 0; i < pairs.size(); ++i)
        out.push_back({session.assignment()[i].match_id, consensus_of(pairs[i].first, pairs[i].second)});
    return out;
}

// Consensus with adjudicator overrides applied.
inline std::vector<ConsensusRecord> adjudicated_consensus(const AnnotationSession& session) {
    auto out = consensus(session);
    for (auto& r : out)
        if (auto it = session.adjudications().find(r.match_id); it != session.adjudications().end())
            r.consensus = it->second.consensus;
    return out;
}

// Matches where the two annotators gave different verdicts.
inline std::vector<std::string> disagreements(const AnnotationSession& session) {
    std::vector<std::string> out;
    auto pairs = session.verdict_pairs();
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].first != pairs[i].second) out.push_back(session.assignment()[i].match_id);
    return out;
}

// ---------------------------------------------------------------------------
// Cohen's kappa

// kappa = (p_o - p_e) / (1 - p_e) from a square contingency table.
inline double kappa_from_table(const std::vector<std::vector<double>>& table) {
    const std::size_t k = table.size();
    double n = 0, agree = 0;
    std::vector<double> rows(k, 0), cols(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        if (table[i].size() != k) throw Error(Errc::invalid_argument, "kappa table must be square");
        for (std::size_t j = 0; j < k; ++j) {
            n += table[i][j];
            rows[i] += table[i][j];
            cols[j] += table[i][j];
        }
        agree += table[i][i];
    }
    if (n <= 0) throw Error(Errc::invalid_argument, "kappa of an empty table");
    const double po = agree / n;
    double pe = 0;
    for (std::size_t i = 0; i < k; ++i) pe += (rows[i] / n) * (cols[i] / n);
    if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

template <typename T>
double cohen_kappa(const std::vector<T>& labels_a, const std::vector<T>& labels_b, const std::vector<T>& classes) {
    if (labels_a.size() != labels_b.size())
        throw Error(Errc::invalid_argument, "kappa inputs differ in length");
    if (labels_a.empty()) throw Error(Errc::invalid_argument, "kappa of empty input");
    auto idx = [&](const T& v) {
        auto it = std::find(classes.begin(), classes.end(), v);
        if (it == classes.end()) throw Error(Errc::invalid_argument, "label outside the class list");
        return static_cast<std::size_t>(it - classes.begin());
    };
    std::vector<std::vector<double>> table(classes.size(), std::vector<double>(classes.size(), 0.0));
    for (std::size_t i = 0; i < labels_a.size(); ++i) table[idx(labels_a[i])][idx(labels_b[i])] += 1;
    return kappa_from_table(table);
}

inline const std::vector<Verdict>& verdict_classes() {
    static const std::vector<Verdict> v = {Verdict::TruePositive, Verdict::FalsePositive, Verdict::Unclear};
    return v;
}

// First vs second assignee over all matches of a completed session.
inline double session_kappa(const AnnotationSession& session) {
    std::vector<Verdict> a, b;
    for (auto [x, y] : session.verdict_pairs()) {
        a.push_back(x);
        b.push_back(y);
    }
    return cohen_kappa(a, b, verdict_classes());
}

// ---------------------------------------------------------------------------
// False-positive rates

struct FprRecord {
    std::string child_term;
    std::string parent_term;
    Category category{};
    std::uint64_t sample_frequency = 0;
    std::uint64_t fp_count = 0;
    std::uint64_t corpus_frequency = 0;

    double fpr() const {
        return sample_frequency == 0 ? 0.0 : static_cast<double>(fp_count) / static_cast<double>(sample_frequency);
    }
};

struct FprTotals {
    std::uint64_t sample_frequency = 0;
    std::uint64_t fp_count = 0;
    double fpr() const {
        return sample_frequency == 0 ? 0.0 : static_cast<double>(fp_count) / static_cast<double>(sample_frequency);
    }
};

struct FprTable {
    std::vector<FprRecord> rows;  // sorted by (category, child_term)
    std::map<Category, FprTotals> totals;

    const FprRecord* find(std::string_view child, Category c) const {
        for (const auto& r : rows)
            if (r.category == c && r.child_term == child) return &r;
        return nullptr;
    }

    void recompute_totals() {
        totals.clear();
        for (Category c : kCategories) totals[c] = {};
        for (const auto& r : rows) {
            totals[r.category].sample_frequency += r.sample_frequency;
            totals[r.category].fp_count += r.fp_count;
        }
    }
};

enum class FpMode {
    mismatch_and_uncertain,  // unclear and disagreement count as false positives
    mismatch_only,
};

inline FprTable compute_fpr(const std::vector<ConsensusRecord>& consensus, const MatchSet& sample,
                            const FrequencyTable& corpus_freqs, FpMode mode = FpMode::mismatch_and_uncertain) {
    std::unordered_map<std::string, const TermMatch*> by_id;
    for (const auto& m : sample.matches) by_id.emplace(m.match_id, &m);
    std::map<std::pair<Category, std::string>, FprRecord> rows;
    for (const auto& c : consensus) {
        auto it = by_id.find(c.match_id);
        if (it == by_id.end()) throw Error(Errc::not_found, "consensus references unknown match " + c.match_id);
        const TermMatch& m = *it->second;
        auto& r = rows[{m.category, m.child_term}];
        if (r.sample_frequency == 0) {
            r.child_term = m.child_term;
            r.parent_term = m.parent_term;
            r.category = m.category;
            r.corpus_frequency = corpus_freqs.get(m.child_term, m.category);
        }
        ++r.sample_frequency;
        bool fp = c.consensus == Consensus::Mismatch ||
                  (mode == FpMode::mismatch_and_uncertain && c.consensus == Consensus::Uncertain);
        if (fp) ++r.fp_count;
    }
    FprTable t;
    for (auto& [_, r] : rows) t.rows.push_back(std::move(r));
    t.recompute_totals();
    return t;
}

// The same statistics aggregated over parents, per category.
inline std::vector<FprRecord> fpr_by_parent(const FprTable& table) {
    std::map<std::pair<Category, std::string>, FprRecord> agg;
    for (const auto& r : table.rows) {
        auto& a = agg[{r.category, r.parent_term}];
        a.child_term = r.parent_term;
        a.parent_term = r.parent_term;
        a.category = r.category;
        a.sample_frequency += r.sample_frequency;
        a.fp_count += r.fp_count;
        a.corpus_frequency += r.corpus_frequency;
    }
    std::vector<FprRecord> out;
    for (auto& [_, r] : agg) out.push_back(std::move(r));
    return out;
}

// Rows with fpr >= fpr_min and sample_frequency >= freq_min, most frequent
// first; ties by fpr (descending) then child term.
inline std::vector<TermRef> select_removable(const FprTable& table, double fpr_min = 0.5,
                                             std::uint64_t freq_min = 20) {
    std::vector<const FprRecord*> hits;
    for (const auto& r : table.rows)
        if (r.sample_frequency >= freq_min && r.sample_frequency > 0 && r.fpr() >= fpr_min) hits.push_back(&r);
    std::sort(hits.begin(), hits.end(), [](const FprRecord* a, const FprRecord* b) {
        if (a->sample_frequency != b->sample_frequency) return a->sample_frequency > b->sample_frequency;
        if (a->fpr() != b->fpr()) return a->fpr() > b->fpr();
        return std::tie(a->child_term, a->category) < std::tie(b->child_term, b->category);
    });
    std::vector<TermRef> out;
    for (const auto* r : hits) out.push_back({r->child_term, r->category});
    return out;
}

inline std::string fpr_rows_to_tsv(const std::vector<FprRecord>& rows) {
    std::string out = "child_term\tcategory\tparent_term\tsample_frequency\tfp_count\tfpr\tcorpus_frequency\n";
    for (const auto& r : rows)
        out += r.child_term + "\t" + std::string(to_string(r.category)) + "\t" + r.parent_term + "\t" +
               std::to_string(r.sample_frequency) + "\t" + std::to_string(r.fp_count) + "\t" + fixed(r.fpr(), 6) +
               "\t" + std::to_string(r.corpus_frequency) + "\n";
    return out;
}

inline std::string fpr_to_tsv(const FprTable& t) { return fpr_rows_to_tsv(t.rows); }

inline std::string fpr_totals_to_tsv(const FprTable& t) {
    std::string out = "category\tsample_frequency\tfp_count\tfpr\n";
    for (const auto& [c, tot] : t.totals)
        out += std::string(to_string(c)) + "\t" + std::to_string(tot.sample_frequency) + "\t" +
               std::to_string(tot.fp_count) + "\t" + fixed(tot.fpr(), 6) + "\n";
    return out;
}

// The fpr column is checked against the counts (it is derived, not trusted).
inline FprTable parse_fpr_table(std::string_view content) {
    FprTable t;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty() || (line.number == 1 && line.text.rfind("child_term\t", 0) == 0)) continue;
        auto cols = split_tabs(line.text);
        auto where = "fpr table line " + std::to_string(line.number) + ": ";
        if (cols.size() != 7) throw Error(Errc::parse, where + "expected 7 columns");
        auto sf = parse_int(cols[3]), fp = parse_int(cols[4]), cf = parse_int(cols[6]);
        auto fpr = parse_double(cols[5]);
        if (!sf || !fp || !cf || !fpr || *sf < 0 || *fp < 0 || *cf < 0 || *fp > *sf)
            throw Error(Errc::parse, where + "bad counts");
        FprRecord r{std::string(cols[0]), std::string(cols[2]), category_or_throw(cols[1]),
                    static_cast<std::uint64_t>(*sf), static_cast<std::uint64_t>(*fp),
                    static_cast<std::uint64_t>(*cf)};
        if (std::abs(r.fpr() - *fpr) > 5e-3) throw Error(Errc::parse, where + "fpr column disagrees with counts");
        t.rows.push_back(std::move(r));
    }
    std::sort(t.rows.begin(), t.rows.end(), [](const FprRecord& a, const FprRecord& b) {
        return std::tie(a.category, a.child_term) < std::tie(b.category, b.child_term);
    });
    t.recompute_totals();
    return t;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const Label& l) {
    nlohmann::json j = {{"match_id", l.match_id},
                        {"annotator_id", l.annotator_id},
                        {"verdict", to_string(l.verdict)},
                        {"timestamp", l.timestamp}};
    if (!l.note.empty()) j["note"] = l.note;
    return j;
}

inline Label label_from_json(const nlohmann::json& j) {
    return {j.at("match_id").get<std::string>(), j.at("annotator_id").get<std::string>(),
            parse_verdict_name(j.at("verdict").get<std::string>()), j.value("note", std::string()),
            j.value("timestamp", std::string())};
}

inline std::vector<Label> parse_labels(std::string_view content) {
    std::vector<Label> out;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty()) continue;
        try {
            out.push_back(label_from_json(nlohmann::json::parse(line.text)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, "labels line " + std::to_string(line.number) + ": " + e.what());
        }
    }
    return out;
}

inline std::string labels_to_jsonl(const std::vector<Label>& labels) {
    std::string out;
    for (const auto& l : labels) out += to_json(l).dump() + "\n";
    return out;
}

inline nlohmann::json to_json(const Adjudication& a) {
    return {{"match_id", a.match_id},
            {"consensus", to_string(a.consensus)},
            {"adjudicator_id", a.adjudicator_id},
            {"note", a.note},
            {"timestamp", a.timestamp}};
}

inline Adjudication adjudication_from_json(const nlohmann::json& j) {
    return {j.at("match_id").get<std::string>(), parse_consensus_name(j.at("consensus").get<std::string>()),
            j.value("adjudicator_id", std::string()), j.value("note", std::string()),
            j.value("timestamp", std::string())};
}

inline nlohmann::json session_to_json(const AnnotationSession& s) {
    nlohmann::json assignment = nlohmann::json::array();
    for (const auto& a : s.assignment()) assignment.push_back({{"match_id", a.match_id}, {"annotators", a.annotators}});
    return {{"session_id", s.session_id()},
            {"sample_id", s.sample_id()},
            {"annotators", s.annotators()},
            {"assignment", assignment}};
}

inline AnnotationSession session_from_json(const nlohmann::json& j) {
    std::vector<AnnotationSession::Assignment> assignment;
    for (const auto& a : j.at("assignment"))
        assignment.push_back({a.at("match_id").get<std::string>(), a.at("annotators").get<std::array<std::string, 2>>()});
    return AnnotationSession(j.at("session_id").get<std::string>(), j.value("sample_id", std::string()),
                             j.at("annotators").get<std::vector<std::string>>(), std::move(assignment));
}

// Consensus straight from a label log (last label per (match, annotator)
// wins); every match must carry exactly two annotators.
inline std::vector<ConsensusRecord> consensus_from_labels(const std::vector<Label>& labels) {
    std::map<std::string, std::map<std::string, Verdict>> by_match;
    std::vector<std::string> order;
    for (const auto& l : labels) {
        if (!by_match.count(l.match_id)) order.push_back(l.match_id);
        by_match[l.match_id][l.annotator_id] = l.verdict;
    }
    std::vector<ConsensusRecord> out;
    for (const auto& id : order) {
        const auto& v = by_match[id];
        if (v.size() != 2)
            throw Error(Errc::invalid_argument, "match " + id + " has " + std::to_string(v.size()) +
                                                    " annotators; consensus needs exactly 2");
        out.push_back({id, consensus_of(v.begin()->second, std::next(v.begin())->second)});
    }
    return out;
}

inline std::vector<std::pair<Verdict, Verdict>> verdict_pairs_from_labels(const std::vector<Label>& labels) {
    std::map<std::string, std::map<std::string, Verdict>> by_match;
    std::vector<std::string> order;
    for (const auto& l : labels) {
        if (!by_match.count(l.match_id)) order.push_back(l.match_id);
        by_match[l.match_id][l.annotator_id] = l.verdict;
    }
    std::vector<std::pair<Verdict, Verdict>> out;
    for (const auto& id : order) {
        const auto& v = by_match[id];
        if (v.size() != 2) throw Error(Errc::invalid_argument, "match " + id + " does not have exactly 2 labels");
        out.emplace_back(v.begin()->second, std::next(v.begin())->second);
    }
    return out;
}

}  // namespace lexrefine
