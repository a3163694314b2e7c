#pragma once

// Parent/child biomedical dictionary: loading, common-word filtering and
// refinement by child-term removal.

#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/text.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lexrefine {

enum class Category { Allergen, Drug, MedicalTerm, NaturalProduct };

inline constexpr std::array<Category, 4> kCategories = {Category::Allergen, Category::Drug,
                                                        Category::MedicalTerm, Category::NaturalProduct};

inline std::string_view to_string(Category c) {
    switch (c) {
        case Category::Allergen: return "Allergen";
        case Category::Drug: return "Drug";
        case Category::MedicalTerm: return "MedicalTerm";
        case Category::NaturalProduct: return "NaturalProduct";
    }
    return "?";
}

// Human-facing label, as shown to annotators and judges.
inline std::string_view display_name(Category c) {
    switch (c) {
        case Category::Allergen: return "Allergen";
        case Category::Drug: return "Drug";
        case Category::MedicalTerm: return "Medical Term";
        case Category::NaturalProduct: return "Natural Product";
    }
    return "?";
}

inline char category_code(Category c) { return "ADMN"[static_cast<int>(c)]; }

// Case-insensitive; spaces and underscores are ignored ("Medical term" == "MedicalTerm").
inline std::optional<Category> parse_category(std::string_view s) {
    std::string k;
    for (char ch : s) {
        if (ch == ' ' || ch == '_') continue;
        k.push_back(static_cast<char>(ch >= 'A' && ch <= 'Z' ? ch - 'A' + 'a' : ch));
    }
    if (k == "allergen") return Category::Allergen;
    if (k == "drug") return Category::Drug;
    if (k == "medicalterm") return Category::MedicalTerm;
    if (k == "naturalproduct") return Category::NaturalProduct;
    return std::nullopt;
}

inline Category category_or_throw(std::string_view s) {
    auto c = parse_category(s);
    if (!c) throw Error(Errc::parse, "unknown category '" + std::string(s) + "'");
    return *c;
}

struct TermRef {
    std::string child_term;
    Category category;

    auto operator<=>(const TermRef&) const = default;
};

struct LexiconEntry {
    std::string child_term;   // normalized
    std::string parent_term;  // display label; identity is normalize(parent_term)
    Category category;
    std::string source;
    std::string entry_id;

    bool operator==(const LexiconEntry&) const = default;
};

struct LedgerRecord {
    std::string child_term;
    Category category;
    std::string parent_term;
    std::string reason;  // "common-word" | "refinement"
    std::string timestamp;

    bool operator==(const LedgerRecord&) const = default;
};

struct Resolution {
    std::string parent_term;
    Category category;
    std::string entry_id;

    bool operator==(const Resolution&) const = default;
};

inline std::string make_entry_id(Category c, std::string_view child) {
    return std::string(1, category_code(c)) + ":" + std::string(child);
}

class Lexicon {
public:
    Lexicon() = default;

    // Entries must already be normalized with unique (child, category).
    Lexicon(std::vector<LexiconEntry> entries, std::vector<LedgerRecord> ledger = {})
        : entries_(std::move(entries)), ledger_(std::move(ledger)) {
        std::sort(entries_.begin(), entries_.end(), [](const LexiconEntry& a, const LexiconEntry& b) {
            return std::tie(a.category, a.child_term) < std::tie(b.category, b.child_term);
        });
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (i && entries_[i].category == entries_[i - 1].category &&
                entries_[i].child_term == entries_[i - 1].child_term)
                throw Error(Errc::conflict, "child term '" + entries_[i].child_term + "' maps to two parents in " +
                                                std::string(to_string(entries_[i].category)));
            by_child_[entries_[i].child_term].push_back(i);
        }
        version_ = "lex-" + hex64(fnv1a64(to_tsv()));
    }

    const std::vector<LexiconEntry>& entries() const { return entries_; }
    const std::vector<LedgerRecord>& ledger() const { return ledger_; }
    const std::string& version() const { return version_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    std::map<Category, std::size_t> category_counts() const {
        std::map<Category, std::size_t> out;
        for (Category c : kCategories) out[c] = 0;
        for (const auto& e : entries_) ++out[e.category];
        return out;
    }

    std::set<std::string> parents() const {
        std::set<std::string> out;
        for (const auto& e : entries_) out.insert(e.parent_term);
        return out;
    }

    std::vector<std::string> children_of(std::string_view parent, Category c) const {
        std::vector<std::string> out;
        for (const auto& e : entries_)
            if (e.category == c && e.parent_term == parent) out.push_back(e.child_term);
        return out;
    }

    const LexiconEntry* find(std::string_view child, Category c) const {
        auto it = by_child_.find(std::string(child));
        if (it == by_child_.end()) return nullptr;
        for (std::size_t i : it->second)
            if (entries_[i].category == c) return &entries_[i];
        return nullptr;
    }

    // All entries whose child term equals `surface` (already normalized),
    // one per category.
    std::vector<Resolution> resolve(std::string_view surface) const {
        std::vector<Resolution> out;
        auto it = by_child_.find(std::string(surface));
        if (it == by_child_.end()) return out;
        for (std::size_t i : it->second)
            out.push_back({entries_[i].parent_term, entries_[i].category, entries_[i].entry_id});
        return out;
    }

    // Parents named in the ledger that no longer have any child entry.
    std::vector<std::pair<std::string, Category>> orphaned_parents() const {
        std::set<std::pair<std::string, Category>> seen;
        std::vector<std::pair<std::string, Category>> out;
        for (const auto& r : ledger_) {
            auto key = std::make_pair(r.parent_term, r.category);
            if (!seen.insert(key).second) continue;
            if (children_of(r.parent_term, r.category).empty()) out.push_back(key);
        }
        return out;
    }

    std::string to_tsv() const {
        std::string out = "child_term\tparent_term\tcategory\tsource\n";
        for (const auto& e : entries_) {
            out += e.child_term;
            out += '\t';
            out += e.parent_term;
            out += '\t';
            out += to_string(e.category);
            out += '\t';
            out += e.source;
            out += '\n';
        }
        return out;
    }

private:
    std::vector<LexiconEntry> entries_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_child_;
    std::vector<LedgerRecord> ledger_;
    std::string version_;
};

namespace detail {

inline std::string collapse_label(std::string_view s) {
    std::string out;
    bool pending = false;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t start = i;
        UChar32 c = next_cp(s, i);
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.append(s, start, i - start);
    }
    return out;
}

}  // namespace detail

// Parses lexicon TSV (header `child_term parent_term category source`).
// Parents are added as their own children when absent.
inline Lexicon parse_lexicon(std::string_view content, std::string_view name = "lexicon") {
    auto lines = split_lines(content);
    auto where = [&](std::size_t n) { return std::string(name) + ":" + std::to_string(n) + ": "; };
    if (lines.empty()) throw Error(Errc::parse, std::string(name) + ": empty lexicon file");
    auto header = split_tabs(lines[0].text);
    if (header.size() < 4 || header[0] != "child_term" || header[1] != "parent_term" || header[2] != "category" ||
        header[3] != "source")
        throw Error(Errc::parse, where(1) + "expected header 'child_term\\tparent_term\\tcategory\\tsource'");

    std::vector<LexiconEntry> entries;
    std::map<std::pair<std::string, Category>, std::size_t> index;  // (child, category) -> entry
    std::unordered_map<std::string, std::string> parent_label;       // normalized -> display
    std::vector<std::pair<std::string, Category>> parents_seen;
    std::set<std::pair<std::string, Category>> parent_set;

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto& line = lines[li];
        if (line.text.empty()) continue;
        auto cols = split_tabs(line.text);
        if (cols.size() < 3 || cols.size() > 4)
            throw Error(Errc::parse, where(line.number) + "expected 4 tab-separated columns");
        auto cat = parse_category(cols[2]);
        if (!cat)
            throw Error(Errc::parse, where(line.number) + "unknown category '" + std::string(cols[2]) + "'");
        std::string child = normalize(cols[0]);
        if (child.empty()) throw Error(Errc::parse, where(line.number) + "empty child term");
        std::string label = detail::collapse_label(cols[1]);
        std::string pkey = normalize(label);
        if (pkey.empty()) throw Error(Errc::parse, where(line.number) + "empty parent term");
        auto [pit, inserted] = parent_label.emplace(pkey, label);
        const std::string& parent = pit->second;
        std::string source = cols.size() == 4 ? std::string(cols[3]) : std::string();

        auto key = std::make_pair(child, *cat);
        if (auto it = index.find(key); it != index.end()) {
            if (entries[it->second].parent_term == parent)
                throw Error(Errc::conflict, where(line.number) + "duplicate entry (" + child + ", " + parent + ", " +
                                                std::string(to_string(*cat)) + ")");
            throw Error(Errc::conflict, where(line.number) + "child term '" + child + "' already maps to '" +
                                            entries[it->second].parent_term + "' in " +
                                            std::string(to_string(*cat)));
        }
        index.emplace(key, entries.size());
        entries.push_back({child, parent, *cat, source, make_entry_id(*cat, child)});
        if (parent_set.insert({parent, *cat}).second) parents_seen.emplace_back(parent, *cat);
    }
    if (entries.empty()) throw Error(Errc::parse, std::string(name) + ": lexicon has no entries");

    for (const auto& [parent, cat] : parents_seen) {
        std::string self = normalize(parent);
        auto it = index.find({self, cat});
        if (it == index.end()) {
            index.emplace(std::make_pair(self, cat), entries.size());
            entries.push_back({self, parent, cat, "parent-self", make_entry_id(cat, self)});
        } else if (entries[it->second].parent_term != parent) {
            throw Error(Errc::conflict, std::string(name) + ": parent '" + parent + "' cannot include itself: '" +
                                            self + "' already maps to '" + entries[it->second].parent_term + "'");
        }
    }
    return Lexicon(std::move(entries));
}

inline Lexicon load_lexicon(const fs::path& path) { return parse_lexicon(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Removal ledger

inline nlohmann::json to_json(const LedgerRecord& r) {
    return {{"child_term", r.child_term},
            {"category", to_string(r.category)},
            {"parent_term", r.parent_term},
            {"reason", r.reason},
            {"timestamp", r.timestamp}};
}

inline std::string ledger_to_jsonl(const std::vector<LedgerRecord>& ledger) {
    std::string out;
    for (const auto& r : ledger) out += to_json(r).dump() + "\n";
    return out;
}

inline std::vector<LedgerRecord> parse_ledger(std::string_view content) {
    std::vector<LedgerRecord> out;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line.text);
            out.push_back({j.at("child_term").get<std::string>(),
                           category_or_throw(j.at("category").get<std::string>()),
                           j.value("parent_term", std::string()), j.at("reason").get<std::string>(),
                           j.value("timestamp", std::string())});
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, "ledger line " + std::to_string(line.number) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Refinement

namespace detail {

inline Lexicon remove_entries(const Lexicon& lex, const std::set<TermRef>& doomed, std::string_view reason,
                              std::string_view timestamp) {
    std::vector<LexiconEntry> kept;
    std::vector<LedgerRecord> ledger = lex.ledger();
    kept.reserve(lex.size());
    for (const auto& e : lex.entries()) {
        if (doomed.count(TermRef{e.child_term, e.category})) {
            ledger.push_back({e.child_term, e.category, e.parent_term, std::string(reason), std::string(timestamp)});
        } else {
            kept.push_back(e);
        }
    }
    return Lexicon(std::move(kept), std::move(ledger));
}

}  // namespace detail

struct WordFrequencyList {
    std::unordered_map<std::string, double> per_million;

    std::optional<double> frequency(std::string_view token) const {
        auto it = per_million.find(std::string(token));
        if (it == per_million.end()) return std::nullopt;
        return it->second;
    }
};

// TSV `token<TAB>frequency` (count per million tokens); an optional header
// row is detected by a non-numeric second column.
inline WordFrequencyList parse_word_frequencies(std::string_view content, std::string_view name = "freq") {
    WordFrequencyList out;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty()) continue;
        auto cols = split_tabs(line.text);
        auto where = std::string(name) + ":" + std::to_string(line.number) + ": ";
        if (cols.size() != 2) throw Error(Errc::parse, where + "expected 2 columns");
        auto f = parse_double(cols[1]);
        if (!f) {
            if (line.number == 1) continue;
            throw Error(Errc::parse, where + "bad frequency '" + std::string(cols[1]) + "'");
        }
        if (*f < 0) throw Error(Errc::parse, where + "negative frequency");
        std::string tok = normalize(cols[0]);
        if (tok.empty()) throw Error(Errc::parse, where + "empty token");
        if (!out.per_million.emplace(tok, *f).second)
            throw Error(Errc::conflict, where + "duplicate token '" + tok + "'");
    }
    return out;
}

inline WordFrequencyList load_word_frequencies(const fs::path& path) {
    return parse_word_frequencies(read_file(path), path.string());
}

// Removes single-token child terms at or above `threshold` occurrences per
// million. Multi-word terms are never touched.
inline Lexicon filter_common_words(const Lexicon& lex, const WordFrequencyList& freq, double threshold,
                                   std::string_view timestamp) {
    if (!(threshold > 0)) throw Error(Errc::invalid_argument, "common-word threshold must be > 0");
    std::set<TermRef> doomed;
    for (const auto& e : lex.entries()) {
        auto toks = term_tokens(e.child_term);
        if (toks.size() != 1) continue;
        auto f = freq.frequency(toks[0]);
        if (f && *f >= threshold) doomed.insert({e.child_term, e.category});
    }
    if (doomed.empty()) return lex;
    return detail::remove_entries(lex, doomed, "common-word", timestamp);
}

enum class RemovalMode { child_only, with_synonyms };

// Removes the named (child, category) entries. Siblings and the parent label
// survive unless `with_synonyms` is requested.
inline Lexicon remove_terms(const Lexicon& lex, const std::vector<TermRef>& terms, std::string_view timestamp,
                            RemovalMode mode = RemovalMode::child_only) {
    std::set<TermRef> doomed;
    for (const auto& t : terms) {
        std::string child = normalize(t.child_term);
        const LexiconEntry* e = lex.find(child, t.category);
        if (!e)
            throw Error(Errc::not_found, "no lexicon entry (" + child + ", " + std::string(to_string(t.category)) + ")");
        doomed.insert({child, t.category});
        if (mode == RemovalMode::with_synonyms)
            for (auto& sib : lex.children_of(e->parent_term, t.category)) doomed.insert({sib, t.category});
    }
    if (doomed.empty()) return lex;
    return detail::remove_entries(lex, doomed, "refinement", timestamp);
}

// Replays removal records onto the lexicon they were produced from.
inline Lexicon apply_ledger(const Lexicon& original, const std::vector<LedgerRecord>& ledger) {
    std::vector<LexiconEntry> kept;
    std::vector<LedgerRecord> applied = original.ledger();
    std::set<TermRef> doomed;
    for (const auto& r : ledger) {
        if (!original.find(r.child_term, r.category) || !doomed.insert({r.child_term, r.category}).second)
            throw Error(Errc::conflict, "ledger removes unknown entry (" + r.child_term + ", " +
                                            std::string(to_string(r.category)) + ")");
        applied.push_back(r);
    }
    for (const auto& e : original.entries())
        if (!doomed.count({e.child_term, e.category})) kept.push_back(e);
    return Lexicon(std::move(kept), std::move(applied));
}

// TSV `child_term<TAB>category`, header optional.
inline std::vector<TermRef> parse_term_list(std::string_view content) {
    std::vector<TermRef> out;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty()) continue;
        auto cols = split_tabs(line.text);
        if (cols.size() < 2) throw Error(Errc::parse, "term list line " + std::to_string(line.number) + ": expected 2 columns");
        if (line.number == 1 && cols[0] == "child_term") continue;
        auto cat = parse_category(cols[1]);
        if (!cat)
            throw Error(Errc::parse, "term list line " + std::to_string(line.number) + ": unknown category '" +
                                         std::string(cols[1]) + "'");
        out.push_back({normalize(cols[0]), *cat});
    }
    return out;
}

inline std::string term_list_to_tsv(const std::vector<TermRef>& terms) {
    std::string out = "child_term\tcategory\n";
    for (const auto& t : terms) out += t.child_term + "\t" + std::string(to_string(t.category)) + "\n";
    return out;
}

}  // namespace lexrefine
