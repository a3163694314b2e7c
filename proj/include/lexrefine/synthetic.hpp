#pragma once

// Seeded synthetic corpus with planted ambiguous terms, and scripted
// annotators that label from the generator's ground truth.
//
// Eight single-child terms (hot, cold, euphoria, valium, death, rose, orange,
// ginger) are mostly used in an unrelated sense and co-mentioned with each
// other in lifestyle posts, so they form the dense core of the network. A set
// of frequent, correctly used epilepsy terms appears mostly alone; they are
// the null model's candidate pool.

#include <lexrefine/annotation.hpp>
#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/lexicon.hpp>
#include <lexrefine/random.hpp>
#include <lexrefine/tagger.hpp>

#include <json.hpp>

#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace lexrefine {

struct SynthConfig {
    std::uint64_t seed = 1;
    std::size_t n_posts = 1000;
    std::size_t n_users = 300;
};

struct TruthSpan {
    std::string post_id;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string term;
    Verdict truth{};

    bool operator==(const TruthSpan&) const = default;
};

struct SynthData {
    std::string corpus_jsonl;
    std::string lexicon_tsv;
    std::string word_frequencies_tsv;
    std::vector<TruthSpan> truth;
    std::vector<TermRef> planted;
};

namespace synth {

struct Term {
    const char* child;
    const char* parent;
    Category category;
    double weight;     // relative draw weight within its group
    double fp_chance;  // chance a mention uses an unrelated sense
    std::vector<const char*> fp_templates;
    std::vector<const char*> tp_templates;
};

inline const std::vector<Term>& planted() {
    using C = Category;
    static const std::vector<Term> t = {
        {"hot", "Feeling hot", C::MedicalTerm, 5.0, 0.92,
         {"so {} today", "{} weather again", "{} sauce on everything", "{} yoga class", "{} chocolate night"},
         {"{} flashes at night", "waking up {} and sweaty"}},
        {"cold", "Nasopharyngitis", C::MedicalTerm, 3.0, 0.88,
         {"{} brew first", "ice {} drinks", "{} morning run", "{} plunge at the lake"},
         {"caught a {} again", "this {} will not quit"}},
        {"euphoria", "Euphoric mood", C::MedicalTerm, 2.0, 0.97,
         {"watching {} tonight", "{} season two", "pure {} at the concert"},
         {"weird {} right before it hit"}},
        {"valium", "Diazepam", C::Drug, 1.5, 0.78,
         {"{} the band live", "listening to {} records"},
         {"took a {} to calm down", "rescue {} in my bag"}},
        {"death", "Death", C::MedicalTerm, 1.5, 0.78,
         {"{} metal show", "bored to {}", "{} stare from the cat"},
         {"fear of sudden {}", "{} in the family this year"}},
        {"rose", "Rose", C::NaturalProduct, 1.2, 0.88,
         {"{} gold phone", "the sun {} early", "{} bowl parade"},
         {"{} hip oil", "{} water toner"}},
        {"orange", "Orange", C::Allergen, 1.2, 0.84,
         {"{} sunset", "{} dress for the party", "painted the door {}"},
         {"{} slices with lunch", "fresh {} from the market"}},
        {"ginger", "Ginger", C::Allergen, 1.3, 0.78,
         {"my {} cat", "{} hair dye", "{} the spice girl"},
         {"{} shots for my stomach", "{} candy on the plane"}},
    };
    return t;
}

// Frequent epilepsy terms: the random-removal pool.
inline const std::vector<Term>& pool() {
    using C = Category;
    static const std::vector<const char*> tp = {"started {} last month", "{} again this week",
                                                "neuro wants to change my {}", "day 30 on {}",
                                                "anyone else dealing with {}", "{} log updated"};
    static const std::vector<Term> t = {
        {"seizure", "Seizure", C::MedicalTerm, 1, 0.03, {"{} the moment"}, tp},
        {"epilepsy", "Epilepsy", C::MedicalTerm, 1, 0.0, {}, tp},
        {"keppra", "Levetiracetam", C::Drug, 1, 0.0, {}, tp},
        {"lamictal", "Lamotrigine", C::Drug, 1, 0.0, {}, tp},
        {"migraine", "Migraine", C::MedicalTerm, 1, 0.0, {}, tp},
        {"cbd", "Cannabidiol", C::NaturalProduct, 1, 0.03, {"{} of the city"}, tp},
        {"aura", "Aura", C::MedicalTerm, 1, 0.05, {"good {} in this room"}, tp},
        {"depakote", "Valproic acid", C::Drug, 1, 0.0, {}, tp},
        {"tegretol", "Carbamazepine", C::Drug, 1, 0.0, {}, tp},
        {"melatonin", "Melatonin", C::NaturalProduct, 1, 0.0, {}, tp},
        {"klonopin", "Clonazepam", C::Drug, 1, 0.0, {}, tp},
        {"banzel", "Rufinamide", C::Drug, 1, 0.0, {}, tp},
    };
    return t;
}

inline const std::vector<Term>& rare() {
    using C = Category;
    static const std::vector<const char*> tp = {"plus {} on bad days", "also some {}", "and the {} is back"};
    static const std::vector<Term> t = {
        {"seizures", "Seizure", C::MedicalTerm, 1, 0, {}, tp},
        {"levetiracetam", "Levetiracetam", C::Drug, 1, 0, {}, tp},
        {"lamotrigine", "Lamotrigine", C::Drug, 1, 0, {}, tp},
        {"topamax", "Topiramate", C::Drug, 1, 0, {}, tp},
        {"onfi", "Clobazam", C::Drug, 1, 0, {}, tp},
        {"vimpat", "Lacosamide", C::Drug, 1, 0, {}, tp},
        {"trileptal", "Oxcarbazepine", C::Drug, 1, 0, {}, tp},
        {"ativan", "Lorazepam", C::Drug, 1, 0, {}, tp},
        {"dizziness", "Dizziness", C::MedicalTerm, 1, 0, {}, tp},
        {"fatigue", "Fatigue", C::MedicalTerm, 1, 0, {}, tp},
        {"insomnia", "Insomnia", C::MedicalTerm, 1, 0, {}, tp},
        {"nausea", "Nausea", C::MedicalTerm, 1, 0, {}, tp},
        {"anxiety", "Anxiety", C::MedicalTerm, 1, 0, {}, tp},
        {"tremor", "Tremor", C::MedicalTerm, 1, 0, {}, tp},
        {"memory loss", "Amnesia", C::MedicalTerm, 1, 0, {}, tp},
        {"mary jane", "Cannabis", C::NaturalProduct, 1, 0, {}, tp},
        {"weed", "Cannabis", C::NaturalProduct, 1, 0, {}, tp},
    };
    return t;
}

// Everyday vocabulary co-mentioned with the planted terms.
inline const std::vector<Term>& lifestyle() {
    using C = Category;
    static const std::vector<const char*> tp = {"love this {}", "{} all day", "more {} please",
                                                "the best {} in town", "{} time", "so much {}"};
    static const std::vector<const char*> fp = {"{} emoji spam"};
    static const std::vector<std::tuple<const char*, const char*, Category>> raw = {
        {"apple", "Apple", C::Allergen}, {"banana", "Banana", C::Allergen},
        {"strawberry", "Strawberry", C::Allergen}, {"peach", "Peach", C::Allergen},
        {"mango", "Mango", C::Allergen}, {"lemon", "Lemon", C::Allergen},
        {"coconut", "Coconut", C::Allergen}, {"almond", "Almond", C::Allergen},
        {"walnut", "Walnut", C::Allergen}, {"cashew", "Cashew", C::Allergen},
        {"hazelnut", "Hazelnut", C::Allergen}, {"pistachio", "Pistachio", C::Allergen},
        {"shrimp", "Shrimp", C::Allergen}, {"lobster", "Lobster", C::Allergen},
        {"salmon", "Salmon", C::Allergen}, {"tuna", "Tuna", C::Allergen},
        {"eggs", "Egg", C::Allergen}, {"milk", "Milk", C::Allergen},
        {"cheese", "Cheese", C::Allergen}, {"yogurt", "Yogurt", C::Allergen},
        {"wheat", "Wheat", C::Allergen}, {"soy", "Soybean", C::Allergen},
        {"sesame", "Sesame", C::Allergen}, {"mustard", "Mustard", C::Allergen},
        {"celery", "Celery", C::Allergen}, {"kiwi", "Kiwi", C::Allergen},
        {"avocado", "Avocado", C::Allergen}, {"tomato", "Tomato", C::Allergen},
        {"garlic", "Garlic", C::Allergen}, {"onion", "Onion", C::Allergen},
        {"cinnamon", "Cinnamon", C::Allergen}, {"vanilla", "Vanilla", C::Allergen},
        {"cocoa", "Cocoa", C::Allergen}, {"oats", "Oat", C::Allergen},
        {"pineapple", "Pineapple", C::Allergen}, {"cherry", "Cherry", C::Allergen},
        {"blueberry", "Blueberry", C::Allergen}, {"grape", "Grape", C::Allergen},
        {"watermelon", "Watermelon", C::Allergen}, {"peanut", "Peanut", C::Allergen},
        {"lavender", "Lavender", C::NaturalProduct}, {"peppermint", "Peppermint", C::NaturalProduct},
        {"basil", "Basil", C::NaturalProduct}, {"thyme", "Thyme", C::NaturalProduct},
        {"rosemary", "Rosemary", C::NaturalProduct}, {"oregano", "Oregano", C::NaturalProduct},
        {"aloe vera", "Aloe vera", C::NaturalProduct}, {"matcha", "Matcha", C::NaturalProduct},
        {"eucalyptus", "Eucalyptus", C::NaturalProduct}, {"hibiscus", "Hibiscus", C::NaturalProduct},
        {"jasmine", "Jasmine", C::NaturalProduct}, {"spirulina", "Spirulina", C::NaturalProduct},
        {"kombucha", "Kombucha", C::NaturalProduct}, {"echinacea", "Echinacea", C::NaturalProduct},
        {"ginseng", "Ginseng", C::NaturalProduct}, {"turmeric", "Turmeric", C::NaturalProduct},
        {"chamomile", "Chamomile", C::NaturalProduct},
        {"ibuprofen", "Ibuprofen", C::Drug}, {"advil", "Ibuprofen", C::Drug},
        {"tylenol", "Acetaminophen", C::Drug}, {"aspirin", "Aspirin", C::Drug},
        {"benadryl", "Diphenhydramine", C::Drug}, {"zyrtec", "Cetirizine", C::Drug},
        {"caffeine", "Caffeine", C::Drug}, {"nicotine", "Nicotine", C::Drug},
        {"alcohol", "Ethanol", C::Drug},
        {"sunburn", "Sunburn", C::MedicalTerm}, {"cough", "Cough", C::MedicalTerm},
        {"hangover", "Hangover", C::MedicalTerm}, {"backache", "Back pain", C::MedicalTerm},
        {"cramps", "Muscle cramp", C::MedicalTerm}, {"sore throat", "Pharyngitis", C::MedicalTerm},
        {"bloating", "Bloating", C::MedicalTerm}, {"jet lag", "Jet lag", C::MedicalTerm},
        {"acne", "Acne", C::MedicalTerm}, {"blister", "Blister", C::MedicalTerm},
    };
    static const std::vector<Term> t = [] {
        std::vector<Term> out;
        for (const auto& [c, p, cat] : raw) out.push_back({c, p, cat, 1.0, 0.08, fp, tp});
        return out;
    }();
    return t;
}

// Common English words that the frequency filter strips before tagging.
inline const std::vector<Term>& common_words() {
    using C = Category;
    static const std::vector<Term> t = {
        {"pot", "Cannabis", C::NaturalProduct, 1, 0, {}, {}},
        {"joint", "Arthralgia", C::MedicalTerm, 1, 0, {}, {}},
        {"high", "Euphoric mood", C::MedicalTerm, 1, 0, {}, {}},
    };
    return t;
}

inline const std::vector<const char*>& openers() {
    static const std::vector<const char*> v = {"ugh", "honestly", "update:", "quick question", "weekend", "morning",
                                               "lol", "okay so", "not gonna lie", "throwback", "real talk", "hey all"};
    return v;
}

inline const std::vector<const char*>& closers() {
    static const std::vector<const char*> v = {"!!", "lol", "#blessed", "#mood", "😅", "... whatever",
                                               "#epilepsywarrior", "with friends", "at the beach", "🙏",
                                               "high five", "crock pot dinner", "joint account stuff"};
    return v;
}

inline std::size_t weighted_pick(Rng& rng, const std::vector<Term>& terms) {
    double total = 0;
    for (const auto& t : terms) total += t.weight;
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (u < terms[i].weight) return i;
        u -= terms[i].weight;
    }
    return terms.size() - 1;
}

inline double unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

class PostBuilder {
public:
    PostBuilder(Rng& rng, std::string post_id) : rng_(rng), id_(std::move(post_id)) {}

    void words(std::string_view w) {
        sep();
        text_ += w;
    }

    // One mention of `t`, in a related or unrelated sense per its fp_chance.
    void mention(const Term& t, std::optional<bool> force_true = std::nullopt) {
        bool fp = force_true ? !*force_true : (!t.fp_templates.empty() && unit(rng_) < t.fp_chance);
        const auto& pool = fp ? t.fp_templates : t.tp_templates;
        std::string_view tpl = pool[uniform_below(rng_, pool.size())];
        auto hole = tpl.find("{}");
        sep();
        text_ += tpl.substr(0, hole);
        std::string surface = t.child;
        const double style = unit(rng_);
        if (style < 0.12 && hole == 0 && surface.find(' ') == std::string::npos) {
            text_ += '#';
        } else if (style < 0.3 && surface[0] >= 'a' && surface[0] <= 'z') {
            surface[0] = static_cast<char>(surface[0] - 'a' + 'A');
        }
        const std::size_t start = text_.size();
        text_ += surface;
        truth_.push_back({id_, start, text_.size(), t.child, fp ? Verdict::FalsePositive : Verdict::TruePositive});
        text_ += tpl.substr(hole + 2);
    }

    std::string text() const { return text_; }
    const std::vector<TruthSpan>& truth() const { return truth_; }

private:
    void sep() {
        if (!text_.empty()) text_ += unit(rng_) < 0.3 ? ". " : " ";
    }

    Rng& rng_;
    std::string id_;
    std::string text_;
    std::vector<TruthSpan> truth_;
};

}  // namespace synth

inline std::string synthetic_lexicon_tsv() {
    std::string out = "child_term\tparent_term\tcategory\tsource\n";
    auto add = [&](const std::vector<synth::Term>& terms, const char* source) {
        for (const auto& t : terms)
            out += std::string(t.child) + "\t" + t.parent + "\t" + std::string(to_string(t.category)) + "\t" + source + "\n";
    };
    add(synth::planted(), "synthetic-planted");
    add(synth::pool(), "synthetic-epilepsy");
    add(synth::rare(), "synthetic-epilepsy");
    add(synth::lifestyle(), "synthetic-lifestyle");
    add(synth::common_words(), "synthetic-common");
    return out;
}

// Occurrences per million; the three common-word children sit above 300.
inline std::string synthetic_word_frequencies_tsv() {
    return "token\tper_million\n"
           "the\t69971\nand\t28852\nhigh\t497\nhot\t130\ncold\t171\ndeath\t277\nrose\t86\norange\t23\n"
           "joint\t312\npot\t340\nginger\t4\nmilk\t49\napple\t9\nweed\t3\n";
}

inline SynthData generate_synthetic(const SynthConfig& cfg) {
    if (cfg.n_posts < 100) throw Error(Errc::invalid_argument, "synthetic corpus needs at least 100 posts");
    if (cfg.n_users == 0) throw Error(Errc::invalid_argument, "synthetic corpus needs at least one user");
    using namespace synth;
    Rng rng(cfg.seed);
    SynthData d;
    d.lexicon_tsv = synthetic_lexicon_tsv();
    d.word_frequencies_tsv = synthetic_word_frequencies_tsv();
    for (const auto& t : planted()) d.planted.push_back({t.child, t.category});

    const std::size_t n_lifestyle = cfg.n_posts * 30 / 100;
    const std::size_t n_mixed = cfg.n_posts / 10;
    const long long base = 1672531200;  // 2023-01-01T00:00:00Z
    std::vector<int> kinds;
    kinds.insert(kinds.end(), n_lifestyle, 0);
    kinds.insert(kinds.end(), n_mixed, 1);
    kinds.insert(kinds.end(), cfg.n_posts - n_lifestyle - n_mixed, 2);
    shuffle(rng, kinds);

    for (std::size_t i = 0; i < cfg.n_posts; ++i) {
        std::string idbuf = std::to_string(i + 1), userbuf = std::to_string(uniform_below(rng, cfg.n_users) + 1);
        idbuf = "p" + std::string(idbuf.size() < 5 ? 5 - idbuf.size() : 0, '0') + idbuf;
        userbuf = "u" + std::string(userbuf.size() < 4 ? 4 - userbuf.size() : 0, '0') + userbuf;
        PostBuilder b(rng, idbuf);
        if (unit(rng) < 0.5) b.words(openers()[uniform_below(rng, openers().size())]);
        switch (kinds[i]) {
            case 0: {  // two planted terms plus everyday vocabulary
                std::size_t a = weighted_pick(rng, planted()), c = a;
                while (c == a) c = weighted_pick(rng, planted());
                b.mention(planted()[a]);
                const std::size_t extra = 1 + uniform_below(rng, 2);
                for (std::size_t k = 0; k < extra; ++k)
                    b.mention(lifestyle()[uniform_below(rng, lifestyle().size())]);
                b.mention(planted()[c]);
                break;
            }
            case 1: {  // planted term used as intended, next to an epilepsy term
                b.mention(pool()[uniform_below(rng, pool().size())]);
                b.mention(planted()[uniform_below(rng, planted().size())], true);
                if (unit(rng) < 0.3) b.mention(lifestyle()[uniform_below(rng, lifestyle().size())]);
                break;
            }
            default: {  // epilepsy post, usually a single frequent term
                b.mention(pool()[uniform_below(rng, pool().size())]);
                if (unit(rng) < 0.35) b.mention(pool()[uniform_below(rng, pool().size())]);
                if (unit(rng) < 0.3) b.mention(rare()[uniform_below(rng, rare().size())]);
                break;
            }
        }
        if (unit(rng) < 0.6) b.words(closers()[uniform_below(rng, closers().size())]);

        const auto ts = format_iso8601(UtcTime(std::chrono::seconds(base + static_cast<long long>(uniform_below(rng, 365 * 86400)))));
        nlohmann::ordered_json j = {{"post_id", idbuf}, {"user_id", userbuf}, {"timestamp", ts}, {"text", b.text()}};
        d.corpus_jsonl += j.dump() + "\n";
        d.truth.insert(d.truth.end(), b.truth().begin(), b.truth().end());
    }
    return d;
}

inline std::string truth_to_jsonl(const std::vector<TruthSpan>& truth) {
    std::string out;
    for (const auto& t : truth)
        out += nlohmann::ordered_json{{"post_id", t.post_id},
                                      {"start", t.start},
                                      {"end", t.end},
                                      {"term", t.term},
                                      {"truth", to_string(t.truth)}}
                   .dump() +
               "\n";
    return out;
}

inline std::vector<TruthSpan> parse_truth(std::string_view content) {
    std::vector<TruthSpan> out;
    for (const auto& line : split_lines(content)) {
        if (line.text.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line.text);
            out.push_back({j.at("post_id").get<std::string>(), j.at("start").get<std::size_t>(),
                           j.at("end").get<std::size_t>(), j.value("term", std::string()),
                           parse_verdict_name(j.at("truth").get<std::string>())});
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, "truth line " + std::to_string(line.number) + ": " + e.what());
        }
    }
    return out;
}

struct ScriptedAnnotators {
    double accuracy = 0.9;  // chance of reporting the truth; errors split between Unclear and the opposite
    std::uint64_t seed = 0;
    std::string timestamp = "2024-01-01T00:00:00Z";
};

// Labels for every assigned (match, annotator) slot, in assignment order.
// Each slot draws from its own stream, so labels do not depend on order.
// Matches with no truth record (incidental tags) are treated as correct.
inline std::vector<Label> scripted_labels(const AnnotationSession& session, const MatchSet& matches,
                                          const std::vector<TruthSpan>& truth, const ScriptedAnnotators& cfg) {
    std::map<std::tuple<std::string, std::size_t, std::size_t>, Verdict> by_span;
    for (const auto& t : truth) by_span[{t.post_id, t.start, t.end}] = t.truth;
    std::unordered_map<std::string, const TermMatch*> by_id;
    for (const auto& m : matches.matches) by_id.emplace(m.match_id, &m);

    std::vector<Label> out;
    for (const auto& a : session.assignment()) {
        auto it = by_id.find(a.match_id);
        if (it == by_id.end()) throw Error(Errc::not_found, "session references unknown match " + a.match_id);
        const TermMatch& m = *it->second;
        auto t = by_span.find({m.post_id, m.start, m.end});
        const Verdict truth_v = t == by_span.end() ? Verdict::TruePositive : t->second;
        for (const auto& who : a.annotators) {
            Rng rng(substream_seed(cfg.seed, fnv1a64(a.match_id + "|" + who)));
            Verdict v = truth_v;
            if (synth::unit(rng) >= cfg.accuracy) {
                const bool unclear = synth::unit(rng) < 0.5;
                v = unclear ? Verdict::Unclear
                            : (truth_v == Verdict::TruePositive ? Verdict::FalsePositive : Verdict::TruePositive);
            }
            out.push_back({a.match_id, who, v, "", cfg.timestamp});
        }
    }
    return out;
}

}  // namespace lexrefine
