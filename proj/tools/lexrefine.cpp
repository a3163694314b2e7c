// Command-line driver for the whole pipeline. Every stage reads and writes
// plain files; exit status is 0 on success, 1 on usage errors, 2 on data errors.

#include <lexrefine/lexrefine.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace lr = lexrefine;
using lr::fs::path;

namespace {

std::string stamp(const std::string& flag) {
    if (!flag.empty()) {
        if (!lr::parse_iso8601(flag)) throw lr::Error(lr::Errc::invalid_argument, "bad --timestamp '" + flag + "'");
        return flag;
    }
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) {
        auto v = lr::parse_int(e);
        if (!v) throw lr::Error(lr::Errc::invalid_argument, "SOURCE_DATE_EPOCH is not an integer");
        return lr::format_iso8601(lr::UtcTime(std::chrono::seconds(*v)));
    }
    return lr::now_iso8601();
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") std::cout << text;
    else lr::write_file(out, text);
}

struct CorpusSource {
    std::string file;
    std::string store;
    std::string corpus_id;

    void add(CLI::App* app) {
        app->add_option("--corpus", file, "corpus JSONL file");
        app->add_option("--store", store, "corpus store directory");
        app->add_option("--corpus-id", corpus_id, "corpus id inside --store");
    }

    lr::Corpus load() const {
        if (!file.empty()) return lr::parse_corpus(lr::read_file(file), file);
        if (store.empty()) throw lr::Error(lr::Errc::invalid_argument, "give --corpus FILE or --store DIR");
        lr::CorpusStore s(store);
        if (!corpus_id.empty()) return s.load(corpus_id);
        auto ids = s.list();
        if (ids.size() != 1)
            throw lr::Error(lr::Errc::invalid_argument, "store holds " + std::to_string(ids.size()) +
                                                           " corpora; pick one with --corpus-id");
        return s.load(ids.front());
    }
};

struct LexiconSource {
    std::string file;
    std::vector<std::string> ledgers;

    void add(CLI::App* app, bool required = true) {
        auto* o = app->add_option("--lexicon", file, "lexicon TSV");
        if (required) o->required();
        app->add_option("--ledger", ledgers, "removal ledger JSONL applied on top (repeatable)");
    }

    lr::Lexicon load() const {
        auto lex = lr::load_lexicon(file);
        for (const auto& l : ledgers) lex = lr::apply_ledger(lex, lr::parse_ledger(lr::read_file(l)));
        return lex;
    }
};

std::vector<std::size_t> parse_k_list(const std::vector<std::size_t>& ks) {
    if (ks.empty()) throw lr::Error(lr::Errc::invalid_argument, "at least one k is required");
    return ks;
}

// Removal records added by `after` on top of `before`.
std::vector<lr::LedgerRecord> new_records(const lr::Lexicon& before, const lr::Lexicon& after) {
    return {after.ledger().begin() + static_cast<std::ptrdiff_t>(before.ledger().size()), after.ledger().end()};
}

lr::RankedList load_ranking(const std::string& p, std::optional<std::size_t> k) {
    return lr::parse_ranked(lr::read_file(p), k);
}

std::string category_table(const lr::Lexicon& lex) {
    std::string out = "category\tentries\n";
    for (const auto& [c, n] : lex.category_counts()) out += std::string(lr::to_string(c)) + "\t" + std::to_string(n) + "\n";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lexrefine: dictionary tagging, annotation and network refinement pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML configuration file; flags override it");
    unsigned threads = 1;
    app.add_option("--threads", threads, "maximum worker threads")->check(CLI::Range(1u, 1024u));
    std::function<void()> action;
    auto on = [&](CLI::App* sub, std::function<void()> f) { sub->callback([&action, f] { action = f; }); };

    // ingest ------------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("ingest", "validate a JSONL corpus and add it to a store");
        static std::string input, store, id;
        sub->add_option("--input", input, "corpus JSONL")->required();
        sub->add_option("--store", store, "store directory")->required();
        sub->add_option("--corpus-id", id, "explicit corpus id (default: content hash)");
        on(sub, [] {
            lr::CorpusStore s(store);
            auto h = s.ingest(input, id.empty() ? std::nullopt : std::optional<std::string>(id));
            for (const auto& m : h.malformed)
                std::cerr << "skipped line " << m.line << ": " << m.message << "\n";
            std::cout << to_json(h).dump(2) << "\n";
        });
    }

    // lexicon -----------------------------------------------------------------
    {
        auto* lex = app.add_subcommand("lexicon", "load, filter or refine a lexicon");
        lex->require_subcommand(1);

        auto* load = lex->add_subcommand("load", "validate a lexicon and print its summary");
        static LexiconSource src_load;
        static std::string load_out;
        src_load.add(load);
        load->add_option("--out", load_out, "write the normalized lexicon TSV here");
        on(load, [] {
            auto l = src_load.load();
            if (!load_out.empty()) lr::write_file(load_out, l.to_tsv());
            std::cout << "version\t" << l.version() << "\nentries\t" << l.size() << "\nparents\t" << l.parents().size()
                      << "\n"
                      << category_table(l);
        });

        auto* filter = lex->add_subcommand("filter", "drop single-word children that are common English words");
        static LexiconSource src_filter;
        static std::string wf, f_ledger, f_out, f_ts;
        static double threshold = 50;
        src_filter.add(filter);
        filter->add_option("--word-freq", wf, "word frequency TSV (per million)")->required();
        filter->add_option("--threshold", threshold, "per-million frequency at or above which a word is common")->capture_default_str();
        filter->add_option("--out-ledger", f_ledger, "write removal records (JSONL)")->required();
        filter->add_option("--out", f_out, "write the filtered lexicon TSV");
        filter->add_option("--timestamp", f_ts, "ISO-8601 time recorded in the ledger");
        on(filter, [] {
            auto before = src_filter.load();
            auto after = lr::filter_common_words(before, lr::load_word_frequencies(wf), threshold, stamp(f_ts));
            auto recs = new_records(before, after);
            lr::write_file(f_ledger, lr::ledger_to_jsonl(recs));
            if (!f_out.empty()) lr::write_file(f_out, after.to_tsv());
            std::cout << "removed\t" << recs.size() << "\nversion\t" << after.version() << "\n";
        });

        auto* remove = lex->add_subcommand("remove", "remove selected child terms");
        static LexiconSource src_remove;
        static std::string terms, r_ledger, r_out, r_ts;
        static bool synonyms = false;
        src_remove.add(remove);
        remove->add_option("--terms", terms, "TSV child_term<TAB>category")->required();
        remove->add_flag("--with-synonyms", synonyms, "also remove every sibling of each term's parent");
        remove->add_option("--out-ledger", r_ledger, "write removal records (JSONL)")->required();
        remove->add_option("--out", r_out, "write the refined lexicon TSV");
        remove->add_option("--timestamp", r_ts, "ISO-8601 time recorded in the ledger");
        on(remove, [] {
            auto before = src_remove.load();
            auto after = lr::remove_terms(before, lr::parse_term_list(lr::read_file(terms)), stamp(r_ts),
                                          synonyms ? lr::RemovalMode::with_synonyms : lr::RemovalMode::child_only);
            auto recs = new_records(before, after);
            lr::write_file(r_ledger, lr::ledger_to_jsonl(recs));
            if (!r_out.empty()) lr::write_file(r_out, after.to_tsv());
            for (const auto& [parent, cat] : after.orphaned_parents())
                std::cerr << "note: parent '" << parent << "' (" << lr::to_string(cat) << ") has no children left\n";
            std::cout << "removed\t" << recs.size() << "\nversion\t" << after.version() << "\n";
        });
    }

    // tag ---------------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("tag", "tag a corpus with a lexicon");
        static CorpusSource corpus;
        static LexiconSource lex;
        static std::string out, freq_out;
        corpus.add(sub);
        lex.add(sub);
        sub->add_option("--out", out, "matches JSONL (a .meta.json sidecar is written next to it)")->required();
        sub->add_option("--freq-out", freq_out, "child-term frequency TSV");
        on(sub, [&threads] {
            auto c = corpus.load();
            lr::Matcher m(lex.load());
            auto ms = lr::tag_corpus(m, c, threads);
            lr::save_matchset(ms, out);
            if (!freq_out.empty()) lr::write_file(freq_out, lr::frequencies_to_tsv(lr::child_frequencies(ms)));
            std::cout << "matches\t" << ms.total_matches() << "\ncorpus_id\t" << ms.corpus_id << "\nlexicon_version\t"
                      << ms.lexicon_version << "\n";
        });
    }

    // sample ------------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("sample", "draw a seeded sample of matched posts for annotation");
        static CorpusSource corpus;
        static std::string matches, out, matches_out;
        static std::size_t n = 0;
        static std::optional<std::uint64_t> seed;
        corpus.add(sub);
        sub->add_option("--matches", matches, "matches JSONL")->required();
        sub->add_option("--n", n, "number of posts")->required();
        sub->add_option("--seed", seed, "PRNG seed")->required();
        sub->add_option("--out", out, "sample manifest JSON")->required();
        sub->add_option("--matches-out", matches_out, "the sample's matches as JSONL");
        on(sub, [] {
            auto c = corpus.load();
            auto ms = lr::load_matchset(matches);
            auto s = lr::sample_matched_posts(c, ms, n, seed);
            lr::write_file(out, lr::manifest_text(s));
            if (!matches_out.empty()) lr::save_matchset(lr::sample_matches(s, ms), matches_out);
            std::cout << "sample_id\t" << s.sample_id << "\nposts\t" << s.post_ids.size() << "\nmatches\t"
                      << s.match_ids.size() << "\n";
        });
    }

    // session -----------------------------------------------------------------
    {
        auto* sess = app.add_subcommand("session", "create annotation sessions offline");
        sess->require_subcommand(1);
        auto* create = sess->add_subcommand("create", "assign every sampled match to two annotators");
        static std::string sample, out, id;
        static std::vector<std::string> annotators;
        static std::optional<std::uint64_t> seed;
        create->add_option("--sample", sample, "sample manifest JSON")->required();
        create->add_option("--annotators", annotators, "annotator ids")->required()->delimiter(',');
        create->add_option("--seed", seed, "PRNG seed")->required();
        create->add_option("--session-id", id, "explicit session id");
        create->add_option("--out", out, "session JSON")->required();
        on(create, [] {
            auto s = lr::sample_from_json(nlohmann::json::parse(lr::read_file(sample)));
            auto session = lr::create_session(s, annotators, *seed, id);
            lr::write_file(out, lr::session_to_json(session).dump(2) + "\n");
            std::cout << "session_id\t" << session.session_id() << "\nmatches\t" << session.assignment().size() << "\n";
            for (const auto& a : session.annotators())
                std::cout << "tasks\t" << a << "\t" << session.progress_for(a).total << "\n";
        });
    }

    // serve -------------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("serve", "run the annotation HTTP API");
        static lr::ServeConfig cfg;
        static std::string data, statics;
        sub->add_option("--data-dir", data, "data directory")->required();
        sub->add_option("--host", cfg.host, "bind address")->capture_default_str();
        sub->add_option("--port", cfg.port, "port (0 picks a free one)")->capture_default_str();
        sub->add_option("--static", statics, "directory served at /");
        on(sub, [] {
            cfg.data_dir = data;
            if (!statics.empty()) cfg.static_dir = path(statics);
            static std::unique_ptr<lr::Server> server;
            server = std::make_unique<lr::Server>(cfg);
            int port = server->bind();
            std::cout << "listening on http://" << cfg.host << ":" << port << std::endl;
            std::signal(SIGINT, [](int) { server->stop(); });
            std::signal(SIGTERM, [](int) { server->stop(); });
            server->listen();
        });
    }

    // stats -------------------------------------------------------------------
    {
        auto* stats = app.add_subcommand("stats", "agreement, false-positive rates and removal selection");
        stats->require_subcommand(1);

        auto* kappa = stats->add_subcommand("kappa", "Cohen's kappa between the two labels of each match");
        static std::string k_labels, k_session, k_table;
        kappa->add_option("--labels", k_labels, "labels JSONL");
        kappa->add_option("--session", k_session, "session JSON (pairs labels by assignment order)");
        kappa->add_option("--table", k_table, "square contingency table TSV instead of labels");
        on(kappa, [] {
            double k = 0;
            if (!k_table.empty()) {
                std::vector<std::vector<double>> t;
                const std::string content = lr::read_file(k_table);
                for (const auto& line : lr::split_lines(content)) {
                    if (line.text.empty()) continue;
                    std::vector<double> row;
                    for (auto c : lr::split_tabs(line.text)) {
                        auto v = lr::parse_double(c);
                        if (!v) throw lr::Error(lr::Errc::parse, k_table + ":" + std::to_string(line.number) + ": bad cell");
                        row.push_back(*v);
                    }
                    t.push_back(row);
                }
                k = lr::kappa_from_table(t);
            } else if (!k_labels.empty()) {
                auto labels = lr::parse_labels(lr::read_file(k_labels));
                if (!k_session.empty()) {
                    auto s = lr::session_from_json(nlohmann::json::parse(lr::read_file(k_session)));
                    for (auto& l : labels) s.record_label(l);
                    k = lr::session_kappa(s);
                } else {
                    std::vector<lr::Verdict> a, b;
                    for (auto [x, y] : lr::verdict_pairs_from_labels(labels)) {
                        a.push_back(x);
                        b.push_back(y);
                    }
                    k = lr::cohen_kappa(a, b, lr::verdict_classes());
                }
            } else {
                throw lr::Error(lr::Errc::invalid_argument, "give --labels or --table");
            }
            std::cout << "kappa\t" << lr::fixed(k, 6) << "\n";
        });

        auto* fpr = stats->add_subcommand("fpr", "per-term false-positive rates from consensus labels");
        static std::string f_labels, f_session, f_adj, f_sample, f_all, f_out, f_totals, f_mode = "mismatch_and_uncertain";
        fpr->add_option("--labels", f_labels, "labels JSONL")->required();
        fpr->add_option("--session", f_session, "session JSON (enables adjudication overrides)");
        fpr->add_option("--adjudications", f_adj, "adjudications JSONL (needs --session)");
        fpr->add_option("--sample-matches", f_sample, "the sample's matches JSONL")->required();
        fpr->add_option("--matches", f_all, "full matches JSONL (corpus frequencies)")->required();
        fpr->add_option("--mode", f_mode, "mismatch_and_uncertain | mismatch_only")->capture_default_str();
        fpr->add_option("--out", f_out, "FPR table TSV");
        fpr->add_option("--totals-out", f_totals, "per-category totals TSV");
        on(fpr, [] {
            auto labels = lr::parse_labels(lr::read_file(f_labels));
            std::vector<lr::ConsensusRecord> cons;
            if (!f_session.empty()) {
                auto s = lr::session_from_json(nlohmann::json::parse(lr::read_file(f_session)));
                for (auto& l : labels) s.record_label(l);
                if (!f_adj.empty())
                    for (const std::string content = lr::read_file(f_adj); const auto& line : lr::split_lines(content))
                        if (!line.text.empty()) s.adjudicate(lr::adjudication_from_json(nlohmann::json::parse(line.text)));
                cons = lr::adjudicated_consensus(s);
            } else {
                if (!f_adj.empty()) throw lr::Error(lr::Errc::invalid_argument, "--adjudications needs --session");
                cons = lr::consensus_from_labels(labels);
            }
            lr::FpMode mode;
            if (f_mode == "mismatch_and_uncertain") mode = lr::FpMode::mismatch_and_uncertain;
            else if (f_mode == "mismatch_only") mode = lr::FpMode::mismatch_only;
            else throw lr::Error(lr::Errc::invalid_argument, "unknown --mode " + f_mode);
            auto table = lr::compute_fpr(cons, lr::load_matchset(f_sample),
                                         lr::child_frequencies(lr::load_matchset(f_all)), mode);
            emit(lr::fpr_to_tsv(table), f_out);
            if (!f_totals.empty()) lr::write_file(f_totals, lr::fpr_totals_to_tsv(table));
            else if (!f_out.empty()) std::cout << lr::fpr_totals_to_tsv(table);
        });

        auto* select = stats->add_subcommand("select", "terms meeting the removal criterion");
        static std::string s_fpr, s_out;
        static double fpr_min = 0.5;
        static std::uint64_t freq_min = 20;
        select->add_option("--fpr", s_fpr, "FPR table TSV")->required();
        select->add_option("--fpr-min", fpr_min, "minimum false-positive rate")->capture_default_str();
        select->add_option("--freq-min", freq_min, "minimum sample frequency")->capture_default_str();
        select->add_option("--out", s_out, "removal list TSV");
        on(select, [] {
            auto table = lr::parse_fpr_table(lr::read_file(s_fpr));
            auto sel = lr::select_removable(table, fpr_min, freq_min);
            if (!s_out.empty()) lr::write_file(s_out, lr::term_list_to_tsv(sel));
            for (const auto& t : sel) {
                const auto* r = table.find(t.child_term, t.category);
                std::cout << t.child_term << "\t" << lr::to_string(t.category) << "\t" << r->parent_term << "\t"
                          << r->sample_frequency << "\t" << lr::fixed(r->fpr(), 2) << "\n";
            }
        });
    }

    // network -----------------------------------------------------------------
    {
        auto* net = app.add_subcommand("network", "co-mention networks and centrality rankings");
        net->require_subcommand(1);

        auto* build = net->add_subcommand("build", "parent-term co-mention edge list");
        static std::string b_matches, b_exclude, b_out;
        build->add_option("--matches", b_matches, "matches JSONL")->required();
        build->add_option("--exclude", b_exclude, "child terms to drop (TSV child_term<TAB>category)");
        build->add_option("--out", b_out, "edge list TSV");
        on(build, [] {
            auto ms = lr::load_matchset(b_matches);
            if (ms.matches.empty()) throw lr::Error(lr::Errc::invalid_argument, "no matches");
            lr::CoMentionIndex idx(ms);
            auto g = b_exclude.empty() ? idx.graph() : idx.graph_without(lr::parse_term_list(lr::read_file(b_exclude)));
            emit(lr::edges_to_tsv(g), b_out);
            std::cerr << "nodes " << g.nodes.size() << ", edges " << g.edges.size() << "\n";
        });

        auto* cent = net->add_subcommand("centrality", "eigenvector centrality top-k ranking");
        static std::string c_edges, c_out;
        static std::size_t c_k = 10;
        static lr::CentralityOptions c_opt;
        cent->add_option("--edges", c_edges, "edge list TSV")->required();
        cent->add_option("--k", c_k, "list length")->capture_default_str();
        cent->add_option("--tolerance", c_opt.tolerance, "max-norm step at convergence")->capture_default_str();
        cent->add_option("--max-iterations", c_opt.max_iterations, "iteration cap")->capture_default_str();
        cent->add_option("--out", c_out, "ranking TSV");
        on(cent, [] {
            auto r = lr::eigenvector_centrality(lr::parse_edges(lr::read_file(c_edges)), c_opt);
            emit(lr::ranked_to_tsv(lr::top_k(r, c_k)), c_out);
            std::cerr << "lambda " << lr::compact(r.dominant_eigenvalue) << ", iterations " << r.iterations
                      << ", residual " << r.residual << "\n";
        });
    }

    // compare -----------------------------------------------------------------
    {
        auto* cmp = app.add_subcommand("compare", "compare two top-k rankings");
        cmp->require_subcommand(1);
        static std::string a, b;
        static std::optional<std::size_t> k;
        static double p = 0.5;
        static bool normalized = false;

        auto* cer = cmp->add_subcommand("cer", "common elements ratio");
        cer->add_option("--a", a, "ranking TSV")->required();
        cer->add_option("--b", b, "ranking TSV")->required();
        cer->add_option("--k", k, "truncate both lists to k (default: list length)");
        on(cer, [] {
            auto la = load_ranking(a, k), lb = load_ranking(b, k);
            std::cout << "CER " << lr::compact(lr::common_elements_ratio(la, lb)) << "\n";
        });

        auto* fagin = cmp->add_subcommand("fagin", "Fagin's generalized Kendall distance");
        fagin->add_option("--a", a, "ranking TSV")->required();
        fagin->add_option("--b", b, "ranking TSV")->required();
        fagin->add_option("--k", k, "truncate both lists to k (default: list length)");
        fagin->add_option("--p", p, "penalty for pairs neither list orders")->capture_default_str()->check(CLI::Range(0.0, 1.0));
        fagin->add_flag("--normalized", normalized, "also print K over the pair count of the union");
        on(fagin, [] {
            auto la = load_ranking(a, k), lb = load_ranking(b, k);
            std::cout << "K " << lr::compact(lr::fagin_k(la, lb, p)) << "\n";
            if (normalized) std::cout << "K_normalized " << lr::compact(lr::normalized_fagin_k(la, lb, p)) << "\n";
        });
    }

    // nullmodel ---------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("nullmodel", "random-removal null model for the refinement");
        static std::string matches, fpr, selected, out, tsv_out, cer_out;
        static lr::NullModelConfig cfg;
        static std::optional<std::uint64_t> seed, floor;
        static bool retag = false;
        static CorpusSource corpus;
        static LexiconSource lex;
        sub->add_option("--matches", matches, "matches JSONL")->required();
        sub->add_option("--fpr", fpr, "FPR table TSV")->required();
        sub->add_option("--selected", selected, "removal list TSV")->required();
        sub->add_option("--seed", seed, "PRNG seed")->required();
        sub->add_option("--n-samples", cfg.n_samples, "random removal sets")->capture_default_str();
        sub->add_option("--sample-size", cfg.sample_size, "terms per random set")->capture_default_str();
        sub->add_option("--k", cfg.k_values, "list lengths")->capture_default_str()->delimiter(',');
        sub->add_option("--freq-floor", floor, "minimum corpus frequency of pool terms (default: min over selected)");
        sub->add_option("--fpr-max", cfg.fpr_max, "pool terms have fpr strictly below this")->capture_default_str();
        sub->add_option("--p", cfg.p, "Fagin penalty")->capture_default_str()->check(CLI::Range(0.0, 1.0));
        sub->add_option("--out", out, "report JSON")->required();
        sub->add_option("--tsv", tsv_out, "distance table TSV");
        sub->add_option("--cer-tsv", cer_out, "common elements ratio table TSV");
        sub->add_flag("--retag", retag, "also re-tag the corpus for every removal set and report the discrepancy");
        corpus.add(sub);
        lex.add(sub, false);
        on(sub, [&threads] {
            cfg.seed = *seed;
            cfg.freq_floor = floor;
            cfg.threads = threads;
            cfg.k_values = parse_k_list(cfg.k_values);
            auto ms = lr::load_matchset(matches);
            auto table = lr::parse_fpr_table(lr::read_file(fpr));
            auto sel = lr::parse_term_list(lr::read_file(selected));
            lr::NullModelReport rep;
            if (retag) {
                if (lex.file.empty()) throw lr::Error(lr::Errc::invalid_argument, "--retag needs --lexicon");
                auto c = std::make_shared<lr::Corpus>(corpus.load());
                auto base = std::make_shared<lr::Lexicon>(lex.load());
                lr::NetworkBuilder exact = [c, base](const std::vector<lr::TermRef>& removed) {
                    auto l = removed.empty() ? *base : lr::remove_terms(*base, removed, "1970-01-01T00:00:00Z");
                    return lr::build_network(lr::tag_corpus(lr::Matcher(l), *c));
                };
                auto index = std::make_shared<const lr::CoMentionIndex>(ms);
                auto filter = lr::filter_builder(index);
                rep = lr::run_null_model(table, sel, cfg, filter, &exact);
                rep.mode = "filter+retag";
            } else {
                rep = lr::run_null_model(ms, table, sel, cfg);
            }
            lr::write_file(out, to_json(rep).dump(2) + "\n");
            if (!tsv_out.empty()) lr::write_file(tsv_out, lr::null_model_to_tsv(rep));
            if (!cer_out.empty()) lr::write_file(cer_out, lr::null_model_cer_to_tsv(rep));
            std::cout << lr::null_model_to_tsv(rep);
            if (rep.retag)
                std::cout << "retag_discrepancy\t" << rep.retag->differing << "/" << rep.retag->compared
                          << "\tmax_abs_K\t" << lr::compact(rep.retag->max_abs_K_difference) << "\n";
        });
    }

    // judge -------------------------------------------------------------------
    {
        auto* judge = app.add_subcommand("judge", "machine-judge labeling and evaluation");
        judge->require_subcommand(1);

        auto* run = judge->add_subcommand("run", "ask a chat-completion endpoint to label each match");
        static CorpusSource corpus;
        static lr::JudgeClientConfig cfg;
        static std::string sample, out, failures_out, mock, tpl;
        corpus.add(run);
        run->add_option("--sample-matches", sample, "matches JSONL to judge")->required();
        run->add_option("--endpoint", cfg.endpoint, "chat-completion URL");
        run->add_option("--model", cfg.model, "model id");
        run->add_option("--auth-env", cfg.auth_env, "environment variable holding the bearer token")->capture_default_str();
        run->add_option("--rate", cfg.rate_per_second, "requests per second (0: unlimited)")->capture_default_str();
        run->add_option("--retries", cfg.retries, "retries per match after the first attempt")->capture_default_str();
        run->add_option("--backoff-ms", cfg.initial_backoff_ms, "first retry delay; doubles each retry")->capture_default_str();
        run->add_option("--parallel", cfg.parallel, "concurrent requests")->capture_default_str();
        run->add_option("--timeout", cfg.timeout_seconds, "per-request timeout in seconds")->capture_default_str();
        run->add_option("--mock", mock, "replay responses from a fixture JSONL instead of calling the endpoint");
        run->add_option("--template", tpl, "system prompt template file");
        run->add_option("--out", out, "verdicts JSONL")->required();
        run->add_option("--failures-out", failures_out, "failure records JSONL");
        on(run, [] {
            if (!mock.empty()) cfg.mock = path(mock);
            else if (cfg.endpoint.empty() || cfg.model.empty())
                throw lr::Error(lr::Errc::invalid_argument, "give --endpoint and --model, or --mock");
            if (!tpl.empty()) cfg.guidelines_template = lr::read_file(tpl);
            auto result = lr::run_judge(lr::load_matchset(sample), corpus.load(), cfg);
            lr::write_file(out, lr::verdicts_to_jsonl(result.verdicts));
            if (!failures_out.empty()) lr::write_file(failures_out, lr::failures_to_jsonl(result.failures));
            for (const auto& f : result.failures)
                std::cerr << "failed " << f.match_id << " after " << f.attempts << " attempt(s): " << f.error << "\n";
            std::cout << "verdicts\t" << result.verdicts.size() << "\nfailures\t" << result.failures.size() << "\n";
            if (!result.failures.empty())
                throw lr::Error(lr::Errc::unavailable, std::to_string(result.failures.size()) + " match(es) failed");
        });

        auto* eval = judge->add_subcommand("evaluate", "agreement of judge verdicts with human consensus");
        static std::string verdicts, labels, table, grouping = "uncertain_as_negative";
        eval->add_option("--verdicts", verdicts, "verdicts JSONL");
        eval->add_option("--labels", labels, "human labels JSONL (two per match)");
        eval->add_option("--table", table, "3x3 judge-by-human count table TSV instead of files");
        eval->add_option("--grouping", grouping, "uncertain_as_negative | discard_uncertain")->capture_default_str();
        on(eval, [] {
            auto g = lr::parse_grouping(grouping);
            lr::EvalReport r;
            if (!table.empty()) {
                lr::Contingency3 t{};
                std::size_t row = 0;
                const std::string content = lr::read_file(table);
                for (const auto& line : lr::split_lines(content)) {
                    if (line.text.empty()) continue;
                    auto cols = lr::split_tabs(line.text);
                    if (row >= 3 || cols.size() != 3)
                        throw lr::Error(lr::Errc::parse, table + ": expected a 3x3 table");
                    for (std::size_t j = 0; j < 3; ++j) {
                        auto v = lr::parse_int(cols[j]);
                        if (!v || *v < 0) throw lr::Error(lr::Errc::parse, table + ": bad count");
                        t[row][j] = static_cast<std::uint64_t>(*v);
                    }
                    ++row;
                }
                if (row != 3) throw lr::Error(lr::Errc::parse, table + ": expected a 3x3 table");
                r = lr::evaluate_table(t, g);
            } else {
                if (verdicts.empty() || labels.empty())
                    throw lr::Error(lr::Errc::invalid_argument, "give --verdicts and --labels, or --table");
                r = lr::evaluate(lr::parse_verdicts(lr::read_file(verdicts)),
                                 lr::consensus_from_labels(lr::parse_labels(lr::read_file(labels))), g);
            }
            std::cout << to_json(r).dump(2) << "\n";
        });
    }

    // report ------------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("report", "render summary tables from stored results");
        static std::string fpr, nullmodel, out_dir;
        static std::size_t top = 20;
        sub->add_option("--fpr", fpr, "FPR table TSV");
        sub->add_option("--nullmodel", nullmodel, "null-model report JSON");
        sub->add_option("--top", top, "rows in the most-frequent-terms table")->capture_default_str();
        sub->add_option("--out-dir", out_dir, "write the tables here as TSV");
        on(sub, [] {
            if (fpr.empty() && nullmodel.empty()) throw lr::Error(lr::Errc::invalid_argument, "give --fpr and/or --nullmodel");
            if (!fpr.empty()) {
                auto t = lr::parse_fpr_table(lr::read_file(fpr));
                auto rows = t.rows;
                std::stable_sort(rows.begin(), rows.end(), [](const lr::FprRecord& a, const lr::FprRecord& b) {
                    if (a.sample_frequency != b.sample_frequency) return a.sample_frequency > b.sample_frequency;
                    return std::tie(a.child_term, a.category) < std::tie(b.child_term, b.category);
                });
                if (rows.size() > top) rows.resize(top);
                std::string text = "term\tparent_term\tcategory\tfrequency\tfpr\n";
                for (const auto& r : rows)
                    text += r.child_term + "\t" + r.parent_term + "\t" + std::string(lr::to_string(r.category)) + "\t" +
                            std::to_string(r.sample_frequency) + "\t" + lr::fixed(r.fpr(), 2) + "\n";
                std::string totals = lr::fpr_totals_to_tsv(t);
                if (!out_dir.empty()) {
                    lr::write_file(path(out_dir) / "top_terms.tsv", text);
                    lr::write_file(path(out_dir) / "category_fpr.tsv", totals);
                }
                std::cout << text << "\n" << totals;
            }
            if (!nullmodel.empty()) {
                auto rep = lr::null_model_from_json(nlohmann::json::parse(lr::read_file(nullmodel)));
                auto dist = lr::null_model_to_tsv(rep), cer = lr::null_model_cer_to_tsv(rep);
                if (!out_dir.empty()) {
                    lr::write_file(path(out_dir) / "fagin_k.tsv", dist);
                    lr::write_file(path(out_dir) / "common_elements.tsv", cer);
                }
                if (!fpr.empty()) std::cout << "\n";
                std::cout << dist << "\n" << cer;
            }
        });
    }

    // synth -------------------------------------------------------------------
    {
        auto* synth = app.add_subcommand("synth", "bundled synthetic data with planted ambiguous terms");
        synth->require_subcommand(1);

        auto* corpus = synth->add_subcommand("corpus", "generate corpus, lexicon, word frequencies and truth");
        static lr::SynthConfig cfg;
        static std::optional<std::uint64_t> seed;
        static std::string out_dir;
        corpus->add_option("--seed", seed, "PRNG seed")->required();
        corpus->add_option("--posts", cfg.n_posts, "number of posts")->capture_default_str();
        corpus->add_option("--users", cfg.n_users, "number of users")->capture_default_str();
        corpus->add_option("--out-dir", out_dir, "output directory")->required();
        on(corpus, [] {
            cfg.seed = *seed;
            auto d = lr::generate_synthetic(cfg);
            path dir(out_dir);
            lr::write_file(dir / "corpus.jsonl", d.corpus_jsonl);
            lr::write_file(dir / "lexicon.tsv", d.lexicon_tsv);
            lr::write_file(dir / "word_freq.tsv", d.word_frequencies_tsv);
            lr::write_file(dir / "truth.jsonl", lr::truth_to_jsonl(d.truth));
            lr::write_file(dir / "planted.tsv", lr::term_list_to_tsv(d.planted));
            std::cout << "posts\t" << cfg.n_posts << "\nplanted_mentions\t" << d.truth.size() << "\n";
        });

        auto* label = synth->add_subcommand("label", "scripted annotators labeling from the truth file");
        static std::string session, matches, truth, l_out, ts = "2024-01-01T00:00:00Z";
        static std::optional<std::uint64_t> l_seed;
        static double accuracy = 0.9;
        label->add_option("--session", session, "session JSON")->required();
        label->add_option("--sample-matches", matches, "the sample's matches JSONL")->required();
        label->add_option("--truth", truth, "truth JSONL")->required();
        label->add_option("--seed", l_seed, "PRNG seed")->required();
        label->add_option("--accuracy", accuracy, "chance each label equals the truth")->capture_default_str()->check(CLI::Range(0.0, 1.0));
        label->add_option("--timestamp", ts, "timestamp written on every label")->capture_default_str();
        label->add_option("--out", l_out, "labels JSONL")->required();
        on(label, [] {
            auto s = lr::session_from_json(nlohmann::json::parse(lr::read_file(session)));
            auto labels = lr::scripted_labels(s, lr::load_matchset(matches), lr::parse_truth(lr::read_file(truth)),
                                              {accuracy, *l_seed, ts});
            lr::write_file(l_out, lr::labels_to_jsonl(labels));
            std::cout << "labels\t" << labels.size() << "\n";
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    try {
        if (action) action();
        return 0;
    } catch (const lr::Error& e) {
        std::cerr << "error (" << lr::errc_name(e.code()) << "): " << e.what() << "\n";
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error (parse_error): " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 2;
}
