#pragma once

// Top-k ranking comparison: common elements ratio, Fagin's generalized
// Kendall distance K with penalty p, and the random-removal null model.

#include <lexrefine/annotation.hpp>
#include <lexrefine/conet.hpp>
#include <lexrefine/error.hpp>
#include <lexrefine/random.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace lexrefine {

template <typename T>
std::map<T, std::size_t> positions_of(const std::vector<T>& list) {
    std::map<T, std::size_t> pos;
    for (std::size_t i = 0; i < list.size(); ++i)
        if (!pos.emplace(list[i], i).second) throw Error(Errc::invalid_argument, "ranked list has duplicate elements");
    return pos;
}

template <typename T>
std::size_t common_count(const std::vector<T>& a, const std::vector<T>& b) {
    auto pa = positions_of(a);
    std::size_t z = 0;
    for (const auto& x : b) z += pa.count(x);
    return z;
}

// |A ∩ B| / k.
template <typename T>
double common_elements_ratio(const std::vector<T>& a, const std::vector<T>& b, std::size_t k) {
    if (k == 0) throw Error(Errc::invalid_argument, "k must be >= 1");
    positions_of(b);
    return static_cast<double>(common_count(a, b)) / static_cast<double>(k);
}

inline double common_elements_ratio(const RankedList& a, const RankedList& b) {
    if (a.k != b.k) throw Error(Errc::invalid_argument, "top-k lists have different k");
    return common_elements_ratio(a.terms(), b.terms(), a.k);
}

// Pair counts by case; K = inversions + p * unresolved.
struct FaginBreakdown {
    std::size_t inversions = 0;  // pairs costing 1
    std::size_t unresolved = 0;  // pairs both in one list, both absent from the other
    std::size_t union_size = 0;
    std::size_t common = 0;

    double distance(double p) const { return static_cast<double>(inversions) + p * static_cast<double>(unresolved); }
};

template <typename T>
FaginBreakdown fagin_breakdown(const std::vector<T>& a, const std::vector<T>& b) {
    const auto pa = positions_of(a);
    const auto pb = positions_of(b);
    std::vector<T> universe = a;
    for (const auto& x : b)
        if (!pa.count(x)) universe.push_back(x);
    const std::size_t u = universe.size();
    // Position in each list, or npos when absent.
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> ra(u, npos), rb(u, npos);
    for (std::size_t i = 0; i < u; ++i) {
        if (auto it = pa.find(universe[i]); it != pa.end()) ra[i] = it->second;
        if (auto it = pb.find(universe[i]); it != pb.end()) rb[i] = it->second;
    }
    FaginBreakdown r;
    r.union_size = u;
    r.common = a.size() + b.size() - u;
    for (std::size_t i = 0; i < u; ++i) {
        for (std::size_t j = i + 1; j < u; ++j) {
            const bool ai = ra[i] != npos, aj = ra[j] != npos, bi = rb[i] != npos, bj = rb[j] != npos;
            if (ai && aj && bi && bj) {
                if ((ra[i] < ra[j]) != (rb[i] < rb[j])) ++r.inversions;
            } else if (ai && aj && (bi || bj)) {
                // The one missing from B costs 1 if A ranks it ahead of the other.
                const std::size_t missing = bi ? j : i, present = bi ? i : j;
                if (ra[missing] < ra[present]) ++r.inversions;
            } else if (bi && bj && (ai || aj)) {
                const std::size_t missing = ai ? j : i, present = ai ? i : j;
                if (rb[missing] < rb[present]) ++r.inversions;
            } else if ((ai && aj) || (bi && bj)) {
                ++r.unresolved;
            } else {
                ++r.inversions;  // one only in A, the other only in B
            }
        }
    }
    return r;
}

template <typename T>
double fagin_k(const std::vector<T>& a, const std::vector<T>& b, double p = 0.5) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "penalty p must lie in [0, 1]");
    return fagin_breakdown(a, b).distance(p);
}

inline double fagin_k(const RankedList& a, const RankedList& b, double p = 0.5) {
    if (a.k != b.k) throw Error(Errc::invalid_argument, "top-k lists have different k");
    return fagin_k(a.terms(), b.terms(), p);
}

inline double pairs_of(std::size_t n) { return n < 2 ? 0.0 : static_cast<double>(n) * static_cast<double>(n - 1) / 2.0; }

// K divided by the number of unordered pairs over the union, C(2k - z, 2):
// the distance when every pair costs 1.
inline double normalize_fagin(double k_distance, std::size_t union_size) {
    const double d = pairs_of(union_size);
    if (d == 0) {
        if (k_distance == 0) return 0.0;
        throw Error(Errc::invalid_argument, "normalized K undefined: no pairs but K > 0");
    }
    return k_distance / d;
}

template <typename T>
double normalized_fagin_k(const std::vector<T>& a, const std::vector<T>& b, double p = 0.5) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "penalty p must lie in [0, 1]");
    auto br = fagin_breakdown(a, b);
    return normalize_fagin(br.distance(p), br.union_size);
}

inline double normalized_fagin_k(const RankedList& a, const RankedList& b, double p = 0.5) {
    if (a.k != b.k) throw Error(Errc::invalid_argument, "top-k lists have different k");
    return normalized_fagin_k(a.terms(), b.terms(), p);
}

// ---------------------------------------------------------------------------
// Null model

struct NullModelConfig {
    std::size_t n_samples = 1000;
    std::size_t sample_size = 8;
    std::optional<std::uint64_t> freq_floor;  // default: min corpus frequency of the selected terms
    std::uint64_t seed = 0;
    std::vector<std::size_t> k_values = {10, 20, 50, 100, 200, 500};
    double fpr_max = 0.5;  // pool terms have fpr strictly below this
    double p = 0.5;
    unsigned threads = 1;
    CentralityOptions centrality;
};

struct NullModelRow {
    std::size_t k = 0;
    double K_refined = 0;
    double K_refined_normalized = 0;
    std::size_t common_refined = 0;
    double CER_refined = 0;
    double K_random_mean = 0;
    double K_random_std = 0;
    double p_value = 0;  // share of samples with K_random >= K_refined
    double CER_random_mean = 0;
    double CER_random_std = 0;
};

struct RetagDiscrepancy {
    std::size_t compared = 0;  // (sample, k) cells
    std::size_t differing = 0;
    double max_abs_K_difference = 0;
};

struct NullModelReport {
    std::string mode = "filter";
    std::size_t n_samples = 0;
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;
    std::uint64_t freq_floor = 0;
    double fpr_max = 0.5;
    double p = 0.5;
    std::vector<std::size_t> k_values;
    std::vector<TermRef> selected;
    std::vector<TermRef> candidate_pool;
    std::vector<std::vector<std::size_t>> samples;  // indices into candidate_pool
    std::vector<NullModelRow> rows;
    std::optional<RetagDiscrepancy> retag;

    std::size_t candidate_pool_size() const { return candidate_pool.size(); }
};

// Rebuilds the co-mention network with the given child terms removed.
using NetworkBuilder = std::function<CoMentionGraph(const std::vector<TermRef>& removed)>;

inline NetworkBuilder filter_builder(std::shared_ptr<const CoMentionIndex> index) {
    return [index](const std::vector<TermRef>& removed) { return index->graph_without(removed); };
}

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

struct Comparison {
    std::vector<double> K;
    std::vector<double> cer;
};

inline std::vector<std::string> full_ranking(const CoMentionGraph& g, const CentralityOptions& opt, std::size_t k) {
    if (g.edges.empty()) return {};
    return top_k(eigenvector_centrality(g, opt), k).terms();
}

inline Comparison compare_to(const std::vector<std::string>& base_full, const std::vector<std::string>& other_full,
                             const std::vector<std::size_t>& ks, double p) {
    Comparison c;
    for (std::size_t k : ks) {
        std::vector<std::string> a(base_full.begin(), base_full.begin() + static_cast<std::ptrdiff_t>(std::min(k, base_full.size())));
        std::vector<std::string> b(other_full.begin(), other_full.begin() + static_cast<std::ptrdiff_t>(std::min(k, other_full.size())));
        c.K.push_back(fagin_k(a, b, p));
        c.cer.push_back(common_elements_ratio(a, b, k));
    }
    return c;
}

}  // namespace detail

// Compares the refined ranking (selected terms removed) and n_samples random
// removals of sample_size pool terms against the baseline ranking. Sample s
// draws from its own PRNG stream, so thread count never changes the result.
inline NullModelReport run_null_model(const FprTable& fpr, const std::vector<TermRef>& selected,
                                      const NullModelConfig& cfg, const NetworkBuilder& build,
                                      const NetworkBuilder* cross_check = nullptr) {
    if (cfg.k_values.empty()) throw Error(Errc::invalid_argument, "null model needs at least one k");
    for (std::size_t k : cfg.k_values)
        if (k == 0) throw Error(Errc::invalid_argument, "k must be >= 1");
    if (cfg.n_samples == 0) throw Error(Errc::invalid_argument, "null model needs at least one sample");

    NullModelReport rep;
    rep.n_samples = cfg.n_samples;
    rep.sample_size = cfg.sample_size;
    rep.seed = cfg.seed;
    rep.fpr_max = cfg.fpr_max;
    rep.p = cfg.p;
    rep.k_values = cfg.k_values;
    rep.selected = selected;

    std::set<TermRef> chosen(selected.begin(), selected.end());
    if (cfg.freq_floor) {
        rep.freq_floor = *cfg.freq_floor;
    } else if (!selected.empty()) {
        rep.freq_floor = std::numeric_limits<std::uint64_t>::max();
        for (const auto& t : selected) {
            const FprRecord* r = fpr.find(t.child_term, t.category);
            if (!r) throw Error(Errc::not_found, "selected term '" + t.child_term + "' is not in the FPR table");
            rep.freq_floor = std::min(rep.freq_floor, r->corpus_frequency);
        }
    }
    for (const auto& r : fpr.rows)
        if (r.fpr() < cfg.fpr_max && r.corpus_frequency >= rep.freq_floor && !chosen.count({r.child_term, r.category}))
            rep.candidate_pool.push_back({r.child_term, r.category});
    if (rep.candidate_pool.size() < cfg.sample_size)
        throw Error(Errc::invalid_argument, "candidate pool has " + std::to_string(rep.candidate_pool.size()) +
                                                " terms, fewer than the sample size " + std::to_string(cfg.sample_size));

    const std::size_t kmax = *std::max_element(cfg.k_values.begin(), cfg.k_values.end());
    const auto base = detail::full_ranking(build({}), cfg.centrality, kmax);
    const auto refined = detail::full_ranking(build(selected), cfg.centrality, kmax);
    const auto refined_cmp = detail::compare_to(base, refined, cfg.k_values, cfg.p);

    rep.samples.resize(cfg.n_samples);
    std::vector<detail::Comparison> results(cfg.n_samples);
    std::vector<detail::Comparison> checks(cross_check ? cfg.n_samples : 0);
    for (std::size_t s = 0; s < cfg.n_samples; ++s) {
        Rng rng(substream_seed(cfg.seed, s));
        rep.samples[s] = sample_without_replacement(rng, rep.candidate_pool.size(), cfg.sample_size);
    }
    auto run = [&](std::size_t s) {
        std::vector<TermRef> removed;
        for (std::size_t i : rep.samples[s]) removed.push_back(rep.candidate_pool[i]);
        results[s] = detail::compare_to(base, detail::full_ranking(build(removed), cfg.centrality, kmax),
                                        cfg.k_values, cfg.p);
        if (cross_check)
            checks[s] = detail::compare_to(base, detail::full_ranking((*cross_check)(removed), cfg.centrality, kmax),
                                           cfg.k_values, cfg.p);
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.n_samples)));
    if (threads == 1) {
        for (std::size_t s = 0; s < cfg.n_samples; ++s) run(s);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t s = t; s < cfg.n_samples; s += threads) run(s);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (std::size_t ki = 0; ki < cfg.k_values.size(); ++ki) {
        NullModelRow row;
        row.k = cfg.k_values[ki];
        row.K_refined = refined_cmp.K[ki];
        row.CER_refined = refined_cmp.cer[ki];
        {
            const std::size_t k = row.k;
            std::vector<std::string> a(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(std::min(k, base.size())));
            std::vector<std::string> b(refined.begin(), refined.begin() + static_cast<std::ptrdiff_t>(std::min(k, refined.size())));
            auto br = fagin_breakdown(a, b);
            row.common_refined = br.common;
            row.K_refined_normalized = normalize_fagin(br.distance(cfg.p), br.union_size);
        }
        std::vector<double> ks, cers;
        std::size_t at_least = 0;
        for (const auto& r : results) {
            ks.push_back(r.K[ki]);
            cers.push_back(r.cer[ki]);
            if (r.K[ki] >= row.K_refined) ++at_least;
        }
        detail::mean_std(ks, row.K_random_mean, row.K_random_std);
        detail::mean_std(cers, row.CER_random_mean, row.CER_random_std);
        row.p_value = static_cast<double>(at_least) / static_cast<double>(cfg.n_samples);
        rep.rows.push_back(row);
    }
    if (cross_check) {
        RetagDiscrepancy d;
        for (std::size_t s = 0; s < cfg.n_samples; ++s)
            for (std::size_t ki = 0; ki < cfg.k_values.size(); ++ki) {
                ++d.compared;
                double diff = std::abs(results[s].K[ki] - checks[s].K[ki]);
                if (diff > 0) ++d.differing;
                d.max_abs_K_difference = std::max(d.max_abs_K_difference, diff);
            }
        rep.retag = d;
    }
    return rep;
}

// Filter mode over a MatchSet: networks are rebuilt by dropping matches.
inline NullModelReport run_null_model(const MatchSet& matches, const FprTable& fpr, const std::vector<TermRef>& selected,
                                      const NullModelConfig& cfg) {
    auto index = std::make_shared<const CoMentionIndex>(matches);
    return run_null_model(fpr, selected, cfg, filter_builder(index));
}

inline nlohmann::json to_json(const TermRef& t) {
    return {{"child_term", t.child_term}, {"category", to_string(t.category)}};
}

inline nlohmann::json to_json(const NullModelReport& r) {
    nlohmann::json sel = nlohmann::json::array(), pool = nlohmann::json::array(), rows = nlohmann::json::array();
    for (const auto& t : r.selected) sel.push_back(to_json(t));
    for (const auto& t : r.candidate_pool) pool.push_back(to_json(t));
    for (const auto& row : r.rows)
        rows.push_back({{"k", row.k},
                        {"K_refined", row.K_refined},
                        {"K_refined_normalized", row.K_refined_normalized},
                        {"common_refined", row.common_refined},
                        {"CER_refined", row.CER_refined},
                        {"K_random_mean", row.K_random_mean},
                        {"K_random_std", row.K_random_std},
                        {"p_value", row.p_value},
                        {"CER_random_mean", row.CER_random_mean},
                        {"CER_random_std", row.CER_random_std}});
    nlohmann::json j = {{"mode", r.mode},
                        {"n_samples", r.n_samples},
                        {"sample_size", r.sample_size},
                        {"seed", r.seed},
                        {"freq_floor", r.freq_floor},
                        {"fpr_max", r.fpr_max},
                        {"p", r.p},
                        {"k_values", r.k_values},
                        {"selected", sel},
                        {"candidate_pool_size", r.candidate_pool.size()},
                        {"candidate_pool", pool},
                        {"rows", rows},
                        {"samples", r.samples}};
    if (r.retag)
        j["retag_discrepancy"] = {{"compared", r.retag->compared},
                                  {"differing", r.retag->differing},
                                  {"max_abs_K_difference", r.retag->max_abs_K_difference}};
    return j;
}

inline NullModelReport null_model_from_json(const nlohmann::json& j) {
    NullModelReport r;
    r.mode = j.value("mode", std::string("filter"));
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.sample_size = j.at("sample_size").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.freq_floor = j.value("freq_floor", std::uint64_t{0});
    r.fpr_max = j.value("fpr_max", 0.5);
    r.p = j.value("p", 0.5);
    r.k_values = j.at("k_values").get<std::vector<std::size_t>>();
    for (const auto& t : j.value("selected", nlohmann::json::array()))
        r.selected.push_back({t.at("child_term").get<std::string>(), category_or_throw(t.at("category").get<std::string>())});
    for (const auto& t : j.value("candidate_pool", nlohmann::json::array()))
        r.candidate_pool.push_back({t.at("child_term").get<std::string>(), category_or_throw(t.at("category").get<std::string>())});
    r.samples = j.value("samples", std::vector<std::vector<std::size_t>>{});
    for (const auto& row : j.at("rows"))
        r.rows.push_back({row.at("k").get<std::size_t>(), row.at("K_refined").get<double>(),
                          row.value("K_refined_normalized", 0.0), row.value("common_refined", std::size_t{0}),
                          row.value("CER_refined", 0.0), row.at("K_random_mean").get<double>(),
                          row.at("K_random_std").get<double>(), row.at("p_value").get<double>(),
                          row.value("CER_random_mean", 0.0), row.value("CER_random_std", 0.0)});
    return r;
}

// Distance table: k, K_refined, K_random mean and std, p-value.
inline std::string null_model_to_tsv(const NullModelReport& r) {
    std::string out = "k\tK_refined\tK_random_mean\tK_random_std\tp_value\n";
    for (const auto& row : r.rows)
        out += std::to_string(row.k) + "\t" + compact(row.K_refined) + "\t" + fixed(row.K_random_mean, 1) + "\t" +
               fixed(row.K_random_std, 1) + "\t" + fixed(row.p_value, 3) + "\n";
    return out;
}

inline std::string null_model_cer_to_tsv(const NullModelReport& r) {
    std::string out = "k\tCER_refined\tCER_random_mean\tCER_random_std\n";
    for (const auto& row : r.rows)
        out += std::to_string(row.k) + "\t" + fixed(row.CER_refined, 3) + "\t" + fixed(row.CER_random_mean, 3) + "\t" +
               fixed(row.CER_random_std, 3) + "\n";
    return out;
}

}  // namespace lexrefine
