#include <oracles.hpp>

#include <gtest/gtest.h>

namespace lr = lexrefine;

namespace {
struct World {
    lr::MatchSet matches;
    lr::FprTable fpr;
    std::vector<lr::TermRef> noisy;  // fpr >= 0.5

    std::vector<lr::TermRef> selection() const { return {noisy.end() - 8, noisy.end()}; }
};

// 60 child terms over 30 parents; children 0..9 are noisy, 0..8 also very frequent.
World world(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    World w;
    std::map<std::string, std::uint64_t> freq;
    for (int p = 0; p < 600; ++p) {
        const std::string post = "p" + std::to_string(p);
        const int n = 2 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) {
            const int c = rng() % 3 == 0 ? static_cast<int>(rng() % 9) : static_cast<int>(rng() % 60);
            const std::string child = "c" + std::to_string(c);
            w.matches.matches.push_back({lr::make_match_id(post, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1,
                                                           lr::Category::MedicalTerm),
                                         post, child, "P" + std::to_string(c % 30), lr::Category::MedicalTerm,
                                         static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, {}});
            ++freq[child];
        }
    }
    for (const auto& [child, f] : freq) {
        const int c = std::stoi(child.substr(1));
        const std::uint64_t n = 20;
        const std::uint64_t fp = c < 10 ? 15 : rng() % 10;
        w.fpr.rows.push_back({child, "P" + std::to_string(c % 30), lr::Category::MedicalTerm, n, fp, f});
        if (c < 10) w.noisy.push_back({child, lr::Category::MedicalTerm});
    }
    w.fpr.recompute_totals();
    return w;
}

lr::NullModelConfig config(std::size_t samples = 100, unsigned threads = 1) {
    lr::NullModelConfig c;
    c.n_samples = samples;
    c.sample_size = 8;
    c.seed = 42;
    c.k_values = {5, 10, 20};
    c.threads = threads;
    return c;
}
}  // namespace

TEST(NullModel, SamplesHonorPoolConstraints) {
    auto w = world(1);
    auto selected = w.selection();
    auto rep = lr::run_null_model(w.matches, w.fpr, selected, config(200));
    std::uint64_t floor = ~0ULL;
    for (const auto& t : selected) floor = std::min(floor, w.fpr.find(t.child_term, t.category)->corpus_frequency);
    EXPECT_EQ(rep.freq_floor, floor);
    for (const auto& t : rep.candidate_pool) {
        const auto* r = w.fpr.find(t.child_term, t.category);
        ASSERT_NE(r, nullptr);
        EXPECT_LT(r->fpr(), 0.5);
        EXPECT_GE(r->corpus_frequency, floor);
    }
    ASSERT_EQ(rep.samples.size(), 200u);
    for (const auto& s : rep.samples) {
        EXPECT_EQ(s.size(), 8u);
        EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 8u);
        for (std::size_t i : s) EXPECT_LT(i, rep.candidate_pool.size());
    }
    for (const auto& row : rep.rows) {
        EXPECT_GE(row.p_value, 0.0);
        EXPECT_LE(row.p_value, 1.0);
        EXPECT_GE(row.K_random_std, 0.0);
    }
}

TEST(NullModel, EmptySelectionGivesUnitPValue) {
    auto w = world(2);
    auto rep = lr::run_null_model(w.matches, w.fpr, {}, config(50));
    for (const auto& row : rep.rows) {
        EXPECT_EQ(row.K_refined, 0.0);
        EXPECT_EQ(row.p_value, 1.0);
    }
}

TEST(NullModel, DeterministicAcrossThreadCounts) {
    auto w = world(3);
    auto selected = w.selection();
    auto one = lr::to_json(lr::run_null_model(w.matches, w.fpr, selected, config(120, 1))).dump();
    auto four = lr::to_json(lr::run_null_model(w.matches, w.fpr, selected, config(120, 4))).dump();
    auto again = lr::to_json(lr::run_null_model(w.matches, w.fpr, selected, config(120, 3))).dump();
    EXPECT_EQ(one, four);
    EXPECT_EQ(one, again);
}

TEST(NullModel, SeedChangesDraws) {
    auto w = world(3);
    auto c = config(20);
    auto a = lr::run_null_model(w.matches, w.fpr, {}, c);
    c.seed = 43;
    auto b = lr::run_null_model(w.matches, w.fpr, {}, c);
    EXPECT_NE(a.samples, b.samples);
}

TEST(NullModel, PoolSmallerThanSampleIsError) {
    auto w = world(4);
    auto c = config(10);
    c.freq_floor = 1000000;
    EXPECT_THROW(lr::run_null_model(w.matches, w.fpr, {}, c), lr::Error);
    c = config(10);
    c.k_values = {};
    EXPECT_THROW(lr::run_null_model(w.matches, w.fpr, {}, c), lr::Error);
    c = config(0);
    EXPECT_THROW(lr::run_null_model(w.matches, w.fpr, {}, c), lr::Error);
    EXPECT_THROW(lr::run_null_model(w.matches, w.fpr, {{"nope", lr::Category::Drug}}, config(10)), lr::Error);
}

TEST(NullModel, CrossCheckAgreesWithFilterBuilder) {
    auto w = world(5);
    auto selected = w.selection();
    auto index = std::make_shared<const lr::CoMentionIndex>(w.matches);
    lr::NetworkBuilder slow = [&](const std::vector<lr::TermRef>& removed) {
        std::set<lr::TermRef> drop(removed.begin(), removed.end());
        lr::MatchSet kept;
        for (const auto& m : w.matches.matches)
            if (!drop.count({m.child_term, m.category})) kept.matches.push_back(m);
        return lr::build_network(kept);
    };
    auto rep = lr::run_null_model(w.fpr, selected, config(40), lr::filter_builder(index), &slow);
    ASSERT_TRUE(rep.retag);
    EXPECT_EQ(rep.retag->compared, 40u * 3u);
    EXPECT_EQ(rep.retag->differing, 0u);
}

TEST(NullModel, RemovingNoisyHubsBeatsRandomRemoval) {
    auto w = world(6);
    auto selected = w.selection();
    auto rep = lr::run_null_model(w.matches, w.fpr, selected, config(200, 4));
    for (const auto& row : rep.rows) EXPECT_GT(row.K_refined, row.K_random_mean) << row.k;
}

TEST(NullModel, PValueOfARandomDrawIsNotExtreme) {
    // Selecting a random pool sample should look like the null: p-values over
    // repeated draws are not concentrated near zero.
    auto w = world(7);
    auto base = lr::run_null_model(w.matches, w.fpr, {}, config(1));
    std::mt19937_64 rng(99);
    int small = 0, trials = 20;
    for (int t = 0; t < trials; ++t) {
        auto idx = lr::sample_without_replacement(rng, base.candidate_pool.size(), 8);
        std::vector<lr::TermRef> pick;
        for (auto i : idx) pick.push_back(base.candidate_pool[i]);
        auto c = config(100);
        c.freq_floor = 0;
        c.seed = static_cast<std::uint64_t>(t);
        auto rep = lr::run_null_model(w.matches, w.fpr, pick, c);
        small += rep.rows[1].p_value < 0.05;
    }
    EXPECT_LE(small, 5);
}

TEST(NullModel, ReportJsonRoundTrip) {
    auto w = world(8);
    auto selected = w.selection();
    auto rep = lr::run_null_model(w.matches, w.fpr, selected, config(30));
    auto text = lr::to_json(rep).dump();
    EXPECT_EQ(lr::to_json(lr::null_model_from_json(nlohmann::json::parse(text))).dump(), text);
    EXPECT_EQ(lr::null_model_to_tsv(rep).substr(0, 2), "k\t");
}
