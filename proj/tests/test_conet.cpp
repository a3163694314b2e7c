#include <oracles.hpp>

#include <gtest/gtest.h>

namespace lr = lexrefine;

namespace {
lr::CoMentionGraph path3() {
    lr::CoMentionGraph g;
    g.nodes = {"a", "b", "c"};
    g.edges[{0, 1}] = 1;
    g.edges[{1, 2}] = 1;
    return g;
}

lr::TermMatch mention(const std::string& post, std::size_t at, const std::string& child, const std::string& parent) {
    return {lr::make_match_id(post, at, at + 1, lr::Category::Drug), post, child, parent, lr::Category::Drug, at, at + 1, {}};
}

lr::MatchSet random_matches(std::mt19937_64& rng, const std::string& prefix, int posts) {
    lr::MatchSet ms;
    for (int p = 0; p < posts; ++p) {
        const std::string post = prefix + std::to_string(p);
        const int n = 1 + static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) {
            const int c = static_cast<int>(rng() % 12);
            ms.matches.push_back(mention(post, static_cast<std::size_t>(i), "c" + std::to_string(c), "P" + std::to_string(c / 2)));
        }
    }
    return ms;
}
}  // namespace

TEST(Centrality, PathGraphClosedForm) {
    auto r = lr::eigenvector_centrality(path3());
    EXPECT_NEAR(r.score("a"), 0.5, 1e-10);
    EXPECT_NEAR(r.score("b"), std::sqrt(2.0) / 2, 1e-10);
    EXPECT_NEAR(r.score("c"), 0.5, 1e-10);
    EXPECT_NEAR(r.dominant_eigenvalue, std::sqrt(2.0), 1e-10);
}

TEST(Centrality, CompleteGraphIsUniform) {
    lr::CoMentionGraph g;
    g.nodes = {"a", "b", "c", "d"};
    for (std::uint32_t i = 0; i < 4; ++i)
        for (std::uint32_t j = i + 1; j < 4; ++j) g.edges[{i, j}] = 3;
    auto r = lr::eigenvector_centrality(g);
    for (double s : r.scores) EXPECT_NEAR(s, 0.5, 1e-12);
    EXPECT_NEAR(r.dominant_eigenvalue, 9.0, 1e-10);
}

TEST(Centrality, RandomGraphsMatchDenseEigensolver) {
    std::mt19937_64 rng(31337);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 2 + rng() % 19;
        auto g = oracle::random_connected_graph(rng, n);
        double lambda = 0;
        auto want = oracle::spectral_centrality(g, &lambda);
        auto got = lr::eigenvector_centrality(g);
        ASSERT_EQ(got.scores.size(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(got.scores[i], want[i], 1e-8) << "graph " << rep << " node " << i;
        EXPECT_NEAR(got.dominant_eigenvalue, lambda, 1e-8 * lambda);
    }
}

TEST(Centrality, InvariantUnderWeightScaling) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        auto g = oracle::random_connected_graph(rng, 3 + rng() % 15);
        auto scaled = g;
        for (auto& [_, w] : scaled.edges) w *= 7;
        auto a = lr::eigenvector_centrality(g), b = lr::eigenvector_centrality(scaled);
        for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-10);
        EXPECT_NEAR(b.dominant_eigenvalue, 7 * a.dominant_eigenvalue, 1e-8 * b.dominant_eigenvalue);
    }
}

TEST(Centrality, EquivariantUnderRelabeling) {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 3 + rng() % 15;
        auto g = oracle::random_connected_graph(rng, n);
        std::vector<std::string> renamed(n);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n; ++i) renamed[i] = "m" + std::to_string(100 + perm[i]);
        lr::CoMentionGraph h;
        h.nodes = renamed;
        std::sort(h.nodes.begin(), h.nodes.end());
        for (const auto& [e, w] : g.edges) {
            auto x = *h.index_of(renamed[e.first]), y = *h.index_of(renamed[e.second]);
            h.edges[std::minmax(x, y)] = w;
        }
        auto a = lr::eigenvector_centrality(g), b = lr::eigenvector_centrality(h);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a.scores[i], b.score(renamed[i]), 1e-10);
    }
}

TEST(Centrality, BitwiseDeterministic) {
    std::mt19937_64 rng(7);
    auto g = oracle::random_connected_graph(rng, 20);
    auto a = lr::eigenvector_centrality(g), b = lr::eigenvector_centrality(g);
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Centrality, ErrorsAreTyped) {
    lr::CoMentionGraph empty;
    empty.nodes = {"a"};
    try {
        lr::eigenvector_centrality(empty);
        FAIL();
    } catch (const lr::Error& e) {
        EXPECT_EQ(e.code(), lr::Errc::invalid_argument);
    }
    std::mt19937_64 rng(8);
    auto g = oracle::random_connected_graph(rng, 15);
    try {
        lr::eigenvector_centrality(g, {1e-15, 1});
        FAIL();
    } catch (const lr::Error& e) {
        EXPECT_EQ(e.code(), lr::Errc::convergence);
    }
}

TEST(TopK, OrdersByScoreThenLabel) {
    lr::CentralityResult r;
    r.nodes = {"a", "b", "c", "d"};
    r.scores = {0.2, 0.7, 0.2, 0.6};
    auto t = lr::top_k(r, 3);
    EXPECT_EQ(t.terms(), (std::vector<std::string>{"b", "d", "a"}));
    EXPECT_EQ(t.items[2].rank, 3u);
    EXPECT_EQ(lr::top_k(r, 10).items.size(), 4u);
    EXPECT_THROW(lr::top_k(r, 0), lr::Error);
}

TEST(BuildNetwork, CountsPostsNotMentions) {
    lr::MatchSet ms;
    ms.matches = {mention("p1", 0, "hot", "Feeling hot"), mention("p1", 1, "hot", "Feeling hot"),
                  mention("p1", 2, "valium", "Diazepam"), mention("p2", 0, "valium", "Diazepam"),
                  mention("p2", 1, "xanax", "Alprazolam"), mention("p2", 2, "feeling hot", "Feeling hot"),
                  mention("p3", 0, "xanax", "Alprazolam")};
    auto g = lr::build_network(ms);
    EXPECT_EQ(g.nodes, (std::vector<std::string>{"Alprazolam", "Diazepam", "Feeling hot"}));
    EXPECT_EQ(g.weight("Diazepam", "Feeling hot"), 2u);
    EXPECT_EQ(g.weight("Alprazolam", "Diazepam"), 1u);
    EXPECT_EQ(g.weight("Alprazolam", "Feeling hot"), 1u);
    EXPECT_THROW(lr::build_network(lr::MatchSet{}), lr::Error);
}

TEST(BuildNetwork, AdditiveOverDisjointPosts) {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 30; ++rep) {
        auto a = random_matches(rng, "x", 40), b = random_matches(rng, "y", 40);
        lr::MatchSet both = a;
        both.matches.insert(both.matches.end(), b.matches.begin(), b.matches.end());
        auto ga = lr::build_network(a), gb = lr::build_network(b), gu = lr::build_network(both);
        for (const auto& u : gu.nodes)
            for (const auto& v : gu.nodes)
                if (u < v) {
                    EXPECT_EQ(gu.weight(u, v), ga.weight(u, v) + gb.weight(u, v));
                }
    }
}

TEST(BuildNetwork, IndexExclusionMatchesDroppingMatches) {
    std::mt19937_64 rng(10);
    auto ms = random_matches(rng, "p", 200);
    lr::CoMentionIndex index(ms);
    std::vector<lr::TermRef> removed = {{"c1", lr::Category::Drug}, {"c4", lr::Category::Drug}, {"c5", lr::Category::Drug}};
    lr::MatchSet kept;
    for (const auto& m : ms.matches)
        if (m.child_term != "c1" && m.child_term != "c4" && m.child_term != "c5") kept.matches.push_back(m);
    EXPECT_EQ(lr::edges_to_tsv(index.graph_without(removed)), lr::edges_to_tsv(lr::build_network(kept)));
}

TEST(NetworkIo, EdgesAndRankingsRoundTrip) {
    std::mt19937_64 rng(11);
    auto g = oracle::random_connected_graph(rng, 12);
    auto text = lr::edges_to_tsv(g);
    EXPECT_EQ(lr::edges_to_tsv(lr::parse_edges(text)), text);
    EXPECT_THROW(lr::parse_edges("parent_a\tparent_b\tweight\na\tb\tx\n"), lr::Error);
    auto ranked = lr::top_k(lr::eigenvector_centrality(g), 5);
    auto rt = lr::parse_ranked(lr::ranked_to_tsv(ranked));
    EXPECT_EQ(rt.terms(), ranked.terms());
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(rt.items[i].score, ranked.items[i].score, 5e-7);
    EXPECT_EQ(lr::ranked_to_tsv(rt), lr::ranked_to_tsv(ranked));
}
