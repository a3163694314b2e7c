#include <oracles.hpp>

#include <gtest/gtest.h>

namespace lr = lexrefine;
using nlohmann::json;

namespace {
constexpr const char* kStamp = "2024-05-01T00:00:00Z";

struct DataDir {
    oracle::TempDir tmp{"service"};
    std::string sample_id;
    std::vector<std::string> match_ids;
};

std::unique_ptr<DataDir> make_data_dir(std::size_t posts = 12) {
    auto d = std::make_unique<DataDir>();
    const auto& root = d->tmp.path;
    auto synth = lr::generate_synthetic({3, 200, 50});
    lr::write_file(root / "corpus.jsonl", synth.corpus_jsonl);
    lr::CorpusStore store(root / "store");
    auto handle = store.ingest(root / "corpus.jsonl");
    auto corpus = store.load(handle.corpus_id);
    auto ms = lr::tag_corpus(lr::Matcher(lr::parse_lexicon(synth.lexicon_tsv)), corpus);
    lr::save_matchset(ms, root / "matches.jsonl");
    auto sample = lr::sample_matched_posts(corpus, ms, posts, 11);
    lr::write_file(root / "samples" / (sample.sample_id + ".json"), lr::manifest_text(sample));
    d->sample_id = sample.sample_id;
    d->match_ids = sample.match_ids;
    return d;
}

lr::ApiRequest get(const std::string& path, std::map<std::string, std::string> query = {},
                   std::map<std::string, std::string> headers = {}) {
    return {"GET", path, std::move(query), std::move(headers), ""};
}

lr::ApiRequest post(const std::string& path, const json& body, std::map<std::string, std::string> headers = {}) {
    return {"POST", path, {}, std::move(headers), body.dump()};
}

lr::AnnotationService service(const DataDir& d) {
    return lr::AnnotationService(d.tmp.path, [] { return std::string(kStamp); });
}

std::string create(lr::AnnotationService& svc, const DataDir& d, std::vector<std::string> annotators = {"a1", "a2"}) {
    auto r = svc.handle(post("/api/sessions", {{"sample_id", d.sample_id}, {"seed", 5}, {"annotators", annotators}, {"session_id", "s1"}}));
    EXPECT_EQ(r.status, 201) << r.body;
    return r.json()["session_id"];
}

const char* verdict_name(int v) { return v == 0 ? "TruePositive" : v == 1 ? "FalsePositive" : "Unclear"; }
}  // namespace

TEST(Service, CreateListAndValidate) {
    auto d = make_data_dir();
    auto svc = service(*d);
    EXPECT_EQ(create(svc, *d), "s1");
    EXPECT_EQ(svc.handle(get("/api/sessions")).json()["sessions"].size(), 1u);
    EXPECT_EQ(svc.handle(post("/api/sessions", {{"sample_id", d->sample_id}, {"seed", 5}, {"annotators", {"a1", "a2"}}, {"session_id", "s1"}})).status, 409);
    EXPECT_EQ(svc.handle(post("/api/sessions", {{"sample_id", d->sample_id}, {"annotators", {"a1", "a2"}}})).status, 400);
    EXPECT_EQ(svc.handle(post("/api/sessions", {{"sample_id", "nope"}, {"seed", 1}, {"annotators", {"a1", "a2"}}})).status, 404);
    EXPECT_EQ(svc.handle(post("/api/sessions", {{"sample_id", "../x"}, {"seed", 1}, {"annotators", {"a1", "a2"}}})).status, 400);
    EXPECT_EQ(svc.handle({"POST", "/api/sessions", {}, {}, "{not json"}).status, 400);
    EXPECT_EQ(svc.handle(get("/api/nothing")).status, 404);
    EXPECT_EQ(svc.handle({"DELETE", "/api/sessions", {}, {}, ""}).status, 405);
}

TEST(Service, TasksCarryHighlightAndHint) {
    auto d = make_data_dir();
    auto svc = service(*d);
    auto id = create(svc, *d);
    auto r = svc.handle(get("/api/sessions/" + id + "/tasks", {{"annotator", "a1"}, {"limit", "3"}}));
    ASSERT_EQ(r.status, 200) << r.body;
    auto j = r.json();
    EXPECT_EQ(j["remaining"], d->match_ids.size());
    ASSERT_EQ(j["tasks"].size(), 3u);
    for (const auto& t : j["tasks"]) {
        const std::string text = t["post_text"];
        const std::size_t s = t["highlight"]["start"], e = t["highlight"]["end"];
        EXPECT_LT(s, e);
        EXPECT_LE(e, text.size());
        EXPECT_FALSE(t["guideline_hint"].get<std::string>().empty());
        EXPECT_FALSE(t.contains("verdicts"));
    }
    EXPECT_EQ(svc.handle(get("/api/sessions/" + id + "/tasks", {{"annotator", "zz"}})).status, 404);
    EXPECT_EQ(svc.handle(get("/api/sessions/" + id + "/tasks")).status, 400);
    EXPECT_EQ(svc.handle(get("/api/sessions/" + id + "/tasks", {{"annotator", "a1"}, {"limit", "0"}})).status, 400);
    EXPECT_EQ(svc.handle(get("/api/sessions/none/tasks", {{"annotator", "a1"}})).status, 404);
}

TEST(Service, FullRoundWithGatingAndAdjudication) {
    auto d = make_data_dir();
    auto svc = service(*d);
    auto id = create(svc, *d);
    const std::string base = "/api/sessions/" + id;
    EXPECT_FALSE(svc.handle(get(base + "/stats")).json().contains("kappa"));
    EXPECT_EQ(svc.handle(get(base + "/disagreements", {}, {{"x-role", "adjudicator"}})).status, 409);
    for (const auto& who : {"a1", "a2"}) {
        std::size_t i = 0;
        for (const auto& m : d->match_ids) {
            const std::string v = std::string(who) == "a2" && i++ % 4 == 0 ? "FalsePositive" : "TruePositive";
            auto r = svc.handle(post(base + "/labels", {{"match_id", m}, {"verdict", v}}, {{"x-annotator-id", who}}));
            ASSERT_EQ(r.status, 200) << r.body;
            EXPECT_EQ(r.json()["verdict"], v);
        }
    }
    auto stats = svc.handle(get(base + "/stats")).json();
    EXPECT_EQ(stats["status"], "complete");
    ASSERT_TRUE(stats.contains("kappa"));
    const std::size_t expected = (d->match_ids.size() + 3) / 4;
    EXPECT_EQ(stats["disagreements"], expected);
    EXPECT_EQ(svc.handle(get(base + "/disagreements")).status, 403);
    auto rows = svc.handle(get(base + "/disagreements", {}, {{"x-role", "adjudicator"}})).json()["disagreements"];
    ASSERT_EQ(rows.size(), expected);
    EXPECT_EQ(rows[0]["verdicts"]["a2"], "FalsePositive");
    EXPECT_EQ(svc.handle(post(base + "/adjudicate", {{"match_id", rows[0]["match_id"]}, {"consensus", "Mismatch"}})).status, 403);
    auto adj = svc.handle(post(base + "/adjudicate", {{"match_id", rows[0]["match_id"]}, {"consensus", "Mismatch"}, {"note", "weather"}},
                               {{"x-role", "adjudicator"}, {"x-annotator-id", "lead"}}));
    ASSERT_EQ(adj.status, 200) << adj.body;
    EXPECT_EQ(adj.json()["adjudication"]["timestamp"], kStamp);
    EXPECT_EQ(svc.handle(get(base + "/stats")).json()["adjudicated"], 1u);

    auto restarted = service(*d);
    auto again = restarted.handle(get(base + "/stats")).json();
    EXPECT_EQ(again, svc.handle(get(base + "/stats")).json());
}

TEST(Service, LabelResubmissionIsIdempotent) {
    auto d = make_data_dir();
    auto svc = service(*d);
    auto id = create(svc, *d);
    const std::string url = "/api/sessions/" + id + "/labels";
    const json body = {{"match_id", d->match_ids[0]}, {"verdict", "Unclear"}, {"annotator_id", "a1"}};
    auto first = svc.handle(post(url, body)).json();
    auto second = svc.handle(post(url, body)).json();
    EXPECT_TRUE(first["changed"]);
    EXPECT_FALSE(second["changed"]);
    EXPECT_EQ(first["progress"], second["progress"]);
    auto log = lr::read_file(d->tmp.path / "sessions" / id / "labels.jsonl");
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 1);
    EXPECT_EQ(svc.handle(post(url, {{"match_id", d->match_ids[0]}, {"verdict", "Maybe"}, {"annotator_id", "a1"}})).status, 400);
    EXPECT_EQ(svc.handle(post(url, {{"match_id", "ghost"}, {"verdict", "Unclear"}, {"annotator_id", "a1"}})).status, 404);
}

// Whatever the co-annotator says, an annotator's own responses are identical
// until the session completes.
TEST(Service, AnnotatorViewIsBlindToCoAnnotator) {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 6; ++rep) {
        auto d1 = make_data_dir(6), d2 = make_data_dir(6);
        auto s1 = service(*d1), s2 = service(*d2);
        auto id = create(s1, *d1, {"a1", "a2", "a3"});
        create(s2, *d2, {"a1", "a2", "a3"});
        const std::string base = "/api/sessions/" + id;
        // Every slot of every annotator, shuffled; labels differ between the worlds except for a1.
        std::vector<std::pair<std::string, std::string>> slots;
        for (const auto& who : {"a1", "a2", "a3"})
            for (const auto page = s1.handle(get(base + "/tasks", {{"annotator", who}, {"limit", "1000"}})).json();
                 const auto& t : page["tasks"])
                slots.emplace_back(who, t["match_id"]);
        std::shuffle(slots.begin(), slots.end(), rng);
        slots.pop_back();  // keep the session open
        for (const auto& [who, m] : slots) {
            const int v1 = static_cast<int>(rng() % 3);
            const int v2 = who == "a1" ? v1 : static_cast<int>(rng() % 3);
            auto r1 = s1.handle(post(base + "/labels", {{"match_id", m}, {"verdict", verdict_name(v1)}}, {{"x-annotator-id", who}}));
            auto r2 = s2.handle(post(base + "/labels", {{"match_id", m}, {"verdict", verdict_name(v2)}}, {{"x-annotator-id", who}}));
            ASSERT_EQ(r1.status, 200) << r1.body;
            if (who == "a1") {
                EXPECT_EQ(r1.body, r2.body);
            }
            EXPECT_EQ(r1.json()["verdict"], verdict_name(v1));
            for (const auto& probe : {"a1", "a2", "a3"}) {
                auto t1 = s1.handle(get(base + "/tasks", {{"annotator", probe}, {"limit", "1000"}}));
                auto t2 = s2.handle(get(base + "/tasks", {{"annotator", probe}, {"limit", "1000"}}));
                EXPECT_EQ(t1.body, t2.body);
            }
            EXPECT_EQ(s1.handle(get(base + "/stats")).body, s2.handle(get(base + "/stats")).body);
        }
    }
}

TEST(Service, FprAndReports) {
    auto d = make_data_dir();
    auto svc = service(*d);
    EXPECT_EQ(svc.handle(get("/api/fpr")).status, 404);
    lr::write_file(d->tmp.path / "fpr.tsv", lr::read_file(oracle::data_dir() / "fixtures" / "top_terms_fpr.tsv"));
    auto fpr = svc.handle(get("/api/fpr")).json();
    EXPECT_FALSE(fpr["rows"].empty());
    EXPECT_TRUE(fpr["totals"].contains("MedicalTerm"));
    lr::write_file(d->tmp.path / "reports" / "fagin_k.tsv", "k\tK\n10\t1\n");
    auto rep = svc.handle(get("/api/reports/fagin_k.tsv"));
    EXPECT_EQ(rep.status, 200);
    EXPECT_EQ(rep.body, "k\tK\n10\t1\n");
    EXPECT_EQ(svc.handle(get("/api/reports/..")).status, 400);
    EXPECT_EQ(svc.handle(get("/api/reports/missing.tsv")).status, 404);
}

TEST(Server, HttpRoundTrip) {
    auto d = make_data_dir();
    lr::Server server({"127.0.0.1", 0, d->tmp.path, std::nullopt});
    const int port = server.bind();
    std::thread th([&] { server.listen(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);
    json body = {{"sample_id", d->sample_id}, {"seed", 2}, {"annotators", {"a1", "a2"}}, {"session_id", "web"}};
    auto created = cli.Post("/api/sessions", body.dump(), "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    auto tasks = cli.Get("/api/sessions/web/tasks?annotator=a2&limit=1");
    ASSERT_TRUE(tasks);
    EXPECT_EQ(json::parse(tasks->body)["tasks"].size(), 1u);
    auto forbidden = cli.Get("/api/sessions/web/disagreements");
    ASSERT_TRUE(forbidden);
    EXPECT_EQ(forbidden->status, 403);
    server.stop();
    th.join();
}
