#pragma once

// JSON-over-HTTP access to annotation sessions and pipeline artifacts.
//
// Data directory layout:
//   store/<corpus_id>/...          corpus store
//   matches.jsonl (+ .meta.json)   full match set
//   samples/<sample_id>.json       sample manifests
//   sessions/<id>/session.json     assignment
//   sessions/<id>/labels.jsonl     append-only label log
//   sessions/<id>/adjudications.jsonl
//   fpr.tsv                        optional FPR table
//   reports/<name>                 read-only artifacts
//   guidelines.json                optional per-category hint text
//
// Request handling is a pure function of (state, request) so it can be driven
// without sockets; `Server` binds it to cpp-httplib.

#include <lexrefine/annotation.hpp>
#include <lexrefine/corpus.hpp>
#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/sample.hpp>
#include <lexrefine/tagger.hpp>

#include <httplib.h>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace lexrefine {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers;  // lower-case names
    std::string body;

    std::optional<std::string> header(const std::string& name) const {
        auto it = headers.find(name);
        if (it == headers.end()) return std::nullopt;
        return it->second;
    }
    std::optional<std::string> param(const std::string& name) const {
        auto it = query.find(name);
        if (it == query.end()) return std::nullopt;
        return it->second;
    }
};

struct ApiResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";

    nlohmann::json json() const { return nlohmann::json::parse(body); }
};

inline const std::map<Category, std::string>& default_guideline_hints() {
    static const std::map<Category, std::string> hints = {
        {Category::Allergen,
         "True when the term names the food, plant or substance itself, whether or not an allergy is "
         "mentioned. False for colors, names, places or brands."},
        {Category::Drug,
         "True when the term refers to the medication or substance. False for people, songs, places or "
         "other unrelated uses of the same word."},
        {Category::MedicalTerm,
         "True when the term describes a symptom, condition or clinical event. False for figurative, "
         "weather, temperature or slang uses."},
        {Category::NaturalProduct,
         "True when the term refers to the plant, herb or natural preparation. False for names, colors, "
         "decorations or flavors unrelated to consumption."},
    };
    return hints;
}

class AnnotationService {
public:
    // Clock returns an ISO-8601 UTC timestamp for label and adjudication records.
    using Clock = std::function<std::string()>;

    explicit AnnotationService(fs::path data_dir, Clock clock = now_iso8601)
        : dir_(std::move(data_dir)), clock_(std::move(clock)) {
        if (!fs::is_directory(dir_)) throw Error(Errc::not_found, "data directory not found: " + dir_.string());
        hints_ = default_guideline_hints();
        if (fs::exists(dir_ / "guidelines.json")) {
            auto j = nlohmann::json::parse(read_file(dir_ / "guidelines.json"));
            for (const auto& [k, v] : j.items()) hints_[category_or_throw(k)] = v.get<std::string>();
        }
        if (fs::is_directory(dir_ / "sessions"))
            for (const auto& e : fs::directory_iterator(dir_ / "sessions"))
                if (fs::exists(e.path() / "session.json")) load_session(e.path());
    }

    const fs::path& data_dir() const { return dir_; }

    ApiResponse handle(const ApiRequest& req) {
        try {
            return route(req);
        } catch (const Error& e) {
            return problem(status_of(e.code()), errc_name(e.code()), e.what());
        } catch (const nlohmann::json::exception& e) {
            return problem(400, "bad_request", e.what());
        } catch (const std::exception& e) {
            return problem(500, "internal", e.what());
        }
    }

private:
    struct SessionState {
        AnnotationSession session;
        fs::path dir;
    };

    static int status_of(Errc c) {
        switch (c) {
            case Errc::invalid_argument:
            case Errc::parse: return 400;
            case Errc::not_found: return 404;
            case Errc::conflict: return 409;
            case Errc::unavailable: return 503;
            default: return 500;
        }
    }

    static ApiResponse problem(int status, std::string_view code, std::string_view detail) {
        return {status, nlohmann::json{{"error", code}, {"detail", detail}}.dump(), "application/json"};
    }

    static ApiResponse ok(const nlohmann::json& j, int status = 200) { return {status, j.dump(), "application/json"}; }

    static std::vector<std::string> split_path(std::string_view path) {
        std::vector<std::string> out;
        std::size_t i = 0;
        while (i < path.size()) {
            auto j = path.find('/', i);
            if (j == std::string_view::npos) j = path.size();
            if (j > i) out.emplace_back(path.substr(i, j - i));
            i = j + 1;
        }
        return out;
    }

    ApiResponse route(const ApiRequest& req) {
        const auto parts = split_path(req.path);
        const bool get = req.method == "GET", post = req.method == "POST";
        if (parts.size() < 2 || parts[0] != "api") return problem(404, "not_found", "no route for " + req.path);
        if (parts[1] == "sessions") {
            if (parts.size() == 2) {
                if (get) return list_sessions();
                if (post) return create(req);
            } else if (parts.size() == 4) {
                const std::string& id = parts[2];
                const std::string& what = parts[3];
                if (get && what == "tasks") return tasks(id, req);
                if (post && what == "labels") return label(id, req);
                if (get && what == "stats") return stats(id);
                if (get && what == "disagreements") return disagreement_rows(id, req);
                if (post && what == "adjudicate") return adjudicate(id, req);
            }
        } else if (parts[1] == "fpr" && parts.size() == 2 && get) {
            return fpr();
        } else if (parts[1] == "reports" && parts.size() == 3 && get) {
            return report(parts[2]);
        }
        return problem(get || post ? 404 : 405, get || post ? "not_found" : "method_not_allowed",
                       "no route for " + req.method + " " + req.path);
    }

    // --- stores -----------------------------------------------------------

    void load_session(const fs::path& dir) {
        SessionState st{session_from_json(nlohmann::json::parse(read_file(dir / "session.json"))), dir};
        if (fs::exists(dir / "labels.jsonl"))
            for (auto& l : parse_labels(read_file(dir / "labels.jsonl"))) st.session.record_label(std::move(l));
        if (fs::exists(dir / "adjudications.jsonl"))
            for (const std::string content = read_file(dir / "adjudications.jsonl");
                 const auto& line : split_lines(content))
                if (!line.text.empty())
                    st.session.adjudicate(adjudication_from_json(nlohmann::json::parse(line.text)));
        auto id = st.session.session_id();
        sessions_.insert_or_assign(id, std::move(st));
    }

    SessionState& session(const std::string& id) {
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error(Errc::not_found, "unknown session " + id);
        return it->second;
    }

    const MatchSet& matches() {
        if (!matches_) {
            const auto path = dir_ / "matches.jsonl";
            if (!fs::exists(path)) throw Error(Errc::not_found, "data directory has no matches.jsonl");
            matches_ = load_matchset(path);
            for (std::size_t i = 0; i < matches_->matches.size(); ++i)
                match_index_.emplace(matches_->matches[i].match_id, i);
        }
        return *matches_;
    }

    const TermMatch& match(const std::string& id) {
        matches();
        auto it = match_index_.find(id);
        if (it == match_index_.end()) throw Error(Errc::not_found, "unknown match " + id);
        return matches_->matches[it->second];
    }

    const Corpus& corpus() {
        if (!corpus_) {
            const auto& ms = matches();
            CorpusStore store(dir_ / "store");
            std::string id = ms.corpus_id;
            if (id.empty()) {
                auto ids = store.list();
                if (ids.size() != 1) throw Error(Errc::not_found, "cannot tell which stored corpus the matches belong to");
                id = ids.front();
            }
            corpus_ = std::make_unique<Corpus>(store.load(id));
        }
        return *corpus_;
    }

    static void append_line(const fs::path& path, const std::string& line) {
        std::ofstream out(path, std::ios::app | std::ios::binary);
        if (!out) throw Error(Errc::io, "cannot append to " + path.string());
        out << line << '\n';
        out.flush();
        if (!out) throw Error(Errc::io, "write failed: " + path.string());
    }

    // --- views ------------------------------------------------------------

    static nlohmann::json progress_json(const Progress& p) { return {{"labeled", p.labeled}, {"total", p.total}}; }

    nlohmann::json summary(const AnnotationSession& s) const {
        return {{"session_id", s.session_id()},
                {"sample_id", s.sample_id()},
                {"annotators", s.annotators()},
                {"status", to_string(s.status())},
                {"progress", progress_json(s.progress())}};
    }

    nlohmann::json task_view(const TermMatch& m) {
        const Post* p = corpus().find(m.post_id);
        if (!p) throw Error(Errc::not_found, "post " + m.post_id + " missing from the corpus store");
        return {{"match_id", m.match_id},
                {"post_id", m.post_id},
                {"post_text", p->text},
                {"highlight", {{"start", m.start}, {"end", m.end}}},
                {"child_term", m.child_term},
                {"parent_term", m.parent_term},
                {"category", to_string(m.category)},
                {"guideline_hint", hints_.at(m.category)}};
    }

    static std::string annotator_of(const ApiRequest& req) {
        if (auto a = req.param("annotator")) return *a;
        if (auto a = req.header("x-annotator-id")) return *a;
        throw Error(Errc::invalid_argument, "annotator id missing (query 'annotator' or header X-Annotator-Id)");
    }

    static bool is_adjudicator(const ApiRequest& req) {
        auto r = req.header("x-role");
        return r && *r == "adjudicator";
    }

    // --- handlers ---------------------------------------------------------

    ApiResponse list_sessions() {
        std::lock_guard lock(mu_);
        nlohmann::json out = nlohmann::json::array();
        for (const auto& [_, st] : sessions_) out.push_back(summary(st.session));
        return ok({{"sessions", out}});
    }

    ApiResponse create(const ApiRequest& req) {
        auto body = nlohmann::json::parse(req.body);
        const auto sample_id = body.at("sample_id").get<std::string>();
        if (!body.contains("seed")) throw Error(Errc::invalid_argument, "session creation requires a seed");
        const auto seed = body.at("seed").get<std::uint64_t>();
        const auto annotators = body.at("annotators").get<std::vector<std::string>>();
        std::string session_id = body.value("session_id", std::string());
        if (sample_id.find('/') != std::string::npos || sample_id.find("..") != std::string::npos)
            throw Error(Errc::invalid_argument, "bad sample id");
        const auto sample_path = dir_ / "samples" / (sample_id + ".json");
        if (!fs::exists(sample_path)) throw Error(Errc::not_found, "unknown sample " + sample_id);
        auto sample = sample_from_json(nlohmann::json::parse(read_file(sample_path)));
        std::lock_guard lock(mu_);
        for (const auto& m : sample.match_ids) match(m);
        auto s = create_session(sample, annotators, seed, session_id);
        if (s.session_id().find('/') != std::string::npos) throw Error(Errc::invalid_argument, "bad session id");
        if (sessions_.count(s.session_id())) throw Error(Errc::conflict, "session " + s.session_id() + " exists");
        const auto dir = dir_ / "sessions" / s.session_id();
        write_file(dir / "session.json", session_to_json(s).dump(2) + "\n");
        auto out = summary(s);
        std::string key = s.session_id();
        sessions_.emplace(std::move(key), SessionState{std::move(s), dir});
        return ok(out, 201);
    }

    ApiResponse tasks(const std::string& id, const ApiRequest& req) {
        const auto annotator = annotator_of(req);
        std::size_t limit = 50;
        if (auto l = req.param("limit")) {
            auto v = parse_int(*l);
            if (!v || *v < 1) throw Error(Errc::invalid_argument, "limit must be a positive integer");
            limit = static_cast<std::size_t>(*v);
        }
        std::lock_guard lock(mu_);
        const auto& s = session(id).session;
        if (s.progress_for(annotator).total == 0)
            throw Error(Errc::not_found, "annotator " + annotator + " has no tasks in session " + id);
        auto pending = s.pending_for(annotator);
        nlohmann::json list = nlohmann::json::array();
        for (std::size_t i = 0; i < pending.size() && i < limit; ++i) list.push_back(task_view(match(pending[i])));
        return ok({{"session_id", id},
                   {"annotator", annotator},
                   {"status", to_string(s.status())},
                   {"progress", progress_json(s.progress_for(annotator))},
                   {"remaining", pending.size()},
                   {"tasks", list}});
    }

    ApiResponse label(const std::string& id, const ApiRequest& req) {
        auto body = nlohmann::json::parse(req.body);
        Label l;
        l.match_id = body.at("match_id").get<std::string>();
        l.annotator_id = body.contains("annotator_id") ? body["annotator_id"].get<std::string>() : annotator_of(req);
        l.verdict = parse_verdict_name(body.at("verdict").get<std::string>());
        l.note = body.value("note", std::string());
        l.timestamp = clock_();
        std::lock_guard lock(mu_);
        auto& st = session(id);
        Label stored = l;
        auto receipt = st.session.record_label(std::move(l));
        if (receipt.changed) append_line(st.dir / "labels.jsonl", to_json(stored).dump());
        return ok({{"match_id", receipt.match_id},
                   {"annotator_id", receipt.annotator_id},
                   {"verdict", to_string(receipt.verdict)},
                   {"changed", receipt.changed},
                   {"progress", progress_json(st.session.progress_for(receipt.annotator_id))},
                   {"status", to_string(receipt.status)}});
    }

    // Agreement figures appear only once every label is in.
    ApiResponse stats(const std::string& id) {
        std::lock_guard lock(mu_);
        const auto& s = session(id).session;
        nlohmann::json per = nlohmann::json::object();
        for (const auto& a : s.annotators()) per[a] = progress_json(s.progress_for(a));
        nlohmann::json out = {{"session_id", id},
                              {"status", to_string(s.status())},
                              {"progress", progress_json(s.progress())},
                              {"annotators", per}};
        if (s.is_complete()) {
            out["kappa"] = session_kappa(s);
            std::map<std::string, std::size_t> counts = {{"Match", 0}, {"Mismatch", 0}, {"Uncertain", 0}};
            for (const auto& c : adjudicated_consensus(s)) ++counts[std::string(to_string(c.consensus))];
            out["consensus"] = counts;
            out["disagreements"] = disagreements(s).size();
            out["adjudicated"] = s.adjudications().size();
        }
        return ok(out);
    }

    ApiResponse disagreement_rows(const std::string& id, const ApiRequest& req) {
        if (!is_adjudicator(req)) return problem(403, "forbidden", "adjudicator role required");
        std::lock_guard lock(mu_);
        const auto& s = session(id).session;
        if (!s.is_complete()) throw Error(Errc::conflict, "session " + id + " is still open");
        auto pairs = s.verdict_pairs();
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (pairs[i].first == pairs[i].second) continue;
            const auto& a = s.assignment()[i];
            auto row = task_view(match(a.match_id));
            row["verdicts"] = {{a.annotators[0], to_string(pairs[i].first)}, {a.annotators[1], to_string(pairs[i].second)}};
            row["consensus"] = to_string(consensus_of(pairs[i].first, pairs[i].second));
            if (auto it = s.adjudications().find(a.match_id); it != s.adjudications().end())
                row["adjudication"] = to_json(it->second);
            rows.push_back(row);
        }
        return ok({{"session_id", id}, {"disagreements", rows}});
    }

    ApiResponse adjudicate(const std::string& id, const ApiRequest& req) {
        if (!is_adjudicator(req)) return problem(403, "forbidden", "adjudicator role required");
        auto body = nlohmann::json::parse(req.body);
        Adjudication a;
        a.match_id = body.at("match_id").get<std::string>();
        a.consensus = parse_consensus_name(body.at("consensus").get<std::string>());
        a.adjudicator_id = body.value("adjudicator_id", req.header("x-annotator-id").value_or(""));
        a.note = body.value("note", std::string());
        a.timestamp = clock_();
        std::lock_guard lock(mu_);
        auto& st = session(id);
        st.session.adjudicate(a);
        append_line(st.dir / "adjudications.jsonl", to_json(a).dump());
        return ok({{"session_id", id}, {"status", to_string(st.session.status())}, {"adjudication", to_json(a)}});
    }

    ApiResponse fpr() {
        const auto path = dir_ / "fpr.tsv";
        if (!fs::exists(path)) throw Error(Errc::not_found, "no FPR table has been computed");
        auto t = parse_fpr_table(read_file(path));
        nlohmann::json rows = nlohmann::json::array(), totals = nlohmann::json::object();
        for (const auto& r : t.rows)
            rows.push_back({{"child_term", r.child_term},
                            {"category", to_string(r.category)},
                            {"parent_term", r.parent_term},
                            {"sample_frequency", r.sample_frequency},
                            {"fp_count", r.fp_count},
                            {"fpr", r.fpr()},
                            {"corpus_frequency", r.corpus_frequency}});
        for (const auto& [c, tot] : t.totals)
            totals[std::string(to_string(c))] = {
                {"sample_frequency", tot.sample_frequency}, {"fp_count", tot.fp_count}, {"fpr", tot.fpr()}};
        return ok({{"rows", rows}, {"totals", totals}});
    }

    ApiResponse report(const std::string& name) {
        if (name.empty() || name[0] == '.' || name.find('/') != std::string::npos || name.find('\\') != std::string::npos)
            throw Error(Errc::invalid_argument, "bad report name");
        const auto path = dir_ / "reports" / name;
        if (!fs::is_regular_file(path)) throw Error(Errc::not_found, "no report named " + name);
        std::string type = "text/plain; charset=utf-8";
        const auto ext = path.extension().string();
        if (ext == ".json") type = "application/json";
        else if (ext == ".tsv") type = "text/tab-separated-values; charset=utf-8";
        return {200, read_file(path), type};
    }

    fs::path dir_;
    Clock clock_;
    std::mutex mu_;
    std::map<Category, std::string> hints_;
    std::map<std::string, SessionState> sessions_;
    std::optional<MatchSet> matches_;
    std::unordered_map<std::string, std::size_t> match_index_;
    std::unique_ptr<Corpus> corpus_;
};

struct ServeConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0: pick a free port
    fs::path data_dir;
    std::optional<fs::path> static_dir;
};

// Binds an AnnotationService to cpp-httplib. Label writes are appended and
// flushed before each response, so stopping never loses acknowledged labels.
class Server {
public:
    explicit Server(ServeConfig cfg) : cfg_(std::move(cfg)), service_(cfg_.data_dir) {
        auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
            ApiRequest r;
            r.method = req.method;
            r.path = req.path;
            for (const auto& [k, v] : req.params) r.query.emplace(k, v);
            for (const auto& [k, v] : req.headers) {
                std::string key = k;
                for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                r.headers.emplace(key, v);
            }
            r.body = req.body;
            auto out = service_.handle(r);
            res.status = out.status;
            res.set_content(out.body, out.content_type);
        };
        http_.Get(R"(/api/.*)", bridge);
        http_.Post(R"(/api/.*)", bridge);
        if (cfg_.static_dir) {
            if (!fs::is_directory(*cfg_.static_dir))
                throw Error(Errc::not_found, "static directory not found: " + cfg_.static_dir->string());
            http_.set_mount_point("/", cfg_.static_dir->string());
        }
    }

    // Binds and returns the port; throws when the address is unavailable.
    int bind() {
        if (cfg_.port == 0) {
            port_ = http_.bind_to_any_port(cfg_.host);
            if (port_ < 0) throw Error(Errc::unavailable, "cannot bind " + cfg_.host);
        } else {
            if (!http_.bind_to_port(cfg_.host, cfg_.port))
                throw Error(Errc::unavailable, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
            port_ = cfg_.port;
        }
        return port_;
    }

    void listen() {
        if (port_ < 0) bind();
        http_.listen_after_bind();
    }

    void stop() { http_.stop(); }
    void wait_until_ready() { http_.wait_until_ready(); }
    int port() const { return port_; }
    AnnotationService& service() { return service_; }

private:
    ServeConfig cfg_;
    AnnotationService service_;
    httplib::Server http_;
    int port_ = -1;
};

}  // namespace lexrefine
