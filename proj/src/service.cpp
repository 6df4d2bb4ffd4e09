#include "dfkg/service.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "dfkg/csv.hpp"
#include "dfkg/error.hpp"
#include "dfkg/evaluate.hpp"
#include "dfkg/flatten.hpp"
#include "dfkg/pipeline.hpp"
#include "dfkg/run_store.hpp"
#include "dfkg/util.hpp"
#include "dfkg/verdicts.hpp"

namespace dfkg::service {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

Response json_response(int status, const json& j) {
    Response r;
    r.status = status;
    r.body = j.dump(2) + "\n";
    return r;
}

Response error_response(int status, std::string_view code, const std::string& message) {
    return json_response(status, json{{"error", code}, {"message", message}});
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::RunNotFound:
        case ErrorCode::UnknownUid:
        case ErrorCode::UnknownEdge:
            return 404;
        case ErrorCode::StageNotReady:
        case ErrorCode::IllegalTransition:
        case ErrorCode::CustodyBreach:
        case ErrorCode::RunLocked:
            return 409;
        case ErrorCode::InvalidInput:
        case ErrorCode::InvalidConfig:
            return 400;
        default:
            return 500;
    }
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i <= path.size()) {
        std::size_t j = path.find('/', i);
        if (j == std::string_view::npos) j = path.size();
        if (j > i) out.emplace_back(path.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

std::string header_value(const std::map<std::string, std::string>& headers, std::string_view name) {
    for (const auto& [k, v] : headers)
        if (k.size() == name.size() &&
            std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) {
                return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
            }))
            return v;
    return {};
}

json record_json(const flatten::FlatRecord& r) {
    json pairs = json::object();
    for (const auto& [k, v] : r.pairs) pairs[k] = v;
    return json{{"database", r.database}, {"table", r.table}, {"path", r.path},
                {"uid", r.uid},           {"lid", r.lid},     {"pairs", std::move(pairs)}};
}

json instance_json(const graph::HypothesisInstance& inst, const verdicts::VerdictStore& store) {
    json j;
    j["edge_id"] = inst.edge_id;
    j["uid"] = inst.uid;
    j["type_pair"] = type_pair_key(inst.type_pair);
    j["source"] = inst.source_value;
    j["target"] = inst.target_value;
    j["hypothesis"] = inst.hypothesis;
    const auto* v = store.find(inst.edge_id, inst.uid);
    j["verdict"] = verdicts::to_string(v ? v->verdict : verdicts::Verdict::Pending);
    j["reviewer"] = v ? v->reviewer : "";
    j["note"] = v ? v->note : "";
    j["decided_at"] = v ? v->decided_at : "";
    return j;
}

json kgca_json(const pipeline::RunData& d, bool strict) {
    const evaluate::GroundTruth* gt = d.ground_truth ? &*d.ground_truth : nullptr;
    auto c = evaluate::count_connections(d.graph, &d.verdicts, gt, strict);
    return json{{"KGCA", evaluate::metric_json(evaluate::percent(c.correct, c.total))},
                {"connections",
                 {{"instances", c.valid + c.invalid + c.pending},
                  {"valid", c.valid},
                  {"invalid", c.invalid},
                  {"pending", c.pending}}}};
}

bool run_strict(const store::RunRecord& rec) { return rec.config.value("strict", false); }

}  // namespace

std::string etag_for(std::string_view payload) { return "\"" + sha256_hex(payload) + "\""; }

Service::Service(fs::path data_dir) : data_dir_(std::move(data_dir)) {}

std::mutex& Service::run_mutex(const std::string& run_id) {
    std::lock_guard lock(mutexes_mu_);
    auto& m = mutexes_[run_id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
}

Response Service::handle(std::string_view method, std::string_view path, std::string_view body,
                         const std::map<std::string, std::string>& headers,
                         const std::map<std::string, std::string>& query) {
    try {
        if (path.substr(0, kApiPrefix.size()) != kApiPrefix)
            return error_response(404, "NotFound", "no such endpoint");
        auto seg = split_path(path.substr(kApiPrefix.size()));
        bool get = method == "GET";
        if (seg.size() == 1 && seg[0] == "runs" && get) return list_runs();
        if (seg.size() == 2 && seg[0] == "runs" && get) return get_run(seg[1]);
        if (seg.size() == 3 && seg[0] == "runs") {
            if (seg[2] == "graph" && get) return get_graph(seg[1], headers);
            if (seg[2] == "hypotheses" && get) return get_hypotheses(seg[1]);
            if (seg[2] == "metrics" && get) return get_metrics(seg[1]);
            if (seg[2] == "verdicts" && method == "POST") return post_verdict(seg[1], body);
        }
        if (seg.size() == 2 && seg[0] == "provenance" && get) {
            auto it = query.find("run");
            return get_provenance(seg[1], it == query.end() ? std::string{} : it->second);
        }
        return error_response(404, "NotFound", "no such endpoint");
    } catch (const Error& e) {
        return error_response(status_for(e.code()), to_string(e.code()), e.detail());
    } catch (const nlohmann::json::exception& e) {
        return error_response(500, "InternalError", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "InternalError", e.what());
    }
}

Response Service::list_runs() {
    json runs = json::array();
    for (const auto& [rec, dir] : store::list_runs(data_dir_)) {
        json j;
        j["run_id"] = rec.run_id;
        j["device_id"] = rec.device_id;
        j["created_at"] = rec.created_at;
        j["engine"] = rec.engine;
        j["last_stage"] = rec.last_stage();
        runs.push_back(std::move(j));
    }
    return json_response(200, json{{"runs", std::move(runs)}});
}

Response Service::get_run(const std::string& run_id) {
    auto dir = store::find_run(data_dir_, run_id);
    json j = store::to_json(dir.load());
    json outputs = json::array();
    for (std::string_view name : {"manifest.json", "unified_records.csv", "refined_artifacts.jsonl",
                                  "evidence_records.jsonl", "graph.json", "graph.dot", "metrics_report.json",
                                  "verdicts.json", "audit.log", "ground_truth.json"})
        if (dir.exists(name)) outputs.push_back(name);
    j["outputs"] = std::move(outputs);
    return json_response(200, j);
}

Response Service::get_graph(const std::string& run_id, const std::map<std::string, std::string>& headers) {
    auto dir = store::find_run(data_dir_, run_id);
    auto rec = dir.load();
    if (!rec.complete("graphed")) throw Error(ErrorCode::StageNotReady, "run " + run_id + " has not been graphed");
    Response r;
    r.body = dir.read("graph.json");
    std::string digest = sha256_hex(r.body);
    r.headers["ETag"] = "\"" + digest + "\"";
    r.headers["X-Content-SHA256"] = digest;
    if (header_value(headers, "If-None-Match") == r.headers["ETag"]) {
        r.status = 304;
        r.body.clear();
    }
    return r;
}

Response Service::get_hypotheses(const std::string& run_id) {
    auto d = pipeline::load_run(store::find_run(data_dir_, run_id));
    json list = json::array();
    for (const auto& inst : graph::hypothesis_instances(d.graph)) list.push_back(instance_json(inst, d.verdicts));
    json j;
    j["run_id"] = d.record.run_id;
    j["count"] = list.size();
    j["hypotheses"] = std::move(list);
    j.update(kgca_json(d, run_strict(d.record)));
    return json_response(200, j);
}

Response Service::get_metrics(const std::string& run_id) {
    auto d = pipeline::load_run(store::find_run(data_dir_, run_id));
    return json_response(200, pipeline::metrics_document(d, run_strict(d.record)));
}

Response Service::get_provenance(const std::string& uid, const std::string& run_filter) {
    if (!flatten::parse_uid(uid)) throw Error(ErrorCode::UnknownUid, "not a uid: " + uid);
    for (const auto& [rec, path] : store::list_runs(data_dir_)) {
        if (!run_filter.empty() && rec.run_id != run_filter) continue;
        store::RunDir dir(path);
        if (!dir.exists("unified_records.csv")) continue;
        flatten::RecordIndex index(flatten::parse_unified_csv(dir.read("unified_records.csv")));
        const flatten::FlatRecord* r = index.find(uid);
        if (!r) continue;
        const auto& dups = index.duplicate_uids();
        if (std::find(dups.begin(), dups.end(), uid) != dups.end())
            throw Error(ErrorCode::CustodyBreach, "uid " + uid + " occurs more than once in run " + rec.run_id);
        if (auto reason = evaluate::verify_record(*r, rec.device_id))
            throw Error(ErrorCode::CustodyBreach, "uid " + uid + ": " + *reason);

        json j;
        j["run_id"] = rec.run_id;
        j["uid"] = uid;
        j["record"] = record_json(*r);
        json database = nullptr;
        json source = nullptr;
        if (dir.exists("manifest.json")) {
            auto manifest = nlohmann::json::parse(dir.read("manifest.json"));
            for (const auto& o : manifest.at("databases")) {
                if (o.value("file_path", "") != r->path || o.value("database_name", "") != r->database) continue;
                database = o;
                auto ref = o.get<ingest::DatabaseRef>();
                std::string csv_name = "tables/" + flatten::table_csv_name(ref, r->table);
                source = json{{"csv", csv_name}, {"row", nullptr}};
                if (dir.exists(csv_name)) {
                    auto rows = csv::parse(dir.read(csv_name));
                    for (std::size_t i = 1; i < rows.size(); ++i)
                        if (rows[i].size() > 3 && rows[i][3] == uid) {
                            source["row"] = i;
                            break;
                        }
                }
                break;
            }
        }
        j["database"] = std::move(database);
        j["source"] = std::move(source);
        j["custody"] = "intact";
        return json_response(200, j);
    }
    throw Error(ErrorCode::UnknownUid, "uid " + uid + " is not known to any run");
}

Response Service::post_verdict(const std::string& run_id, std::string_view body) {
    auto dir = store::find_run(data_dir_, run_id);
    nlohmann::json in;
    try {
        in = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidInput, std::string("request body is not JSON: ") + e.what());
    }
    auto field = [&](const char* name, bool required) {
        if (!in.is_object()) throw Error(ErrorCode::InvalidInput, "request body must be a JSON object");
        auto it = in.find(name);
        if (it == in.end() || it->is_null()) {
            if (required) throw Error(ErrorCode::InvalidInput, std::string("missing field ") + name);
            return std::string{};
        }
        if (!it->is_string()) throw Error(ErrorCode::InvalidInput, std::string("field ") + name + " must be a string");
        return it->get<std::string>();
    };
    verdicts::VerdictRecord sub;
    sub.edge_id = field("edge_id", true);
    sub.uid = field("uid", true);
    std::string verdict = field("verdict", true);
    sub.reviewer = field("reviewer", false);
    sub.note = field("note", false);
    auto parsed = verdicts::parse_verdict(verdict);
    if (!parsed) throw Error(ErrorCode::InvalidInput, "unknown verdict: " + verdict);
    sub.verdict = *parsed;

    std::lock_guard lock(run_mutex(dir.root().string()));
    auto d = pipeline::load_run(dir);
    auto outcome = d.verdicts.apply(sub, d.graph, utc_now_iso8601());
    if (outcome.changed) {
        dir.write("verdicts.json", d.verdicts.to_json().dump(2) + "\n");
        append_line(dir.file("audit.log").string(), outcome.audit->dump());
    }

    json j;
    for (const auto& inst : graph::hypothesis_instances(d.graph))
        if (inst.edge_id == sub.edge_id && inst.uid == sub.uid) j["instance"] = instance_json(inst, d.verdicts);
    j["changed"] = outcome.changed;
    j.update(kgca_json(d, run_strict(d.record)));
    return json_response(200, j);
}

// --- HTTP --------------------------------------------------------------------

struct HttpServer::Impl {
    Service service;
    httplib::Server server;
    explicit Impl(fs::path data_dir) : service(std::move(data_dir)) {}
};

HttpServer::HttpServer(fs::path data_dir, fs::path ui_dir) : impl_(std::make_unique<Impl>(std::move(data_dir))) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> headers(req.headers.begin(), req.headers.end());
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) query.emplace(k, v);
        Response r = impl_->service.handle(req.method, req.path, req.body, headers, query);
        res.status = r.status;
        for (const auto& [k, v] : r.headers) res.set_header(k, v);
        if (r.status != 304) res.set_content(r.body, r.content_type);
        spdlog::info("{} {} -> {}", req.method, req.path, r.status);
    };
    const std::string pattern = std::string(kApiPrefix) + "/.*";
    impl_->server.Get(pattern, handler);
    impl_->server.Post(pattern, handler);
    if (!ui_dir.empty() && !impl_->server.set_mount_point("/", ui_dir.string()))
        throw Error(ErrorCode::InvalidConfig, "ui directory not found: " + ui_dir.string());
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port))
        throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

void serve(const fs::path& data_dir, const std::string& host, int port, const fs::path& ui_dir) {
    HttpServer server(data_dir, ui_dir);
    int bound = server.bind(host, port);
    spdlog::info("serving {} on http://{}:{}{}", data_dir.string(), host, bound, kApiPrefix);
    server.listen();
}

}  // namespace dfkg::service
