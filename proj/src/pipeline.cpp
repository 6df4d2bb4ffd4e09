#include "dfkg/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include <spdlog/spdlog.h>

#include "dfkg/error.hpp"
#include "dfkg/timezone.hpp"
#include "dfkg/util.hpp"

namespace dfkg::pipeline {

namespace fs = std::filesystem;

namespace {

nlohmann::json parse_json(const std::string& text, const std::string& what) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidInput, what + " is not valid JSON");
    return j;
}

std::string jsonl(const std::vector<nlohmann::ordered_json>& lines) {
    std::string out;
    for (const auto& l : lines) out += l.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
    return out;
}

struct Context {
    const RunConfig& cfg;
    const store::RunDir& dir;
    store::RunRecord& rec;
    const std::string& hash;
    const std::string& ground_truth;
};

void stage_ingest(Context& c) {
    auto scan = ingest::scan_image(c.cfg.root, c.cfg.device_id);
    nlohmann::ordered_json dbs = nlohmann::ordered_json::array();
    std::string identity;
    for (const auto& ref : scan.databases) {
        nlohmann::json base = ref;
        nlohmann::ordered_json o;
        for (const char* k : {"device_id", "file_path", "database_name", "byte_size", "signature", "location"})
            o[k] = base[k];
        std::string digest = sha256_hex(read_file(ref.location.string()));
        o["sha256"] = digest;
        o["mtime"] = evidence_snapshot_time({ref});
        identity += ref.file_path + "\t" + ref.database_name + "\t" + digest + "\n";
        dbs.push_back(std::move(o));
    }
    nlohmann::ordered_json manifest;
    manifest["device_id"] = c.cfg.device_id;
    manifest["snapshot_time"] = evidence_snapshot_time(scan.databases);
    manifest["databases"] = std::move(dbs);
    manifest["warnings"] = scan.warnings;
    c.dir.write("manifest.json", manifest.dump(2) + "\n");
    for (const auto& w : scan.warnings) spdlog::warn("scan: {}", w);

    c.rec.run_id = "run-" + sha256_hex(c.hash + "\n" + identity).substr(0, 12);
    c.rec.counts["databases"] = scan.databases.size();
}

std::vector<ingest::DatabaseRef> manifest_refs(const nlohmann::json& manifest) {
    std::vector<ingest::DatabaseRef> refs;
    for (const auto& o : manifest.at("databases")) refs.push_back(o.get<ingest::DatabaseRef>());
    return refs;
}

void stage_flatten(Context& c) {
    auto manifest = parse_json(c.dir.read("manifest.json"), "manifest.json");
    std::vector<nlohmann::ordered_json> warnings;
    std::vector<flatten::FlatRecord> all;
    std::uint64_t tables = 0;
    fs::create_directories(c.dir.file("tables"));
    for (const auto& o : manifest.at("databases")) {
        auto ref = o.get<ingest::DatabaseRef>();
        std::string expected = o.value("sha256", std::string{});
        if (!expected.empty() && sha256_hex(read_file(ref.location.string())) != expected)
            throw Error(ErrorCode::CustodyBreach,
                        "database changed since ingest: " + ref.file_path + ref.database_name);
        std::vector<std::string> names;
        try {
            names = ingest::enumerate_tables(ref);
        } catch (const Error& e) {
            warnings.push_back({{"database", ref.file_path + ref.database_name}, {"warning", e.what()}});
            spdlog::warn("flatten: skipping {}{}: {}", ref.file_path, ref.database_name, e.what());
            continue;
        }
        for (const auto& table : names) {
            std::vector<ingest::RawRow> rows;
            auto stats = ingest::read_rows(ref, table, [&](ingest::RawRow&& r) { rows.push_back(std::move(r)); });
            for (const auto& w : stats.warnings)
                warnings.push_back({{"database", ref.file_path + ref.database_name}, {"table", table}, {"warning", w}});
            auto records = flatten::flatten_table(ref, table, rows);
            std::vector<std::string> columns;
            if (!rows.empty())
                for (const auto& cell : rows.front().cells) columns.push_back(cell.first);
            c.dir.write("tables/" + flatten::table_csv_name(ref, table), flatten::table_csv(columns, records));
            all.insert(all.end(), std::make_move_iterator(records.begin()), std::make_move_iterator(records.end()));
            ++tables;
        }
    }
    flatten::RecordIndex all_index(all);
    if (!all_index.duplicate_uids().empty())
        throw Error(ErrorCode::CustodyBreach, "full uid collision: " + all_index.duplicate_uids().front());
    auto unified = flatten::unify(all, c.cfg.sample_interval, c.cfg.effective_denylist());
    c.dir.write("unified_records.csv", flatten::unified_csv(unified));
    c.dir.write("flatten_warnings.jsonl", jsonl(warnings));
    c.rec.counts["tables"] = tables;
    c.rec.counts["rows"] = all.size();
    c.rec.counts["unified_records"] = unified.size();
}

void stage_refine(Context& c) {
    auto records = flatten::parse_unified_csv(c.dir.read("unified_records.csv"));
    std::unique_ptr<refine::RefinementEngine> engine;
    if (c.cfg.engine == "remote") {
        refine::RemoteOptions ro;
        ro.endpoint = c.cfg.endpoint;
        ro.model = c.cfg.model;
        ro.audit_path = c.dir.file("refine_audit.jsonl").string();
        engine = std::make_unique<refine::RemoteEngine>(ro);
    } else {
        engine = std::make_unique<refine::MockEngine>(refine::MockOptions{c.cfg.zone});
    }
    auto outcome = refine::refine_records(*engine, records, {c.cfg.batch_size, c.cfg.max_in_flight});
    std::vector<nlohmann::ordered_json> warnings;
    for (const auto& w : outcome.warnings) warnings.push_back({{"warning", w}});
    for (const auto& uids : outcome.unrefined_batches) warnings.push_back({{"unrefined_batch", uids}});
    if (!outcome.unrefined_batches.empty())
        spdlog::warn("refine: {} batch(es) left unrefined", outcome.unrefined_batches.size());

    auto retained = refine::apply_threshold(outcome.artifacts, c.cfg.min_confidence);
    c.dir.write("refined_artifacts.jsonl", refine::artifacts_jsonl(outcome.artifacts));
    c.dir.write("refine_warnings.jsonl", jsonl(warnings));
    for (const auto& [name, content] : refine::artifact_csvs(retained)) c.dir.write("artifacts/" + name, content);
    c.rec.engine = engine->id();
    c.rec.counts["artifacts"] = outcome.artifacts.size();
    c.rec.counts["artifacts_retained"] = retained.size();
    c.rec.counts["unrefined_batches"] = outcome.unrefined_batches.size();
}

void stage_consolidate(Context& c) {
    flatten::RecordIndex index(flatten::parse_unified_csv(c.dir.read("unified_records.csv")));
    auto artifacts = refine::parse_artifacts_jsonl(c.dir.read("refined_artifacts.jsonl"));
    auto evidence = consolidate::consolidate(artifacts, index);
    c.dir.write("evidence_records.jsonl", consolidate::evidence_jsonl(evidence));
    c.rec.counts["evidence_records"] = evidence.size();
}

void stage_graph(Context& c) {
    auto evidence = consolidate::parse_evidence_jsonl(c.dir.read("evidence_records.jsonl"));
    auto g = graph::build_graph(evidence, c.cfg.min_confidence, c.cfg.device_id);
    c.dir.write("graph.json", graph::graph_json(g));
    c.dir.write("graph.dot", graph::graph_dot(g));
    c.rec.counts["nodes"] = g.nodes.size();
    c.rec.counts["edges"] = g.edges.size();
    c.rec.counts["hypotheses"] = graph::hypothesis_instances(g).size();
}

void stage_evaluate(Context& c) {
    if (!c.ground_truth.empty()) {
        parse_json(c.ground_truth, "ground truth");
        c.dir.write("ground_truth.json", c.ground_truth);
    } else if (c.dir.exists("ground_truth.json")) {
        fs::remove(c.dir.file("ground_truth.json"));
    }
    if (!c.dir.exists("verdicts.json")) c.dir.write("verdicts.json", verdicts::VerdictStore{}.to_json().dump(2) + "\n");
    if (!c.dir.exists("audit.log")) c.dir.write("audit.log", "");
    c.dir.save(c.rec);
    auto data = load_run(c.dir);
    data.record = c.rec;
    auto doc = metrics_document(data, c.cfg.strict);
    c.dir.write("metrics_report.json", doc.dump(2) + "\n");
}

using StageFn = void (*)(Context&);
constexpr StageFn kStageFns[] = {stage_ingest, stage_flatten, stage_refine, stage_consolidate, stage_graph, stage_evaluate};

}  // namespace

void RunConfig::validate() const {
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "an output directory is required");
    if (device_id.empty()) throw Error(ErrorCode::InvalidConfig, "device_id must not be empty");
    if (sample_interval < 1) throw Error(ErrorCode::InvalidConfig, "sample_interval must be at least 1");
    if (min_confidence < 1 || min_confidence > 10)
        throw Error(ErrorCode::InvalidConfig, "min_confidence must be within 1..10");
    if (engine != "mock" && engine != "remote")
        throw Error(ErrorCode::InvalidConfig, "engine must be 'mock' or 'remote'");
    if (engine == "remote" && endpoint.empty())
        throw Error(ErrorCode::InvalidConfig, "the remote engine needs an endpoint");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be at least 1");
    tz::TimeZone::load(zone);
}

const std::vector<std::string>& RunConfig::effective_denylist() const {
    return denylist ? *denylist : flatten::default_denylist();
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["root"] = root.string();
    j["device_id"] = device_id;
    j["sample_interval"] = sample_interval;
    j["min_confidence"] = min_confidence;
    j["engine"] = engine;
    j["endpoint"] = endpoint;
    j["model"] = model;
    j["zone"] = zone;
    j["denylist"] = effective_denylist();
    j["out"] = out.string();
    j["ground_truth"] = ground_truth.string();
    j["strict"] = strict;
    j["batch_size"] = batch_size;
    j["max_in_flight"] = max_in_flight;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.root = j.value("root", std::string{});
        c.device_id = j.value("device_id", std::string{});
        c.sample_interval = j.value("sample_interval", std::uint64_t{6});
        c.min_confidence = j.value("min_confidence", 5);
        c.engine = j.value("engine", std::string("mock"));
        c.endpoint = j.value("endpoint", std::string{});
        c.model = j.value("model", std::string("gpt-4"));
        c.zone = j.value("zone", std::string("America/New_York"));
        if (j.contains("denylist")) c.denylist = j["denylist"].get<std::vector<std::string>>();
        c.out = j.value("out", std::string{});
        c.ground_truth = j.value("ground_truth", std::string{});
        c.strict = j.value("strict", false);
        c.batch_size = j.value("batch_size", std::size_t{40});
        c.max_in_flight = j.value("max_in_flight", std::size_t{4});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("malformed configuration: ") + e.what());
    }
    return c;
}

std::string config_hash(const RunConfig& cfg, std::string_view ground_truth_bytes) {
    auto j = cfg.to_json();
    for (const char* k : {"root", "out", "ground_truth", "max_in_flight"}) j.erase(k);
    return sha256_hex(j.dump() + "\n" + sha256_hex(ground_truth_bytes));
}

std::string evidence_snapshot_time(const std::vector<ingest::DatabaseRef>& databases) {
    std::int64_t latest = 0;
    for (const auto& ref : databases) {
        std::error_code ec;
        auto t = fs::last_write_time(ref.location, ec);
        if (ec) continue;
        auto sys = std::chrono::file_clock::to_sys(t);
        latest = std::max<std::int64_t>(
            latest, std::chrono::duration_cast<std::chrono::seconds>(sys.time_since_epoch()).count());
    }
    return format_iso8601_utc(latest);
}

store::RunRecord run_pipeline(const RunConfig& cfg, const PipelineOptions& options) {
    cfg.validate();
    std::string gt = options.ground_truth_bytes;
    if (gt.empty() && !cfg.ground_truth.empty()) gt = read_file(cfg.ground_truth.string());
    const std::string hash = config_hash(cfg, gt);
    const std::size_t stop = options.stop_after ? store::stage_index(*options.stop_after) : store::kStages.size() - 1;

    store::RunLock lock(cfg.out);
    store::RunDir dir(cfg.out);
    store::RunRecord rec;
    if (dir.has_record()) {
        rec = dir.load();
        if (rec.config_hash != hash) {
            spdlog::info("configuration changed; rerunning every stage");
            rec.stages.clear();
            rec.counts.clear();
        }
    }
    if (rec.created_at.empty()) rec.created_at = utc_now_iso8601();
    rec.device_id = cfg.device_id;
    rec.config = cfg.to_json();
    rec.config_hash = hash;
    if (rec.engine.empty()) rec.engine = cfg.engine == "remote" ? "remote:" + cfg.model : "mock-rules-v1";

    Context ctx{cfg, dir, rec, hash, gt};
    bool invalidated = false;
    for (std::size_t i = 0; i <= stop; ++i) {
        const std::string name(store::kStages[i]);
        auto it = rec.stages.find(name);
        if (!invalidated && it != rec.stages.end() && it->second.status == "complete" && it->second.config_hash == hash) {
            spdlog::info("{}: already complete, skipping", name);
            continue;
        }
        if (!invalidated)
            for (std::size_t k = i; k < store::kStages.size(); ++k) rec.stages.erase(std::string(store::kStages[k]));
        invalidated = true;
        if (i == 0 && cfg.root.empty()) throw Error(ErrorCode::InvalidConfig, "stage ingested: an image root is required");
        spdlog::info("{}: running", name);
        try {
            kStageFns[i](ctx);
        } catch (const Error& e) {
            throw Error(e.code(), "stage " + name + ": " + e.detail());
        }
        rec.stages[name] = {"complete", hash, utc_now_iso8601()};
        dir.save(rec);
    }
    dir.save(rec);
    return rec;
}

RunData load_run(const store::RunDir& dir) {
    RunData d;
    d.record = dir.load();
    if (!d.record.complete("graphed"))
        throw Error(ErrorCode::StageNotReady, "run " + d.record.run_id + " has not been graphed");
    auto manifest = parse_json(dir.read("manifest.json"), "manifest.json");
    d.databases = manifest_refs(manifest);
    d.snapshot_time = manifest.value("snapshot_time", std::string{});
    d.index = flatten::RecordIndex(flatten::parse_unified_csv(dir.read("unified_records.csv")));
    d.artifacts = refine::parse_artifacts_jsonl(dir.read("refined_artifacts.jsonl"));
    d.evidence = consolidate::parse_evidence_jsonl(dir.read("evidence_records.jsonl"));
    d.graph = graph::graph_from_json(parse_json(dir.read("graph.json"), "graph.json"));
    if (dir.exists("ground_truth.json"))
        d.ground_truth = evaluate::ground_truth_from_json(parse_json(dir.read("ground_truth.json"), "ground_truth.json"));
    if (dir.exists("verdicts.json"))
        d.verdicts = verdicts::VerdictStore::from_json(parse_json(dir.read("verdicts.json"), "verdicts.json"));
    return d;
}

nlohmann::ordered_json metrics_document(const RunData& d, bool strict) {
    evaluate::MatchInput in;
    in.artifacts = &d.artifacts;
    in.records = &d.evidence;
    in.graph = &d.graph;
    in.index = &d.index;
    in.verdicts = &d.verdicts;
    in.device_id = d.record.device_id;
    in.strict = strict;
    const evaluate::GroundTruth* gt = d.ground_truth ? &*d.ground_truth : nullptr;
    auto match = evaluate::match_ground_truth(in, gt);
    auto report = evaluate::compute_metrics(match.tally);
    auto conn = evaluate::count_connections(d.graph, &d.verdicts, gt, strict);

    nlohmann::ordered_json j;
    j["run_id"] = d.record.run_id;
    j["device_id"] = d.record.device_id;
    j["engine"] = d.record.engine;
    j["min_confidence"] = d.graph.min_confidence;
    j["strict"] = strict;
    j["timestamp"] = d.snapshot_time;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    for (auto name : evaluate::kMetricNames) metrics[std::string(name)] = evaluate::metric_json(report.get(name));
    j["metrics"] = std::move(metrics);
    j["tally"] = evaluate::to_json(match.tally);
    j["connections"] = {{"instances", conn.valid + conn.invalid + conn.pending},
                        {"valid", conn.valid},
                        {"invalid", conn.invalid},
                        {"pending", conn.pending}};
    auto breaches = nlohmann::ordered_json::array();
    for (const auto& b : match.custody.breaches) breaches.push_back({{"uid", b.uid}, {"reason", b.reason}});
    j["custody_breaches"] = std::move(breaches);
    nlohmann::ordered_json gtj;
    gtj["present"] = gt != nullptr;
    auto issues = nlohmann::ordered_json::array();
    if (gt)
        for (const auto& i : gt->issues) issues.push_back({{"item", i.item}, {"reason", i.reason}});
    gtj["issues"] = std::move(issues);
    j["ground_truth"] = std::move(gtj);
    return j;
}

}  // namespace dfkg::pipeline
