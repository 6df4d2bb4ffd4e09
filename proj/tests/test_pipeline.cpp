#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

#include "dfkg/error.hpp"
#include "dfkg/fixtures.hpp"
#include "dfkg/pipeline.hpp"
#include "dfkg/service.hpp"
#include "dfkg/util.hpp"
#include "support.hpp"

using namespace dfkg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

pipeline::RunConfig planted_config(const testing::TempDir& tmp, const std::string& run = "run") {
    if (!fs::exists(tmp / "image")) {
        auto gt = fixtures::build_planted_image(tmp / "image", std::string(fixtures::kDefaultDeviceId));
        write_file_atomic((tmp / "gt.json").string(), gt.dump(2));
    }
    pipeline::RunConfig cfg;
    cfg.root = tmp / "image";
    cfg.device_id = std::string(fixtures::kDefaultDeviceId);
    cfg.out = tmp / run;
    cfg.ground_truth = tmp / "gt.json";
    return cfg;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("planted image end to end") {
        testing::TempDir tmp;
        auto cfg = planted_config(tmp);
        auto rec = pipeline::run_pipeline(cfg);
        CHECK(rec.last_stage() == "evaluated");
        store::RunDir dir(cfg.out);
        for (auto name : {"manifest.json", "unified_records.csv", "refined_artifacts.jsonl", "evidence_records.jsonl",
                          "graph.json", "metrics_report.json", "run.json"})
            CHECK(dir.exists(name));
        auto m = json::parse(dir.read("metrics_report.json"));
        for (auto name : {"EEA", "FAP", "FAR", "FAF1", "CCA", "CCS", "AIS", "ECA"}) CHECK(m["metrics"][name] == 100.0);
        CHECK(m["metrics"]["KGCA"] == "undefined");
        CHECK(m["tally"]["fn"] == 0);

        auto emails = dir.read("artifacts/Email.csv");
        CHECK(emails.find("heisenbergercarro@gmail.com") != std::string::npos);
        CHECK(dir.read("artifacts/Timestamp.csv").find("03 April 2021 15:24:18") != std::string::npos);
        CHECK(dir.read("artifacts/Phone_number.csv").find("+16506808040") != std::string::npos);
        CHECK(dir.read("artifacts/Mac_addr.csv").find("34:C7:31:F8:61:3B") != std::string::npos);
        CHECK(dir.read("artifacts/Google_Search.csv").find("hidden photos apps") != std::string::npos);
        CHECK(dir.read("artifacts/Name.csv").find("Marsha Mellos") != std::string::npos);
        CHECK(dir.read("artifacts/Appname.csv").find("Instagram") != std::string::npos);
        // Excluded system data never reaches the unified set.
        CHECK(dir.read("unified_records.csv").find("AA:BB:CC:11:22:33") == std::string::npos);
    }

    TEST_CASE("resume, rerun on change and determinism") {
        testing::TempDir tmp;
        auto cfg = planted_config(tmp);
        pipeline::PipelineOptions upto;
        upto.stop_after = "flattened";
        auto first = pipeline::run_pipeline(cfg, upto);
        CHECK(first.last_stage() == "flattened");
        auto stamp = first.stages.at("ingested").completed_at;
        auto full = pipeline::run_pipeline(cfg);
        CHECK(full.stages.at("ingested").completed_at == stamp);
        CHECK(full.last_stage() == "evaluated");

        store::RunDir dir(cfg.out);
        auto graph_bytes = dir.read("graph.json");
        auto again = pipeline::run_pipeline(cfg);
        CHECK(again.stages.at("graphed").completed_at == full.stages.at("graphed").completed_at);

        auto changed = cfg;
        changed.min_confidence = 10;
        auto rerun = pipeline::run_pipeline(changed);
        CHECK(rerun.config_hash != full.config_hash);
        CHECK(rerun.last_stage() == "evaluated");

        auto cfg2 = planted_config(tmp, "run2");
        pipeline::run_pipeline(cfg2);
        store::RunDir dir2(cfg2.out);
        CHECK(dir2.read("graph.json") == graph_bytes);
        CHECK(dir2.read("unified_records.csv") == dir.read("unified_records.csv"));
        auto a = json::parse(dir2.read("metrics_report.json"));
        auto b = json::parse(pipeline::metrics_document(pipeline::load_run(dir2), false).dump());
        CHECK(a == b);
        CHECK(pipeline::config_hash(cfg, "x") == pipeline::config_hash(cfg2, "x"));
        CHECK(pipeline::config_hash(cfg, "x") != pipeline::config_hash(cfg, "y"));
    }

    TEST_CASE("a path-prefix denylist removes exactly the settings records") {
        testing::TempDir tmp;
        auto cfg = planted_config(tmp);
        cfg.sample_interval = 1;
        pipeline::PipelineOptions upto;
        upto.stop_after = "flattened";
        auto count = [&](std::vector<std::string> deny, const std::string& run) {
            auto c = cfg;
            c.denylist = std::move(deny);
            c.out = tmp / run;
            pipeline::run_pipeline(c, upto);
            std::size_t all = 0, settings = 0;
            for (const auto& r : flatten::parse_unified_csv(store::RunDir(c.out).read("unified_records.csv"))) {
                ++all;
                settings += r.path.find("com.android.providers.settings") != std::string::npos;
            }
            return std::make_pair(all, settings);
        };
        auto open = count({}, "open");
        auto denied = count({"/data/data/com.android.providers.settings"}, "denied");
        CHECK(open.second == 2);
        CHECK(denied.second == 0);
        CHECK(open.first - denied.first == open.second);
    }

    TEST_CASE("database edited between stages is a custody breach") {
        testing::TempDir tmp;
        auto cfg = planted_config(tmp);
        pipeline::PipelineOptions upto;
        upto.stop_after = "ingested";
        pipeline::run_pipeline(cfg, upto);
        auto manifest = json::parse(store::RunDir(cfg.out).read("manifest.json"));
        fs::path victim = manifest["databases"][0]["location"].get<std::string>();
        {
            std::ofstream f(victim, std::ios::binary | std::ios::app);
            f << "x";
        }
        CHECK(code_of([&] { pipeline::run_pipeline(cfg); }) == ErrorCode::CustodyBreach);
    }

    TEST_CASE("errors") {
        testing::TempDir tmp;
        auto cfg = planted_config(tmp);
        pipeline::PipelineOptions upto;
        upto.stop_after = "refined";
        pipeline::run_pipeline(cfg, upto);
        CHECK(code_of([&] { pipeline::load_run(store::RunDir(cfg.out)); }) == ErrorCode::StageNotReady);
        CHECK(code_of([&] { store::RunDir(tmp / "nothing").load(); }) == ErrorCode::RunNotFound);

        auto bad = cfg;
        bad.min_confidence = 11;
        CHECK(code_of([&] { pipeline::run_pipeline(bad); }) == ErrorCode::InvalidConfig);
        bad = cfg;
        bad.sample_interval = 0;
        CHECK(code_of([&] { pipeline::run_pipeline(bad); }) == ErrorCode::InvalidConfig);
        bad = cfg;
        bad.root = tmp / "missing";
        bad.out = tmp / "other";
        CHECK(code_of([&] { pipeline::run_pipeline(bad); }) == ErrorCode::RootNotFound);
        {
            store::RunLock held(cfg.out);
            CHECK(code_of([&] { pipeline::run_pipeline(cfg); }) == ErrorCode::RunLocked);
        }
        CHECK(pipeline::run_pipeline(cfg).last_stage() == "evaluated");
    }
}

TEST_SUITE("service") {
    TEST_CASE("review run over the API") {
        testing::TempDir tmp;
        auto rec = fixtures::build_review_run(tmp / "t2", std::string(fixtures::kDefaultDeviceId));
        service::Service svc(tmp.path());
        const std::string base = "/api/v1/runs/" + rec.run_id;

        auto runs = svc.handle("GET", "/api/v1/runs", "");
        REQUIRE(runs.status == 200);
        CHECK(json::parse(runs.body)["runs"].size() == 1);
        CHECK(svc.handle("GET", base, "").status == 200);
        CHECK(svc.handle("GET", "/api/v1/runs/run-nope", "").status == 404);
        CHECK(json::parse(svc.handle("GET", "/api/v1/runs/run-nope", "").body)["error"] == "RunNotFound");
        CHECK(svc.handle("GET", "/api/v1/elsewhere", "").status == 404);

        auto g = svc.handle("GET", base + "/graph", "");
        REQUIRE(g.status == 200);
        CHECK(g.body == store::RunDir(tmp / "t2").read("graph.json"));
        CHECK(g.headers.at("ETag") == service::etag_for(g.body));
        CHECK(g.headers.at("X-Content-SHA256") == sha256_hex(g.body));
        CHECK(svc.handle("GET", base + "/graph", "", {{"if-none-match", g.headers.at("ETag")}}).status == 304);

        auto hyp = json::parse(svc.handle("GET", base + "/hypotheses", "").body);
        CHECK(hyp["count"] == 72);
        std::set<std::string> seen;
        for (const auto& h : hyp["hypotheses"]) {
            CHECK(h["verdict"] == "pending");
            CHECK(seen.insert(h["edge_id"].get<std::string>() + " " + h["uid"].get<std::string>()).second);
        }

        auto graph = graph::graph_from_json(json::parse(g.body));
        auto rejected = fixtures::review_rejected_instances(graph);
        REQUIRE(rejected.size() == 4);
        json last;
        for (const auto& inst : graph::hypothesis_instances(graph)) {
            bool bad = false;
            for (const auto& r : rejected) bad |= r.edge_id == inst.edge_id && r.uid == inst.uid;
            json body = {{"edge_id", inst.edge_id}, {"uid", inst.uid}, {"verdict", bad ? "invalid" : "valid"},
                         {"reviewer", "examiner"}, {"note", ""}};
            auto resp = svc.handle("POST", base + "/verdicts", body.dump());
            REQUIRE(resp.status == 200);
            last = json::parse(resp.body);
            CHECK(last["changed"] == true);
        }
        CHECK(last["KGCA"] == 94.44);
        auto metrics = json::parse(svc.handle("GET", base + "/metrics", "").body);
        CHECK(metrics["metrics"]["KGCA"] == 94.44);
        CHECK(metrics["connections"]["invalid"] == 4);
        CHECK(metrics["connections"]["valid"] == 68);

        json again = {{"edge_id", rejected[0].edge_id}, {"uid", rejected[0].uid}, {"verdict", "invalid"},
                      {"reviewer", "examiner"}};
        auto resp = svc.handle("POST", base + "/verdicts", again.dump());
        CHECK(resp.status == 200);
        CHECK(json::parse(resp.body)["changed"] == false);
        again["verdict"] = "valid";
        CHECK(svc.handle("POST", base + "/verdicts", again.dump()).status == 409);
        again["verdict"] = "pending";
        CHECK(svc.handle("POST", base + "/verdicts", again.dump()).status == 409);
        again["edge_id"] = "e-missing";
        again["verdict"] = "valid";
        CHECK(svc.handle("POST", base + "/verdicts", again.dump()).status == 404);
        CHECK(svc.handle("POST", base + "/verdicts", "{not json").status == 400);

        auto audit = store::RunDir(tmp / "t2").read("audit.log");
        CHECK(std::count(audit.begin(), audit.end(), '\n') == 72);

        const auto& uid = rejected[0].uid;
        auto prov = svc.handle("GET", "/api/v1/provenance/" + uid, "");
        REQUIRE(prov.status == 200);
        auto p = json::parse(prov.body);
        CHECK(p["custody"] == "intact");
        CHECK(p["record"]["uid"] == uid);
        CHECK(svc.handle("GET", "/api/v1/provenance/zz", "").status == 404);
        CHECK(svc.handle("GET", "/api/v1/provenance/00000000_t_1", "").status == 404);
    }

    TEST_CASE("graph of an ungraphed run is not ready") {
        testing::TempDir tmp;
        auto cfg = planted_config(tmp);
        pipeline::PipelineOptions upto;
        upto.stop_after = "flattened";
        auto rec = pipeline::run_pipeline(cfg, upto);
        service::Service svc(tmp / "run");
        auto r = svc.handle("GET", "/api/v1/runs/" + rec.run_id + "/graph", "");
        CHECK(r.status == 409);
        CHECK(json::parse(r.body)["error"] == "StageNotReady");
    }
}
