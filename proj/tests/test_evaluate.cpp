#include <doctest.h>

#include <random>
#include <set>

#include "dfkg/consolidate.hpp"
#include "dfkg/error.hpp"
#include "dfkg/evaluate.hpp"
#include "dfkg/graph.hpp"
#include "dfkg/normalize.hpp"
#include "oracles.hpp"

using namespace dfkg;
using namespace dfkg::evaluate;
using refine::RefinedArtifact;

namespace {

// Half-up percentage by schoolbook long division, as a "NN.NN" string.
std::string long_division_percent(std::uint64_t num, std::uint64_t den) {
    std::uint64_t whole = num * 100 / den;
    std::uint64_t rem = num * 100 % den;
    int digits[3];
    for (int& d : digits) {
        rem *= 10;
        d = static_cast<int>(rem / den);
        rem %= den;
    }
    std::uint64_t hundredths = whole * 100 + digits[0] * 10 + digits[1];
    if (digits[2] >= 5) ++hundredths;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%llu.%02llu", static_cast<unsigned long long>(hundredths / 100),
                  static_cast<unsigned long long>(hundredths % 100));
    return buf;
}

Tally reference_tally() {
    Tally t;
    t.true_extractions = 40;
    t.total_potential_extractions = 42;
    t.correctly_consolidated = 24;
    t.total_consolidated = 26;
    t.correct_connections = 68;
    t.total_connections = 72;
    t.tp = 40;
    t.fp = 2;
    t.fn = 0;
    t.artifacts_with_intact_custody = 40;
    t.total_artifacts = 40;
    t.artifacts_matching_context = 40;
    t.exact_value_matches = 40;
    return t;
}

}  // namespace

TEST_SUITE("evaluate") {
    TEST_CASE("reference tally reproduces the expected metrics") {
        auto r = compute_metrics(reference_tally());
        CHECK(r.get("EEA")->str() == "95.24");
        CHECK(r.get("ECA")->str() == "92.31");
        CHECK(r.get("KGCA")->str() == "94.44");
        CHECK(r.get("FAP")->str() == "95.24");
        CHECK(r.get("FAR")->str() == "100.00");
        CHECK(r.get("FAF1")->str() == "97.56");
        CHECK(r.get("AIS")->str() == "95.24");
        CHECK(r.get("CCA")->str() == "100.00");
        CHECK(r.get("CCS")->str() == "100.00");
        CHECK(compute_metrics(reference_tally()).metrics == r.metrics);
        CHECK(tally_from_json(nlohmann::json::parse(to_json(reference_tally()).dump())) == reference_tally());
    }

    TEST_CASE("percent is half-up against long division") {
        CHECK(percent(1, 3)->str() == "33.33");
        CHECK(percent(2, 3)->str() == "66.67");
        CHECK(percent(1, 8)->str() == "12.50");
        CHECK(percent(1, 80000)->str() == "0.00");
        CHECK(percent(1, 40000)->str() == "0.00");  // 0.0025 -> 0.00
        CHECK(percent(1, 20000)->str() == "0.01");  // 0.005 -> 0.01
        CHECK_FALSE(percent(0, 0));
        std::mt19937_64 rng(3);
        for (int i = 0; i < 20000; ++i) {
            std::uint64_t den = 1 + rng() % 100000;
            std::uint64_t num = rng() % (den + 1);
            CHECK(percent(num, den)->str() == long_division_percent(num, den));
        }
    }

    TEST_CASE("empty denominators are undefined, never 0 or 100") {
        auto r = compute_metrics(Tally{});
        for (auto name : kMetricNames) CHECK_FALSE(r.get(name));
        CHECK(metric_json(std::nullopt) == "undefined");
        Tally t;
        t.fp = 3;
        r = compute_metrics(t);
        CHECK(r.get("FAP")->str() == "0.00");
        CHECK_FALSE(r.get("FAR"));
        CHECK_FALSE(r.get("FAF1"));
        CHECK_FALSE(r.get("CCS"));
    }

    TEST_CASE("bounds and harmonic mean properties") {
        std::mt19937_64 rng(11);
        for (int i = 0; i < 5000; ++i) {
            Tally t;
            auto pair = [&](std::uint64_t& num, std::uint64_t& den) {
                den = rng() % 60;
                num = den ? rng() % (den + 1) : 0;
            };
            pair(t.true_extractions, t.total_potential_extractions);
            pair(t.correctly_consolidated, t.total_consolidated);
            pair(t.correct_connections, t.total_connections);
            pair(t.artifacts_with_intact_custody, t.total_artifacts);
            t.exact_value_matches = t.total_potential_extractions ? rng() % (t.total_potential_extractions + 1) : 0;
            t.tp = rng() % 40;
            t.fp = rng() % 40;
            t.fn = rng() % 40;
            t.artifacts_matching_context = t.tp ? rng() % (t.tp + 1) : 0;
            auto r = compute_metrics(t);
            for (const auto& [name, p] : r.metrics)
                if (p) {
                    CHECK(p->hundredths >= 0);
                    CHECK(p->hundredths <= 10000);
                }
            CHECK(compute_metrics(t).metrics == r.metrics);
            if (t.tp == 0) continue;
            // Exact rationals: FAP = tp/(tp+fp), FAR = tp/(tp+fn).
            double fap = double(t.tp) / double(t.tp + t.fp), far = double(t.tp) / double(t.tp + t.fn);
            double f1 = 2 * fap * far / (fap + far);
            CHECK(std::abs(r.get("FAF1")->value() - f1 * 100) <= 0.005 + 1e-9);
            CHECK(r.get("FAF1")->value() <= (r.get("FAP")->value() + r.get("FAR")->value()) / 2 + 0.01);
            if (t.fp == t.fn) CHECK(r.get("FAF1") == r.get("FAP"));
            else CHECK(f1 < (fap + far) / 2);
        }
    }

    TEST_CASE("matcher counts a planted manifest") {
        flatten::FlatRecord rec{"core.db", "UserStore", "/p/", "", 3, {}};
        rec.uid = flatten::make_uid({"dev", rec.path, rec.database, rec.table, rec.lid});
        flatten::RecordIndex index({rec});
        std::vector<RefinedArtifact> arts = {{rec.uid, EntityType::Email, "heisenbergercarro@gmail.com", 9, "e"},
                                             {rec.uid, EntityType::AppName, "Snapchat", 9, "e"},
                                             {rec.uid, EntityType::AppName, "Twitter", 9, "e"}};
        auto gt = ground_truth_from_json(nlohmann::json::parse(R"({"artifacts":[
            {"entity_type":"Email","value":"HEISENBERGERCARRO@gmail.com"},
            {"entity_type":"App Name","value":"Snapchat"},
            {"entity_type":"Phone Number","value":"+16506808040"}]})"));
        auto records = consolidate::consolidate(arts, index);
        auto g = graph::build_graph(records, 5, "dev");
        MatchInput in{&arts, &records, &g, &index, nullptr, "dev", false};
        auto t = match_ground_truth(in, &gt).tally;
        CHECK(t.tp == 2);
        CHECK(t.fp == 1);
        CHECK(t.fn == 1);
        CHECK(t.artifacts_with_intact_custody == 3);

        GroundTruth empty;
        std::vector<RefinedArtifact> none;
        std::vector<consolidate::EvidenceRecord> no_records;
        graph::ForensicGraph no_graph;
        flatten::RecordIndex no_index;
        MatchInput zero{&none, &no_records, &no_graph, &no_index, nullptr, "dev", false};
        CHECK(match_ground_truth(zero, &empty).tally == Tally{});
    }

    TEST_CASE("ground-truth parsing reports bad entries") {
        auto gt = ground_truth_from_json(nlohmann::json::parse(R"({"artifacts":[
            {"entity_type":"Email","value":"no-domain"},
            {"entity_type":"Colour","value":"red"},
            {"value":"x"},
            {"entity_type":"App Name","value":"Snapchat","uid":"788492af_UserStore_114"}],
          "relationships":[
            {"type_pair":"App Name|Email","values":["Snapchat","A@B.co"]},
            {"type_pair":"Email|Message","values":["a@b.co","hi"]},
            {"type_pair":"Email|App Name","values":["a@b.co"]}]})"));
        REQUIRE(gt.artifacts.size() == 1);
        CHECK(gt.artifacts[0].uid == "788492af_UserStore_114");
        REQUIRE(gt.issues.size() == 5);
        CHECK(gt.issues[0].item == "artifacts[0]");
        CHECK(gt.issues[0].reason.find("NormalizationMismatch") == 0);
        CHECK(gt.issues[1].reason == "illegal entity_type");
        CHECK(gt.issues[2].reason == "malformed entry");
        REQUIRE(gt.relationships.size() == 1);
        CHECK(gt.relationships[0].type_pair == kEdgeTaxonomy[1]);
        CHECK(gt.relationships[0].source == *normalize_value(EntityType::Email, "A@B.co"));
        CHECK(gt.relationships[0].target == "Snapchat");
        CHECK_THROWS_AS(ground_truth_from_json(nlohmann::json::array()), Error);
        auto back = ground_truth_from_json(nlohmann::json::parse(to_json(gt).dump()));
        CHECK(back.artifacts.size() == 1);
        CHECK(back.relationships.size() == 1);
        CHECK(back.issues.empty());
    }

    TEST_CASE("custody audit") {
        std::vector<flatten::FlatRecord> flat;
        for (std::uint64_t lid = 1; lid <= 4; ++lid) {
            flatten::FlatRecord r{"a.db", "t", "/data/x/", "", lid, {}};
            r.uid = flatten::make_uid({"dev", r.path, r.database, r.table, lid});
            flat.push_back(r);
        }
        std::vector<RefinedArtifact> arts;
        for (const auto& r : flat) arts.push_back({r.uid, EntityType::AppName, "Chrome", 9, "e"});
        auto clean = audit_custody(arts, flatten::RecordIndex(flat), "dev");
        CHECK(clean.intact == 4);
        CHECK(clean.breaches.empty());
        CHECK(audit_custody({}, flatten::RecordIndex(flat), "dev").intact == 0);

        auto tampered = flat;
        tampered[2].uid[0] = tampered[2].uid[0] == 'f' ? 'e' : 'f';
        arts[2].uid = tampered[2].uid;
        auto report = audit_custody(arts, flatten::RecordIndex(tampered), "dev");
        CHECK(report.intact == 3);
        REQUIRE(report.breaches.size() == 1);
        CHECK(report.breaches[0].reason == "uid mismatch");
        CHECK(report.breaches[0].uid == tampered[2].uid);

        CHECK(audit_custody(arts, flatten::RecordIndex(flat), "dev").breaches.at(0).reason == "unknown uid");
        CHECK(audit_custody(arts, flatten::RecordIndex(flat), "other").intact == 0);
        auto dup = flat;
        dup.push_back(flat[0]);
        CHECK(audit_custody({arts[0]}, flatten::RecordIndex(dup), "dev").breaches.at(0).reason == "duplicate uid");
        CHECK(uid_collisions(flatten::RecordIndex(dup)) == std::vector<std::string>{flat[0].uid});
    }

    TEST_CASE("connection counting and verdict bookkeeping") {
        flatten::FlatRecord rec{"x.db", "t", "/p/", "", 1, {}};
        rec.uid = flatten::make_uid({"dev", rec.path, rec.database, rec.table, 1});
        std::vector<RefinedArtifact> arts = {{rec.uid, EntityType::Timestamp, "19 July 2021 17:48:00", 9, "e"},
                                             {rec.uid, EntityType::AppName, "Twitter", 9, "e"},
                                             {rec.uid, EntityType::Email, "cryptowendyo@protonmail.com", 9, "e"}};
        auto records = consolidate::consolidate(arts, flatten::RecordIndex({rec}));
        auto g = graph::build_graph(records, 5, "dev");
        REQUIRE(g.edges.size() == 3);
        auto gt = ground_truth_from_json(nlohmann::json::parse(
            R"({"relationships":[{"type_pair":"Timestamp|App Name","values":["19 July 2021 17:48:00","Twitter"]}]})"));
        verdicts::VerdictStore store;
        auto c = count_connections(g, &store, &gt, false);
        CHECK(c.total == 1);
        CHECK(c.correct == 1);
        CHECK(c.pending == 3);
        CHECK(count_connections(g, &store, &gt, true).total == 3);
        CHECK(count_connections(g, &store, &gt, true).correct == 1);

        // The rejected Timestamp-Twitter instance drops out of the numerator.
        const auto* ta = &g.edges[0];
        REQUIRE(ta->type_pair == kEdgeTaxonomy[0]);
        store.apply({ta->edge_id, rec.uid, verdicts::Verdict::Invalid, "r", "", ""}, g, "t");
        c = count_connections(g, &store, &gt, false);
        CHECK(c.correct == 0);
        CHECK(c.total == 1);
        for (const auto& e : g.edges)
            if (e.edge_id != ta->edge_id) store.apply({e.edge_id, rec.uid, verdicts::Verdict::Valid, "r", "", ""}, g, "t");
        c = count_connections(g, &store, &gt, false);
        CHECK(c.valid + c.invalid + c.pending == graph::hypothesis_instances(g).size());
        CHECK(c.correct == 2);
        CHECK(c.total == 3);
    }

    TEST_CASE("production matcher equals the brute-force matcher") {
        std::mt19937_64 rng(29);
        for (int fixture = 0; fixture < 200; ++fixture) {
            CAPTURE(fixture);
            auto f = testing::random_match_fixture(rng);
            MatchInput in{&f.artifacts, &f.records, &f.graph, &f.index, &f.verdicts, "dev", f.strict};
            auto got = match_ground_truth(in, &f.gt).tally;
            auto want = testing::brute_force(f.artifacts, f.records, f.graph, f.flat, f.verdicts, f.gt, "dev", f.strict);
            CHECK(to_json(got).dump() == to_json(want).dump());
            CHECK(got.true_extractions <= got.total_potential_extractions);
            CHECK(got.tp + got.fp == f.artifacts.size());
            CHECK(got.correct_connections <= got.total_connections);
            CHECK(got.artifacts_matching_context <= got.tp);
        }
    }
}
