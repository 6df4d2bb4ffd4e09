#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dfkg/consolidate.hpp"
#include "dfkg/evaluate.hpp"
#include "dfkg/flatten.hpp"
#include "dfkg/graph.hpp"
#include "dfkg/verdicts.hpp"

namespace testing {

using namespace dfkg;

struct UidCase {
    flatten::UidParts parts;
    const char* expected;
};

// Prefixes from Python hashlib.sha256((device + path + db).encode()).hexdigest()[:8].
inline const UidCase kUidOracle[] = {
    {{"A1B2C3D4E5F6G7H8", "/data/com.whatsapp/databases/", "msgstore.db", "messages", 42ULL}, "788492af_messages_42"},
    {{"CTF2021-NOTE10", "/data/data/com.snapchat.android/databases/", "core.db", "UserStore", 114ULL}, "c72ce048_UserStore_114"},
    {{"CTF2021-NOTE10", "/data/data/com.snapchat.android/databases/", "arroyo.db", "user_session", 3ULL}, "d654153d_user_session_3"},
    {{"CTF2021-NOTE10", "/data/data/com.android.chrome/app_chrome/Default/", "History", "urls", 4ULL}, "14b6cf0c_urls_4"},
    {{"CTF2021-NOTE10", "/data/data/com.android.bluetooth/databases/", "bluetooth.db", "devices", 1ULL}, "8d5bcbd3_devices_1"},
    {{"CTF2021-NOTE10", "/data/data/com.twitter.android/databases/", "1380066862-66.db", "users", 7ULL}, "78a04612_users_7"},
    {{"CTF2021-NOTE10", "/data/data/com.google.android.apps.docs/databases/", "DocList.db", "entry_proto", 2ULL}, "d1331091_entry_proto_2"},
    {{"CTF2021-NOTE10", "/data/data/com.sec.android.app.myfiles/databases/", "myfiles.db", "recent_files", 5ULL}, "0cba85ce_recent_files_5"},
    {{"device-2", "/data/data/com.snapchat.android/databases/", "core.db", "UserStore", 114ULL}, "36b50cfe_UserStore_114"},
    {{"x", "/", "a.db", "t", 1ULL}, "05ce697d_t_1"},
    {{"PIXEL-7", "/data/user/0/org.telegram.messenger/files/", "cache4.db", "messages_v2", 99999ULL}, "2cd427ad_messages_v2_99999"},
    {{"SM-G991U", "/sdcard/Download/", "exported.sqlite", "data", 18446744073709551615ULL}, "0d94c539_data_18446744073709551615"},
    {{"σ-device", "/data/data/com.example.üñí/databases/", "база.db", "таблица", 12ULL}, "bd139035_таблица_12"},
    {{"dev with space", "/data/media/0/My Files/", "notes db.db", "note list", 3ULL}, "a5ea8758_note list_3"},
    {{"IMEI-356938035643809", "/data/data/com.facebook.orca/databases/", "threads_db2", "messages", 1024ULL}, "7c0a7560_messages_1024"},
    {{"IMEI-356938035643809", "/data/data/com.facebook.orca/databases/", "threads_db2", "thread_users", 1ULL}, "7c0a7560_thread_users_1"},
    {{"A", "/B/", "C", "D_E_F", 10ULL}, "555f2da3_D_E_F_10"},
    {{"0", "/0/", "0", "0", 7ULL}, "54b54709_0_7"},
    {{"CTF2021-NOTE10", "/data/media/0/Pictures/", "photo.jpg", "thumbnails", 4ULL}, "cb223759_thumbnails_4"},
    {{"A", "/B", "/C", "D", 10ULL}, "555f2da3_D_10"},
};

// Compares every artifact with every gt entry; no maps, no shared helpers
// beyond the value normalizer.
inline evaluate::Tally brute_force(const std::vector<refine::RefinedArtifact>& arts, const std::vector<consolidate::EvidenceRecord>& records,
                  const graph::ForensicGraph& g, const std::vector<flatten::FlatRecord>& flat,
                  const verdicts::VerdictStore& store, const evaluate::GroundTruth& gt, const std::string& device, bool strict) {
    evaluate::Tally t;
    auto canon = [](EntityType type, const std::string& v) { return graph::node_value(type, v); };
    for (const auto& a : arts) {
        bool hit = false, context = false;
        for (const auto& e : gt.artifacts)
            if (e.entity_type == a.entity_type && e.value == canon(a.entity_type, a.refined_value)) {
                hit = true;
                if (!e.uid || *e.uid == a.uid) context = true;
            }
        if (hit) {
            ++t.tp;
            if (a.refined_value == canon(a.entity_type, a.refined_value)) ++t.exact_value_matches;
            if (context) ++t.artifacts_matching_context;
        } else {
            ++t.fp;
        }
    }
    for (const auto& e : gt.artifacts) {
        bool produced = false;
        for (const auto& a : arts)
            if (e.entity_type == a.entity_type && e.value == canon(a.entity_type, a.refined_value)) produced = true;
        if (!produced) ++t.fn;
    }
    t.true_extractions = t.tp;
    t.total_potential_extractions = arts.size();

    for (const auto& r : records) {
        bool wrong = false;
        for (const auto& a : r.artifacts) {
            std::size_t entries = 0, elsewhere = 0;
            for (const auto& e : gt.artifacts)
                if (e.entity_type == a.entity_type && e.value == canon(a.entity_type, a.refined_value)) {
                    ++entries;
                    if (e.uid && *e.uid != r.uid) ++elsewhere;
                }
            if (entries > 0 && elsewhere == entries) wrong = true;
        }
        ++t.total_consolidated;
        if (!wrong) ++t.correctly_consolidated;
    }

    for (const auto& e : g.edges)
        for (const auto& uid : e.provenance) {
            bool in_gt = false;
            for (const auto& rel : gt.relationships)
                if (rel.type_pair == e.type_pair && std::string(label(rel.type_pair.first)) + "|" + rel.source == e.source &&
                    std::string(label(rel.type_pair.second)) + "|" + rel.target == e.target)
                    in_gt = true;
            auto v = store.state(e.edge_id, uid);
            bool counted = strict || v != verdicts::Verdict::Pending || in_gt;
            if (!counted) continue;
            ++t.total_connections;
            if (v == verdicts::Verdict::Valid || (v == verdicts::Verdict::Pending && in_gt)) ++t.correct_connections;
        }

    for (const auto& a : arts) {
        std::size_t found = 0;
        const flatten::FlatRecord* rec = nullptr;
        for (const auto& f : flat)
            if (f.uid == a.uid) {
                ++found;
                rec = &f;
            }
        if (found == 1 && flatten::make_uid({device, rec->path, rec->database, rec->table, rec->lid}) == a.uid)
            ++t.artifacts_with_intact_custody;
    }
    t.total_artifacts = arts.size();
    return t;
}

inline const std::vector<std::pair<EntityType, std::vector<std::string>>> kValuePools = {
    {EntityType::Email, {"heisenbergercarro@gmail.com", "HeisenbergerCarro@gmail.com", "cryptowendyo@protonmail.com"}},
    {EntityType::AppName, {"Snapchat", "Twitter", "Chrome"}},
    {EntityType::PhoneNumber, {"+16506808040", "+1 650 680 8040"}},
    {EntityType::Timestamp, {"03 April 2021 15:24:18", "19 July 2021 17:48:00"}},
    {EntityType::SearchKeyword, {"hidden photos apps", "hidden  photos apps"}},
    {EntityType::HumanName, {"Marsha Mellos", "Beth Dutton"}},
};

struct MatchFixture {
    std::vector<flatten::FlatRecord> flat;
    flatten::RecordIndex index;
    std::vector<refine::RefinedArtifact> artifacts;
    evaluate::GroundTruth gt;
    std::vector<consolidate::EvidenceRecord> records;
    graph::ForensicGraph graph;
    verdicts::VerdictStore verdicts;
    bool strict = false;
};

/// At most 6 records and 20 artifacts for device "dev", with occasional
/// tampered coordinates, duplicate uids, uid-pinned gt entries and verdicts.
inline MatchFixture random_match_fixture(std::mt19937_64& rng) {
    MatchFixture f;
    std::size_t nrec = 1 + rng() % 6;
    for (std::size_t i = 0; i < nrec; ++i) {
        flatten::FlatRecord r{"d.db", "t" + std::to_string(i % 2), "/data/" + std::to_string(i % 3) + "/", "", i + 1, {}};
        r.uid = flatten::make_uid({"dev", r.path, r.database, r.table, r.lid});
        if (rng() % 8 == 0) r.lid += 100;
        f.flat.push_back(r);
    }
    if (rng() % 6 == 0) f.flat.push_back(f.flat[0]);
    f.index = flatten::RecordIndex(f.flat);

    auto pick = [&]() {
        const auto& pool = kValuePools[rng() % kValuePools.size()];
        return std::make_pair(pool.first, pool.second[rng() % pool.second.size()]);
    };
    auto value_of = [&](EntityType t) {
        for (const auto& [pt, vals] : kValuePools)
            if (pt == t) return vals[rng() % vals.size()];
        return std::string("x");
    };
    for (std::size_t i = rng() % 21; i > 0; --i) {
        auto [type, value] = pick();
        f.artifacts.push_back({f.flat[rng() % nrec].uid, type, value, 1 + static_cast<int>(rng() % 10), "e"});
    }
    nlohmann::json gtj = {{"artifacts", nlohmann::json::array()}, {"relationships", nlohmann::json::array()}};
    for (std::size_t i = rng() % 10; i > 0; --i) {
        auto [type, value] = pick();
        nlohmann::json o = {{"entity_type", label(type)}, {"value", value}};
        if (rng() % 2) o["uid"] = f.flat[rng() % nrec].uid;
        gtj["artifacts"].push_back(o);
    }
    for (std::size_t i = rng() % 6; i > 0; --i) {
        const auto& pair = kEdgeTaxonomy[rng() % kEdgeTaxonomy.size()];
        gtj["relationships"].push_back(
            {{"type_pair", type_pair_key(pair)}, {"values", {value_of(pair.first), value_of(pair.second)}}});
    }
    f.gt = evaluate::ground_truth_from_json(gtj);

    f.records = consolidate::consolidate(f.artifacts, f.index);
    f.graph = graph::build_graph(f.records, 5, "dev");
    for (const auto& inst : graph::hypothesis_instances(f.graph)) {
        auto roll = rng() % 3;
        if (roll == 0) continue;
        f.verdicts.apply({inst.edge_id, inst.uid, roll == 1 ? verdicts::Verdict::Valid : verdicts::Verdict::Invalid,
                          "r", "", ""},
                         f.graph, "t");
    }
    f.strict = rng() % 2;
    return f;
}

}  // namespace testing
