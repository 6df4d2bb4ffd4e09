#include "dfkg/fixtures.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>

#include "dfkg/error.hpp"
#include "dfkg/flatten.hpp"
#include "dfkg/pipeline.hpp"
#include "dfkg/sqlite.hpp"
#include "dfkg/util.hpp"

namespace dfkg::fixtures {

namespace fs = std::filesystem;
using ingest::Blob;
using ingest::Value;

using namespace std::string_literals;

namespace {

Blob bytes(std::string_view s) { return Blob{std::vector<std::uint8_t>(s.begin(), s.end())}; }

struct TableSpec {
    std::string dir;  // image-relative directory without slashes at either end
    std::string database;
    std::string table;
    std::vector<std::string> columns;  // "name TYPE"
    std::map<std::uint64_t, std::vector<Value>> planted;
    std::function<std::vector<Value>(std::uint64_t)> filler;
    std::uint64_t rows = 0;

    std::string file_path() const { return "/" + dir + "/"; }
};

struct Planted {
    EntityType type;
    std::string value;
    const TableSpec* table;
    std::uint64_t lid;
};

void write_database(const fs::path& file, const std::vector<const TableSpec*>& tables) {
    fs::create_directories(file.parent_path());
    fs::remove(file);
    auto conn = sqlite::Connection::open_writable(file);
    conn.exec("BEGIN");
    for (const TableSpec* t : tables) {
        std::string cols, marks;
        for (std::size_t i = 0; i < t->columns.size(); ++i) {
            cols += (i ? ", " : "") + t->columns[i];
            marks += i ? ", ?" : "?";
        }
        conn.exec("CREATE TABLE " + sqlite::quote_identifier(t->table) + " (" + cols + ")");
        sqlite::Statement st(conn, "INSERT INTO " + sqlite::quote_identifier(t->table) + " VALUES (" + marks + ")");
        if (!st.ok()) throw Error(ErrorCode::Io, "fixture insert prepare failed: " + conn.last_error());
        for (std::uint64_t lid = 1; lid <= t->rows; ++lid) {
            auto it = t->planted.find(lid);
            std::vector<Value> row = it != t->planted.end() ? it->second : t->filler(lid);
            for (std::size_t i = 0; i < row.size(); ++i) {
                int idx = static_cast<int>(i) + 1;
                std::visit(
                    [&](const auto& v) {
                        using V = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<V, std::monostate>) st.bind_null(idx);
                        else if constexpr (std::is_same_v<V, std::int64_t>) st.bind_int(idx, v);
                        else if constexpr (std::is_same_v<V, double>) st.bind_real(idx, v);
                        else if constexpr (std::is_same_v<V, std::string>) st.bind_text(idx, v);
                        else st.bind_blob(idx, v.bytes);
                    },
                    row[i]);
            }
            if (st.step() != SQLITE_DONE) throw Error(ErrorCode::Io, "fixture insert failed: " + conn.last_error());
            st.reset();
        }
    }
    conn.exec("COMMIT");
}

void stamp(const fs::path& file) {
    auto sys = std::chrono::sys_seconds{std::chrono::seconds{kSnapshotEpoch}};
    fs::last_write_time(file, std::chrono::file_clock::from_sys(sys));
}

std::uint64_t mod(std::int64_t a, std::uint64_t m) {
    auto r = a % static_cast<std::int64_t>(m);
    return static_cast<std::uint64_t>(r < 0 ? r + static_cast<std::int64_t>(m) : r);
}

}  // namespace

nlohmann::ordered_json build_planted_image(const fs::path& root, const std::string& device_id,
                                          std::uint64_t sample_interval) {
    if (sample_interval < 1) throw Error(ErrorCode::InvalidConfig, "sample_interval must be at least 1");
    auto text = [](std::string s) { return Value{std::move(s)}; };
    auto integer = [](std::int64_t v) { return Value{v}; };

    std::vector<TableSpec> specs;
    specs.push_back({"data/data/com.android.bluetooth/databases", "bluetooth.db", "devices",
                     {"id INTEGER", "address TEXT", "name TEXT"},
                     {{1, {integer(1), text("34:C7:31:F8:61:3B"), text("Heisenberg Car")}}},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{integer(static_cast<std::int64_t>(lid)), Value{},
                                                   text("device-" + std::to_string(lid))};
                     }});
    specs.push_back({"data/data/com.android.chrome/app_chrome/Default", "History", "urls",
                     {"id INTEGER", "url TEXT", "title TEXT", "visit_count INTEGER", "last_visit_time INTEGER"},
                     {{4,
                       {integer(4), text("https://www.google.com/search?q=hidden+photos+apps"),
                        text("hidden photos apps - Google Search"), integer(1), integer(13267769194000000)}}},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{integer(static_cast<std::int64_t>(lid)),
                                                   text("https://example.org/page/" + std::to_string(lid)),
                                                   text("Page " + std::to_string(lid)), integer(1), integer(0)};
                     }});
    specs.push_back({"data/data/com.android.providers.settings/databases", "settings.db", "secure",
                     {"_id INTEGER", "name TEXT", "value TEXT"},
                     {{1, {integer(1), text("bluetooth_address"), text("AA:BB:CC:11:22:33")}},
                      {2, {integer(2), text("bluetooth_name"), text("Galaxy Note10")}}},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{integer(static_cast<std::int64_t>(lid)),
                                                   text("setting_" + std::to_string(lid)), text("0")};
                     },
                     2});
    specs.push_back({"data/data/com.google.android.apps.docs/databases", "DocList.db", "entry_proto",
                     {"id INTEGER", "proto BLOB"},
                     {{2, {integer(2), bytes("\x08\x03\x0f\"1617477858090\"\xe2\x03\x10"s)}}},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{integer(static_cast<std::int64_t>(lid)),
                                                   bytes("\x08\x01\x10"s + static_cast<char>(lid % 100))};
                     }});
    specs.push_back({"data/data/com.sec.android.app.myfiles/databases", "myfiles.db", "recent_files",
                     {"_id INTEGER", "DPath TEXT", "name TEXT"},
                     {{5, {integer(5), text("/data/user/0/com.instagram.android/databases/direct.db"), text("direct.db")}}},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{integer(static_cast<std::int64_t>(lid)),
                                                   text("/storage/emulated/0/Download/file" + std::to_string(lid) + ".pdf"),
                                                   text("file" + std::to_string(lid) + ".pdf")};
                     }});
    specs.push_back({"data/data/com.snapchat.android/databases", "arroyo.db", "user_session",
                     {"key TEXT", "blobVal BLOB"},
                     {{3, {text("session_phone"), bytes("n\x0c+16506808040\x12\x09\x0a\x01"s)}}},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{text("session_" + std::to_string(lid)),
                                                   bytes("\x0a\x02"s + static_cast<char>(lid % 100))};
                     }});
    specs.push_back({"data/data/com.snapchat.android/databases", "core.db", "UserStore",
                     {"key TEXT", "realVal BLOB"},
                     {{114,
                       {text("user_account"),
                        bytes("\x12\x1b" "a\x19heisenbergercarro@gmail.com\x00\x2d\x01"s)}}},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{text("pref_" + std::to_string(lid)),
                                                   bytes("\x08"s + static_cast<char>(lid % 100))};
                     }});
    specs.push_back({"data/data/com.twitter.android/databases", "1380066862-66.db", "users",
                     {"_id INTEGER", "Data BLOB"},
                     {{7,
                       {integer(7),
                        bytes("\x0b\x10"s +
                              "\"ull_name\":\"Marsha Mellos\",\"profile_image_url\":\"https://pbs.twimg.com/p/7.jpg\"}")}}},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{integer(static_cast<std::int64_t>(lid)),
                                                   bytes("\x0b\x10"s + "{\"id\":" + std::to_string(lid) + "}")};
                     }});
    specs.push_back({"data/media/0/Pictures", "photo.jpg", "thumbnails",
                     {"id INTEGER", "label TEXT"},
                     {},
                     [=](std::uint64_t lid) {
                         return std::vector<Value>{integer(static_cast<std::int64_t>(lid)),
                                                   text("thumb " + std::to_string(lid))};
                     },
                     4});

    std::vector<Planted> planted_artifacts = {
        {EntityType::MacAddress, "34:C7:31:F8:61:3B", &specs[0], 1},
        {EntityType::SearchKeyword, "hidden photos apps", &specs[1], 4},
        {EntityType::Timestamp, "03 April 2021 15:24:18", &specs[3], 2},
        {EntityType::AppName, "Instagram", &specs[4], 5},
        {EntityType::PhoneNumber, "+16506808040", &specs[5], 3},
        {EntityType::Email, "heisenbergercarro@gmail.com", &specs[6], 114},
        {EntityType::HumanName, "Marsha Mellos", &specs[7], 7},
    };

    for (auto& s : specs) {
        std::uint64_t needed = s.planted.empty() ? 0 : s.planted.rbegin()->first;
        s.rows = std::max({s.rows, needed, std::uint64_t{1}});
    }

    std::vector<TableSpec*> order;
    for (auto& s : specs) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const TableSpec* a, const TableSpec* b) {
        return std::tie(a->dir, a->database, a->table) < std::tie(b->dir, b->database, b->table);
    });
    std::sort(order.begin(), order.end(), [](const TableSpec* a, const TableSpec* b) {
        return std::make_tuple(a->file_path(), a->database, a->table) <
               std::make_tuple(b->file_path(), b->database, b->table);
    });

    // Pad the preceding in-scope table so that each planted row lands on a sampled position.
    std::uint64_t position = 0;
    TableSpec* previous = nullptr;
    for (TableSpec* s : order) {
        if (flatten::path_denied(s->file_path(), flatten::default_denylist())) continue;
        if (!s->planted.empty()) {
            std::uint64_t lid = s->planted.begin()->first;
            std::uint64_t pad = mod(1 - static_cast<std::int64_t>(lid) - static_cast<std::int64_t>(position), sample_interval);
            if (pad && !previous) throw Error(ErrorCode::InvalidConfig, "first planted table cannot be aligned");
            if (previous) previous->rows += pad;
            position += pad;
            for (const auto& [other, _] : s->planted)
                if ((other - lid) % sample_interval != 0)
                    throw Error(ErrorCode::InvalidConfig, "planted rows in one table must be interval-aligned");
        }
        position += s->rows;
        previous = s;
    }

    std::map<fs::path, std::vector<const TableSpec*>> files;
    for (const auto& s : specs) files[root / s.dir / s.database].push_back(&s);
    for (const auto& [file, tables] : files) {
        write_database(file, tables);
        stamp(file);
    }

    {
        fs::path wal = root / "data/data/com.snapchat.android/databases/core.db-wal";
        std::ofstream(wal, std::ios::binary) << "\x37\x7f\x06\x82garbage-wal-frame\xff\xfe"s;
        fs::path jpeg = root / "data/media/0/DCIM/Camera/IMG_20210404_231536.jpg";
        fs::create_directories(jpeg.parent_path());
        std::ofstream(jpeg, std::ios::binary) << "\xff\xd8\xff\xe0\x00\x10JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00\xff\xd9"s;
    }

    nlohmann::ordered_json gt;
    auto arts = nlohmann::ordered_json::array();
    for (const auto& p : planted_artifacts) {
        nlohmann::ordered_json o;
        o["entity_type"] = label(p.type);
        o["value"] = p.value;
        o["uid"] = flatten::make_uid({device_id, p.table->file_path(), p.table->database, p.table->table, p.lid});
        arts.push_back(std::move(o));
    }
    gt["artifacts"] = std::move(arts);
    gt["relationships"] = nlohmann::ordered_json::array();
    return gt;
}

// --- Table II ------------------------------------------------------------------

namespace {

struct SourceTable {
    std::string path;
    std::string database;
    std::string table;
};

struct ReviewRecord {
    const SourceTable* source;
    std::uint64_t lid;
    std::vector<std::pair<EntityType, std::string>> artifacts;
};

const SourceTable kChrome{"/data/data/com.android.chrome/app_chrome/Default/", "History", "urls"};
const SourceTable kBluetooth{"/data/data/com.android.bluetooth/databases/", "bluetooth.db", "devices"};
const SourceTable kTwitterStatuses{"/data/data/com.twitter.android/databases/", "1380066862-66.db", "statuses"};
const SourceTable kTwitterUsers{"/data/data/com.twitter.android/databases/", "1380066862-66.db", "users"};
const SourceTable kDrive{"/data/data/com.google.android.apps.docs/databases/", "DocList.db", "entry_proto"};
const SourceTable kSnapCore{"/data/data/com.snapchat.android/databases/", "core.db", "UserStore"};
const SourceTable kSnapMain{"/data/data/com.snapchat.android/databases/", "main.db", "Friend"};
const SourceTable kSnapArroyo{"/data/data/com.snapchat.android/databases/", "arroyo.db", "user_session"};
const SourceTable kGmail{"/data/data/com.google.android.gm/databases/", "mailstore.db", "messages"};
const SourceTable kMaps{"/data/data/com.google.android.apps.maps/databases/", "gmm_myplaces.db", "sync_item"};

std::vector<ReviewRecord> review_records() {
    using E = EntityType;
    std::vector<ReviewRecord> out;
    const std::vector<std::pair<std::string, std::string>> searches = {
        {"italianos near me", "02 July 2021 19:22:10"},
        {"hidden photos apps", "15 June 2021 13:46:34"},
        {"interesting car apps", "08 July 2021 00:02:39"},
        {"chester springs pa zip code", "07 July 2021 23:51:40"},
        {"how to reprogram a key fob", "28 June 2021 22:14:05"},
        {"relay attack keyless entry", "29 June 2021 01:03:47"},
        {"used catalytic converter prices", "30 June 2021 16:40:12"},
        {"vin number lookup free", "01 July 2021 10:27:58"},
        {"pawn shops open late", "03 July 2021 21:09:31"},
        {"tow truck near me", "04 July 2021 08:55:20"},
        {"car dealership hours sunday", "05 July 2021 12:18:44"},
        {"how long does bluetooth pairing last", "06 July 2021 17:36:09"},
        {"cheap storage units near me", "09 July 2021 14:02:27"},
    };
    std::uint64_t lid = 1;
    for (const auto& [q, t] : searches) {
        out.push_back({&kChrome, lid, {{E::Timestamp, t}, {E::AppName, "Chrome"}, {E::SearchKeyword, q}}});
        lid += 6;
    }
    out.push_back({&kBluetooth, 1, {{E::Timestamp, "04 April 2021 23:15:36"}, {E::MacAddress, "34:C7:31:F8:61:3B"}, {E::AppName, "Bluetooth"}}});
    out.push_back({&kBluetooth, 7, {{E::Timestamp, "09 May 2021 14:58:04"}, {E::MacAddress, "F0:8A:76:C4:F8:0E"}, {E::AppName, "Bluetooth"}}});
    out.push_back({&kBluetooth, 13, {{E::Timestamp, "20 May 2021 21:18:53"}, {E::MacAddress, "2C:6B:7D:1D:21:5A"}, {E::AppName, "Bluetooth"}}});
    out.push_back({&kTwitterStatuses, 19, {{E::Timestamp, "19 July 2021 17:48:00"}, {E::Email, "cryptowendyo@protonmail.com"}, {E::AppName, "Twitter"}}});
    out.push_back({&kTwitterStatuses, 25, {{E::Timestamp, "25 June 2021 02:29:19"}, {E::Email, "thedogecoinmillionaire@gmail.com"}, {E::AppName, "Twitter"}}});
    out.push_back({&kDrive, 2, {{E::Timestamp, "03 April 2021 15:24:18"}, {E::Email, "heisenbergercarro@gmail.com"}, {E::AppName, "Google Drive"}}});
    out.push_back({&kSnapCore, 114, {{E::Timestamp, "02 April 2021 11:05:42"}, {E::Email, "heisenbergercarro@gmail.com"}, {E::AppName, "Snapchat"}}});
    out.push_back({&kGmail, 31, {{E::Timestamp, "21 June 2021 09:12:05"}, {E::Email, "heisenbergercarro@gmail.com"}}});
    out.push_back({&kSnapMain, 8, {{E::HumanName, "Beth Dutton"}, {E::Timestamp, "05 April 2021 16:28:23"}, {E::AppName, "Snapchat"}}});
    out.push_back({&kTwitterUsers, 7, {{E::HumanName, "Marsha Mellos"}, {E::Timestamp, "19 June 2021 21:38:00"}, {E::AppName, "Twitter"}}});
    out.push_back({&kSnapArroyo, 3, {{E::PhoneNumber, "+16506808040"}, {E::Email, "heisenbergercarro@gmail.com"}, {E::AppName, "Snapchat"}}});
    out.push_back({&kDrive, 8, {{E::Timestamp, "20 May 2021 10:01:10"}, {E::AppName, "Google Drive"}}});
    out.push_back({&kMaps, 13, {{E::Timestamp, "11 June 2021 18:45:00"}, {E::AppName, "Google Maps"}}});
    return out;
}

}  // namespace

store::RunRecord build_review_run(const fs::path& dir, const std::string& device_id) {
    auto records = review_records();

    std::vector<flatten::FlatRecord> flat;
    std::vector<refine::RefinedArtifact> artifacts;
    nlohmann::ordered_json gt_artifacts = nlohmann::ordered_json::array();
    nlohmann::ordered_json gt_relationships = nlohmann::ordered_json::array();
    std::map<std::pair<std::string, std::string>, const SourceTable*> databases;
    for (const auto& r : records) {
        flatten::FlatRecord f;
        f.database = r.source->database;
        f.table = r.source->table;
        f.path = r.source->path;
        f.lid = r.lid;
        f.uid = flatten::make_uid({device_id, f.path, f.database, f.table, f.lid});
        for (const auto& [type, value] : r.artifacts) {
            f.pairs.emplace_back(std::string(artifact_csv_name(type)).substr(0, artifact_csv_name(type).size() - 4), value);
            artifacts.push_back({f.uid, type, value, type == EntityType::Timestamp ? 8 : 9, "fixture-review"});
            gt_artifacts.push_back({{"entity_type", label(type)}, {"value", value}, {"uid", f.uid}});
        }
        for (std::size_t i = 0; i < r.artifacts.size(); ++i)
            for (std::size_t j = i + 1; j < r.artifacts.size(); ++j) {
                auto pair = taxonomy_pair(r.artifacts[i].first, r.artifacts[j].first);
                if (!pair) continue;
                bool forward = pair->first == r.artifacts[i].first;
                const auto& a = forward ? r.artifacts[i].second : r.artifacts[j].second;
                const auto& b = forward ? r.artifacts[j].second : r.artifacts[i].second;
                gt_relationships.push_back({{"type_pair", type_pair_key(*pair)}, {"values", {a, b}}});
            }
        databases[{r.source->path, r.source->database}] = r.source;
        flat.push_back(std::move(f));
    }
    std::sort(flat.begin(), flat.end(), [](const auto& a, const auto& b) {
        return std::tie(a.path, a.database, a.table, a.lid) < std::tie(b.path, b.database, b.table, b.lid);
    });
    std::stable_sort(artifacts.begin(), artifacts.end(), [](const auto& a, const auto& b) { return a.uid < b.uid; });

    nlohmann::ordered_json gt;
    gt["artifacts"] = std::move(gt_artifacts);
    gt["relationships"] = std::move(gt_relationships);
    const std::string gt_bytes = gt.dump(2) + "\n";

    pipeline::RunConfig cfg;
    cfg.device_id = device_id;
    cfg.out = dir;
    const std::string hash = pipeline::config_hash(cfg, gt_bytes);

    store::RunDir rd(dir);
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["device_id"] = device_id;
    manifest["snapshot_time"] = format_iso8601_utc(kSnapshotEpoch);
    auto dbs = nlohmann::ordered_json::array();
    for (const auto& [key, src] : databases) {
        nlohmann::ordered_json o;
        o["device_id"] = device_id;
        o["file_path"] = src->path;
        o["database_name"] = src->database;
        o["byte_size"] = 0;
        o["signature"] = "sqlite3";
        o["location"] = "";
        dbs.push_back(std::move(o));
    }
    manifest["databases"] = std::move(dbs);
    manifest["warnings"] = nlohmann::ordered_json::array();
    rd.write("manifest.json", manifest.dump(2) + "\n");
    rd.write("unified_records.csv", flatten::unified_csv(flat));
    rd.write("refined_artifacts.jsonl", refine::artifacts_jsonl(artifacts));
    rd.write("refine_warnings.jsonl", "");
    for (const auto& [name, content] : refine::artifact_csvs(artifacts)) rd.write("artifacts/" + name, content);

    store::RunRecord rec;
    rec.run_id = "run-" + sha256_hex(hash + "\nreview").substr(0, 12);
    rec.device_id = device_id;
    rec.created_at = format_iso8601_utc(kSnapshotEpoch);
    rec.engine = "fixture-review";
    rec.config = cfg.to_json();
    rec.config_hash = hash;
    for (auto stage : {"ingested", "flattened", "refined"}) rec.stages[stage] = {"complete", hash, rec.created_at};
    rec.counts["unified_records"] = flat.size();
    rec.counts["artifacts"] = artifacts.size();
    rd.save(rec);

    pipeline::PipelineOptions opts;
    opts.ground_truth_bytes = gt_bytes;
    return pipeline::run_pipeline(cfg, opts);
}

std::vector<InstanceRef> review_rejected_instances(const graph::ForensicGraph& g) {
    const std::vector<std::pair<std::string, std::string>> rejected = {
        {"Timestamp|19 July 2021 17:48:00", "App Name|Twitter"},
        {"Timestamp|25 June 2021 02:29:19", "App Name|Twitter"},
        {"Email|cryptowendyo@protonmail.com", "App Name|Twitter"},
        {"Email|thedogecoinmillionaire@gmail.com", "App Name|Twitter"},
    };
    std::vector<InstanceRef> out;
    for (const auto& [s, t] : rejected)
        for (const auto& e : g.edges)
            if (e.source == s && e.target == t)
                for (const auto& uid : e.provenance) out.push_back({e.edge_id, uid});
    return out;
}

}  // namespace dfkg::fixtures
