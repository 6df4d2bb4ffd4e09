#include <doctest.h>

#include <fstream>
#include <random>
#include <regex>
#include <set>

#include "dfkg/error.hpp"
#include "dfkg/flatten.hpp"
#include "dfkg/ingest.hpp"
#include "dfkg/sqlite.hpp"
#include "dfkg/util.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dfkg;
using flatten::FlatRecord;
using flatten::UidParts;

using namespace std::string_literals;

namespace {

// Picks whole UTF-8 characters from `alphabet`.
std::string random_text(std::mt19937_64& rng, std::size_t max_len, std::string_view alphabet) {
    std::vector<std::string_view> chars;
    for (std::size_t i = 0; i < alphabet.size();) {
        std::size_t n = 1;
        while (i + n < alphabet.size() && (static_cast<unsigned char>(alphabet[i + n]) & 0xC0) == 0x80) ++n;
        chars.push_back(alphabet.substr(i, n));
        i += n;
    }
    std::string s;
    for (std::size_t n = 1 + rng() % max_len; n > 0; --n) s += chars[rng() % chars.size()];
    return s;
}

void make_db(const std::filesystem::path& file, const std::vector<std::string>& setup) {
    std::filesystem::create_directories(file.parent_path());
    auto conn = sqlite::Connection::open_writable(file);
    for (const auto& sql : setup) conn.exec(sql);
}

}  // namespace

TEST_SUITE("uid") {
    TEST_CASE("prefix matches the independent SHA-256 oracle") {
        for (const auto& c : testing::kUidOracle) {
            CAPTURE(c.expected);
            CHECK(flatten::make_uid(c.parts) == c.expected);
        }
    }

    TEST_CASE("worked example uid") {
        CHECK(flatten::make_uid({"A1B2C3D4E5F6G7H8", "/data/com.whatsapp/databases/", "msgstore.db", "messages", 42}) ==
              "788492af_messages_42");
        CHECK(sha256_hex("A1B2C3D4E5F6G7H8/data/com.whatsapp/databases/msgstore.db").substr(0, 23) ==
              "788492af8249d22829c49c9");
    }

    TEST_CASE("determinism, format and parse round trip over random part-sets") {
        std::mt19937_64 rng(2021);
        const std::regex format("^[0-9a-f]{8}_.+_[1-9][0-9]*$");
        const std::string_view alnum = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-/ ";
        for (int i = 0; i < 1000; ++i) {
            UidParts p{random_text(rng, 20, alnum), "/" + random_text(rng, 40, alnum) + "/", random_text(rng, 16, alnum),
                       random_text(rng, 16, alnum), 1 + rng() % 1000000};
            std::string a = flatten::make_uid(p);
            std::string b = flatten::make_uid(UidParts(p));
            REQUIRE(a == b);
            CHECK(std::regex_match(a, format));
            CHECK(a.substr(0, 8) == sha256_hex(p.device_id + p.file_path + p.database_name).substr(0, 8));
            auto parsed = flatten::parse_uid(a);
            REQUIRE(parsed);
            CHECK(parsed->table == p.table_name);
            CHECK(parsed->lid == p.lid);
        }
    }

    TEST_CASE("invalid parts") {
        CHECK_THROWS_AS(flatten::make_uid({"", "/p/", "db", "t", 1}), Error);
        CHECK_THROWS_AS(flatten::make_uid({"d", "/p/", "db", "", 1}), Error);
        CHECK_THROWS_AS(flatten::make_uid({"d", "/p/", "db", "t", 0}), Error);
        try {
            flatten::make_uid({"d", "", "db", "t", 1});
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidParts);
        }
    }

    TEST_CASE("parse rejects malformed uids") {
        for (const char* bad : {"", "garbage", "788492af", "788492af_messages", "788492af__1", "788492AF_t_1",
                                "788492a_t_1", "788492af_t_0", "788492af_t_01", "788492af_t_x", "zz8492af_t_1"})
            CHECK_FALSE(flatten::parse_uid(bad));
        auto p = flatten::parse_uid("9f97eac5_UserStore_114");
        REQUIRE(p);
        CHECK(p->prefix == "9f97eac5");
        CHECK(p->table == "UserStore");
        CHECK(p->lid == 114);
    }
}

TEST_SUITE("flatten") {
    TEST_CASE("render_value") {
        using ingest::Blob;
        using ingest::Value;
        auto blob = [](std::string s) { return Value{Blob{std::vector<std::uint8_t>(s.begin(), s.end())}}; };
        CHECK(flatten::render_value(Value{}) == "");
        CHECK(flatten::render_value(Value{std::int64_t{13267769194000000}}) == "13267769194000000");
        CHECK(flatten::render_value(Value{std::int64_t{-5}}) == "-5");
        CHECK(flatten::render_value(Value{0.1}) == "0.1");
        CHECK(flatten::render_value(Value{40.0}) == "40");
        CHECK(flatten::render_value(Value{std::string("héllo, \"w\"")}) == "héllo, \"w\"");
        CHECK(flatten::render_value(Value{std::string("a\xff" "b")}) == "a\\xffb");
        CHECK(flatten::render_value(blob("n\x0c+16506808040\x12\x09\x0a\x01"s)) ==
              "n\\x0c+16506808040\\x12\\x09\\x0a\\x01");
        CHECK(flatten::render_value(blob("a\\b")) == "a\\x5cb");
        CHECK(flatten::render_value(blob("\x00\x7f ~"s)) == "\\x00\\x7f ~");
    }

    TEST_CASE("denylist") {
        const auto& d = flatten::default_denylist();
        CHECK(flatten::path_denied("/data/data/com.android.providers.settings/databases/", d));
        CHECK(flatten::path_denied("/data/data/com.google.android.gms/databases/", d));
        CHECK(flatten::path_denied("/data/user_de/0/com.android.providers.telephony/databases/", d));
        CHECK_FALSE(flatten::path_denied("/data/data/com.android.chrome/app_chrome/Default/", d));
        CHECK_FALSE(flatten::path_denied("/data/data/com.android.bluetooth/databases/", d));
        CHECK_FALSE(flatten::path_denied("/data/data/com.snapchat.android/databases/", d));
        CHECK_FALSE(flatten::path_denied("/data/media/0/Pictures/", d));
        CHECK(flatten::path_denied("/data/media/0/Pictures/", {"/data/media/"}));
        CHECK_FALSE(flatten::path_denied("/x/data/media/", {"/data/media/"}));
        CHECK_FALSE(flatten::path_denied("/data/data/com.android.providers.settings/", {}));
    }

    TEST_CASE("unify keeps positions 1, 1+k, ... of the non-denied records") {
        std::mt19937_64 rng(5);
        for (int iter = 0; iter < 200; ++iter) {
            std::vector<FlatRecord> records;
            std::size_t n = rng() % 40;
            for (std::size_t i = 0; i < n; ++i) {
                FlatRecord r;
                r.database = "db";
                r.table = "t";
                r.path = rng() % 4 == 0 ? "/data/data/com.android.providers.contacts/" : "/data/data/com.app.x/";
                r.lid = i + 1;
                r.uid = "00000000_t_" + std::to_string(i + 1);
                records.push_back(r);
            }
            std::uint64_t k = 1 + rng() % 7;
            auto out = flatten::unify(records, k, flatten::default_denylist());
            std::vector<FlatRecord> kept;
            for (const auto& r : records)
                if (r.path.find("providers") == std::string::npos) kept.push_back(r);
            std::vector<FlatRecord> expected;
            for (std::size_t i = 0; i < kept.size(); i += k) expected.push_back(kept[i]);
            CHECK(out == expected);
            CHECK(out.size() == (kept.size() + k - 1) / k);
        }
        CHECK_THROWS_AS(flatten::unify({}, 0, {}), Error);
    }

    TEST_CASE("unified csv round trip") {
        std::mt19937_64 rng(11);
        const std::string_view alphabet = "ab,\"\n{}:\\x é";
        for (int iter = 0; iter < 100; ++iter) {
            std::vector<FlatRecord> records;
            for (std::size_t i = 0, n = rng() % 6; i < n; ++i) {
                FlatRecord r{random_text(rng, 8, alphabet), random_text(rng, 8, alphabet), "/p/" + random_text(rng, 5, alphabet) + "/",
                             "", 1 + rng() % 500, {}};
                r.uid = flatten::make_uid({"dev", r.path, r.database, r.table, r.lid});
                for (std::size_t c = 0, m = rng() % 4; c < m; ++c)
                    r.pairs.emplace_back("c" + std::to_string(c), random_text(rng, 10, alphabet));
                records.push_back(std::move(r));
            }
            CHECK(flatten::parse_unified_csv(flatten::unified_csv(records)) == records);
        }
    }

    TEST_CASE("record index finds uids and reports duplicates") {
        FlatRecord a{"db", "t", "/p/", "u1", 1, {}}, b{"db", "t", "/p/", "u2", 2, {}};
        flatten::RecordIndex idx({a, b, a});
        REQUIRE(idx.find("u2"));
        CHECK(idx.find("u2")->lid == 2);
        CHECK_FALSE(idx.find("u3"));
        CHECK(idx.duplicate_uids() == std::vector<std::string>{"u1"});
    }
}

TEST_SUITE("ingest") {
    TEST_CASE("scan finds databases by header, whatever their name") {
        testing::TempDir dir;
        make_db(dir / "data/data/com.a.b/databases/one.db", {"CREATE TABLE t (x)", "INSERT INTO t VALUES (1)"});
        make_db(dir / "data/media/0/Pictures/photo.jpg", {"CREATE TABLE c (x)"});
        std::ofstream(dir / "data/media/0/real.jpg", std::ios::binary) << "\xff\xd8\xff\xe0 not a database";
        std::ofstream(dir / "data/data/com.a.b/databases/one.db-wal", std::ios::binary) << "SQLite format 3";
        std::ofstream(dir / "tiny", std::ios::binary) << "SQL";

        auto scan = ingest::scan_image(dir.path(), "dev");
        REQUIRE(scan.databases.size() == 2);
        CHECK(scan.databases[0].file_path == "/data/data/com.a.b/databases/");
        CHECK(scan.databases[0].database_name == "one.db");
        CHECK(scan.databases[1].file_path == "/data/media/0/Pictures/");
        CHECK(scan.databases[1].database_name == "photo.jpg");
        CHECK(scan.databases[0].signature == "sqlite3");
        CHECK_THROWS_AS(ingest::scan_image(dir / "nope", "dev"), Error);
    }

    TEST_CASE("rows stream in order with 1-based ordinals and the file is left untouched") {
        testing::TempDir dir;
        auto file = dir / "data/data/com.a.b/databases/m.db";
        make_db(file, {"CREATE TABLE msgs (id INTEGER, body TEXT, raw BLOB, score REAL)",
                       "INSERT INTO msgs VALUES (10, 'hi', x'00ff', 1.5)", "INSERT INTO msgs VALUES (11, NULL, NULL, NULL)",
                       "CREATE TABLE alpha (v)"});
        std::string before = read_file(file.string());
        auto scan = ingest::scan_image(dir.path(), "dev");
        REQUIRE(scan.databases.size() == 1);
        const auto& db = scan.databases[0];
        CHECK(ingest::enumerate_tables(db) == std::vector<std::string>{"alpha", "msgs"});
        auto rows = ingest::read_all_rows(db, "msgs");
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].row_index == 1);
        CHECK(rows[1].row_index == 2);
        auto recs = flatten::flatten_table(db, "msgs", rows);
        REQUIRE(recs.size() == 2);
        CHECK(recs[0].uid == flatten::make_uid({"dev", "/data/data/com.a.b/databases/", "m.db", "msgs", 1}));
        CHECK(recs[0].pairs == std::vector<std::pair<std::string, std::string>>{
                                   {"id", "10"}, {"body", "hi"}, {"raw", "\\x00\\xff"}, {"score", "1.5"}});
        CHECK(recs[1].pairs[1].second == "");
        CHECK_THROWS_AS(ingest::read_all_rows(db, "missing"), Error);
        CHECK(read_file(file.string()) == before);
    }

    TEST_CASE("a file with the header but a damaged body is reported") {
        testing::TempDir dir;
        std::string junk(4096, '\x5a');
        std::copy(std::begin(ingest::kSqliteMagic), std::end(ingest::kSqliteMagic), junk.begin());
        std::filesystem::create_directories(dir / "d");
        std::ofstream(dir / "d/bad.db", std::ios::binary) << junk;
        auto scan = ingest::scan_image(dir.path(), "dev");
        REQUIRE(scan.databases.size() == 1);
        try {
            ingest::enumerate_tables(scan.databases[0]);
            FAIL("expected CorruptDatabase");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::CorruptDatabase);
        }
    }

    TEST_CASE("identical databases at different paths produce disjoint uid sets") {
        testing::TempDir dir;
        std::vector<std::string> setup = {"CREATE TABLE t (v TEXT)"};
        for (int i = 0; i < 20; ++i) setup.push_back("INSERT INTO t VALUES ('row" + std::to_string(i) + "')");
        make_db(dir / "data/data/com.one.app/databases/same.db", setup);
        std::filesystem::create_directories(dir / "data/data/com.two.app/databases");
        std::filesystem::copy_file(dir / "data/data/com.one.app/databases/same.db",
                                   dir / "data/data/com.two.app/databases/same.db");
        auto scan = ingest::scan_image(dir.path(), "dev");
        REQUIRE(scan.databases.size() == 2);
        std::set<std::string> a, b;
        for (const auto& r : flatten::flatten_table(scan.databases[0], "t", ingest::read_all_rows(scan.databases[0], "t")))
            a.insert(r.uid);
        for (const auto& r : flatten::flatten_table(scan.databases[1], "t", ingest::read_all_rows(scan.databases[1], "t")))
            b.insert(r.uid);
        CHECK(a.size() == 20);
        CHECK(b.size() == 20);
        std::vector<std::string> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        CHECK(common.empty());
    }
}
