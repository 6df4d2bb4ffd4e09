#include "dfkg/run_store.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>

#include "dfkg/error.hpp"
#include "dfkg/util.hpp"

namespace dfkg::store {

namespace fs = std::filesystem;

std::size_t stage_index(std::string_view stage) {
    for (std::size_t i = 0; i < kStages.size(); ++i)
        if (kStages[i] == stage) return i;
    throw Error(ErrorCode::InvalidConfig, "unknown stage '" + std::string(stage) + "'");
}

bool RunRecord::complete(std::string_view stage) const {
    auto it = stages.find(stage);
    return it != stages.end() && it->second.status == "complete";
}

std::string RunRecord::last_stage() const {
    std::string last;
    for (auto s : kStages)
        if (complete(s)) last = std::string(s);
    return last;
}

nlohmann::ordered_json to_json(const RunRecord& r) {
    nlohmann::ordered_json j;
    j["run_id"] = r.run_id;
    j["device_id"] = r.device_id;
    j["created_at"] = r.created_at;
    j["engine"] = r.engine;
    j["config"] = r.config;
    j["config_hash"] = r.config_hash;
    nlohmann::ordered_json stages = nlohmann::ordered_json::object();
    for (auto s : kStages) {
        StageStatus st;
        if (auto it = r.stages.find(s); it != r.stages.end()) st = it->second;
        nlohmann::ordered_json o;
        o["status"] = st.status;
        o["config_hash"] = st.config_hash;
        o["completed_at"] = st.completed_at;
        stages[std::string(s)] = std::move(o);
    }
    j["stages"] = std::move(stages);
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.counts) counts[k] = v;
    j["counts"] = std::move(counts);
    return j;
}

RunRecord run_from_json(const nlohmann::json& j) {
    try {
        RunRecord r;
        r.run_id = j.at("run_id").get<std::string>();
        r.device_id = j.value("device_id", std::string{});
        r.created_at = j.value("created_at", std::string{});
        r.engine = j.value("engine", std::string{});
        if (j.contains("config")) r.config = nlohmann::ordered_json::parse(j["config"].dump());
        r.config_hash = j.value("config_hash", std::string{});
        if (j.contains("stages"))
            for (const auto& [name, o] : j["stages"].items())
                r.stages[name] = {o.value("status", std::string("pending")), o.value("config_hash", std::string{}),
                                  o.value("completed_at", std::string{})};
        if (j.contains("counts"))
            for (const auto& [name, v] : j["counts"].items()) r.counts[name] = v.get<std::uint64_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed run.json: ") + e.what());
    }
}

bool RunDir::has_record() const { return fs::is_regular_file(file("run.json")); }

RunRecord RunDir::load() const {
    if (!has_record()) throw Error(ErrorCode::RunNotFound, "no run.json in " + root_.string());
    auto j = nlohmann::json::parse(read_file(file("run.json").string()), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidInput, "run.json is not valid JSON");
    return run_from_json(j);
}

void RunDir::save(const RunRecord& record) const { write("run.json", to_json(record).dump(2) + "\n"); }

std::string RunDir::read(std::string_view name) const { return read_file(file(name).string()); }

void RunDir::write(std::string_view name, std::string_view bytes) const {
    write_file_atomic(file(name).string(), bytes);
}

bool RunDir::exists(std::string_view name) const { return fs::exists(file(name)); }

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    for (int attempt = 0; attempt < 2; ++attempt) {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd >= 0) {
            std::string pid = std::to_string(::getpid()) + "\n";
            ssize_t n = ::write(fd, pid.data(), pid.size());
            (void)n;
            ::close(fd);
            return;
        }
        if (errno != EEXIST) throw Error(ErrorCode::Io, "cannot create " + path_.string() + ": " + std::strerror(errno));
        long owner = 0;
        try {
            owner = std::stol(read_file(path_.string()));
        } catch (...) {
            owner = 0;
        }
        bool alive = owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM);
        if (alive) throw Error(ErrorCode::RunLocked, "run directory is locked by pid " + std::to_string(owner));
        std::error_code ec;
        fs::remove(path_, ec);
    }
    throw Error(ErrorCode::RunLocked, "could not acquire " + path_.string());
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

std::vector<std::pair<RunRecord, fs::path>> list_runs(const fs::path& data_dir) {
    std::vector<std::pair<RunRecord, fs::path>> out;
    auto consider = [&](const fs::path& dir) {
        RunDir rd(dir);
        if (!rd.has_record()) return;
        try {
            out.emplace_back(rd.load(), dir);
        } catch (const Error&) {
        }
    };
    std::error_code ec;
    if (!fs::is_directory(data_dir, ec)) return out;
    consider(data_dir);
    for (const auto& entry : fs::directory_iterator(data_dir, ec))
        if (entry.is_directory()) consider(entry.path());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.first.run_id, a.second) < std::tie(b.first.run_id, b.second);
    });
    return out;
}

RunDir find_run(const fs::path& data_dir, std::string_view run_id) {
    for (auto& [rec, dir] : list_runs(data_dir))
        if (rec.run_id == run_id) return RunDir(dir);
    throw Error(ErrorCode::RunNotFound, "no run '" + std::string(run_id) + "'");
}

}  // namespace dfkg::store
