#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dfkg::store {

inline constexpr std::array<std::string_view, 6> kStages = {"ingested",     "flattened", "refined",
                                                            "consolidated", "graphed",   "evaluated"};

/// Index of a stage name in kStages; throws Error(InvalidConfig) for unknown names.
std::size_t stage_index(std::string_view stage);

struct StageStatus {
    std::string status = "pending";  // pending | complete
    std::string config_hash;
    std::string completed_at;
};

struct RunRecord {
    std::string run_id;
    std::string device_id;
    std::string created_at;
    std::string engine;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::string config_hash;
    std::map<std::string, StageStatus, std::less<>> stages;
    std::map<std::string, std::uint64_t, std::less<>> counts;

    bool complete(std::string_view stage) const;
    /// Highest complete stage in order, or empty.
    std::string last_stage() const;
};

nlohmann::ordered_json to_json(const RunRecord& r);
RunRecord run_from_json(const nlohmann::json& j);

/// A run directory and the fixed names of the files inside it.
class RunDir {
public:
    explicit RunDir(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path file(std::string_view name) const { return root_ / std::string(name); }

    bool has_record() const;
    /// Throws Error(RunNotFound) when run.json is missing.
    RunRecord load() const;
    void save(const RunRecord& record) const;

    std::string read(std::string_view name) const;
    void write(std::string_view name, std::string_view bytes) const;
    bool exists(std::string_view name) const;

private:
    std::filesystem::path root_;
};

/// Exclusive lock on a run directory through an O_EXCL lockfile holding the
/// owner's pid. A lockfile whose pid is no longer alive is taken over.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& dir);  // throws Error(RunLocked)
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Run directories directly under `data_dir` (or `data_dir` itself when it
/// is a run directory), sorted by run id.
std::vector<std::pair<RunRecord, std::filesystem::path>> list_runs(const std::filesystem::path& data_dir);

/// Throws Error(RunNotFound).
RunDir find_run(const std::filesystem::path& data_dir, std::string_view run_id);

}  // namespace dfkg::store
