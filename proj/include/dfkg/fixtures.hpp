#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dfkg/graph.hpp"
#include "dfkg/run_store.hpp"

namespace dfkg::fixtures {

inline constexpr std::string_view kDefaultDeviceId = "CTF2021-NOTE10";
/// Modification time stamped on every fixture database (2021-07-20T00:00:00Z).
inline constexpr std::int64_t kSnapshotEpoch = 1626739200;

/// Writes a synthetic image under `root` with seven artifacts planted on
/// rows that survive sampling at `sample_interval`, plus excluded
/// system data, a disguised database, a non-database file and a WAL sidecar.
/// Returns the ground-truth manifest (artifact values with their uids).
nlohmann::ordered_json build_planted_image(const std::filesystem::path& root, const std::string& device_id,
                                          std::uint64_t sample_interval = 6);

/// Writes a run directory whose refined stage yields 72 hypothesis
/// instances, then completes consolidate, graph and evaluate.
store::RunRecord build_review_run(const std::filesystem::path& dir, const std::string& device_id);

struct InstanceRef {
    std::string edge_id;
    std::string uid;
};

/// The four hypothesis instances the review fixture marks invalid.
std::vector<InstanceRef> review_rejected_instances(const graph::ForensicGraph& g);

}  // namespace dfkg::fixtures
