#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfkg/evaluate.hpp"
#include "dfkg/ingest.hpp"
#include "dfkg/run_store.hpp"

namespace dfkg::pipeline {

struct RunConfig {
    std::filesystem::path root;
    std::string device_id;
    std::uint64_t sample_interval = 6;
    int min_confidence = 5;
    std::string engine = "mock";  // mock | remote
    std::string endpoint;
    std::string model = "gpt-4";
    std::string zone = "America/New_York";
    std::optional<std::vector<std::string>> denylist;  // nullopt = defaults
    std::filesystem::path out;
    std::filesystem::path ground_truth;  // optional manifest
    bool strict = false;
    std::size_t batch_size = 40;
    std::size_t max_in_flight = 4;

    /// Throws Error(InvalidConfig).
    void validate() const;
    const std::vector<std::string>& effective_denylist() const;
    /// Parameters that determine outputs; excludes root and out so the same
    /// evidence processed from another location hashes the same.
    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

struct PipelineOptions {
    std::optional<std::string> stop_after;  // stage name from store::kStages
    std::string ground_truth_bytes;         // overrides reading cfg.ground_truth when non-empty
};

/// Runs ingest through evaluate into cfg.out, skipping stages already
/// complete under the same configuration. Stage failures are rethrown with
/// the stage name prefixed to the message.
store::RunRecord run_pipeline(const RunConfig& cfg, const PipelineOptions& options = {});

/// Hash of the output-determining configuration plus ground-truth bytes.
std::string config_hash(const RunConfig& cfg, std::string_view ground_truth_bytes);

/// Everything evaluate needs, loaded from a run directory.
struct RunData {
    store::RunRecord record;
    std::vector<ingest::DatabaseRef> databases;
    std::string snapshot_time;
    flatten::RecordIndex index;
    std::vector<refine::RefinedArtifact> artifacts;
    std::vector<consolidate::EvidenceRecord> evidence;
    graph::ForensicGraph graph;
    std::optional<evaluate::GroundTruth> ground_truth;
    verdicts::VerdictStore verdicts;
};

/// Throws Error(StageNotReady) when the run has not been graphed.
RunData load_run(const store::RunDir& dir);

/// metrics_report.json content recomputed from the run's current files.
nlohmann::ordered_json metrics_document(const RunData& data, bool strict);

/// Snapshot time of the evidence (latest database mtime), ISO-8601 UTC.
std::string evidence_snapshot_time(const std::vector<ingest::DatabaseRef>& databases);

}  // namespace dfkg::pipeline
