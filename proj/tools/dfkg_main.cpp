#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dfkg/error.hpp"
#include "dfkg/fixtures.hpp"
#include "dfkg/ingest.hpp"
#include "dfkg/pipeline.hpp"
#include "dfkg/run_store.hpp"
#include "dfkg/service.hpp"
#include "dfkg/util.hpp"

namespace fs = std::filesystem;
using namespace dfkg;

namespace {

struct ConfigFlags {
    std::string root;
    std::string device_id;
    std::optional<std::uint64_t> sample_interval;
    std::optional<int> min_confidence;
    std::string engine;
    std::string endpoint;
    std::string model;
    std::string zone;
    std::vector<std::string> denylist;
    bool no_denylist = false;
    std::string out;
    std::string ground_truth;
    bool strict = false;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> max_in_flight;
    std::string stop_after;

    void add_to(CLI::App* app, bool with_stop_after) {
        app->add_option("--root", root, "Image root directory");
        app->add_option("--device-id", device_id, "Device identifier");
        app->add_option("--sample-interval", sample_interval, "Keep every k-th unified record (default 6)");
        app->add_option("--min-confidence", min_confidence, "Artifact confidence threshold 1..10 (default 5)");
        app->add_option("--engine", engine, "Refinement engine")->check(CLI::IsMember({"mock", "remote"}));
        app->add_option("--endpoint", endpoint, "Chat-completion URL for the remote engine");
        app->add_option("--model", model, "Model name for the remote engine");
        app->add_option("--zone", zone, "IANA zone for timestamp rendering");
        app->add_option("--deny", denylist, "Package path prefix to exclude (repeatable; replaces defaults)");
        app->add_flag("--no-denylist", no_denylist, "Exclude nothing");
        app->add_option("--out", out, "Run directory")->required();
        app->add_option("--ground-truth", ground_truth, "Ground-truth manifest");
        app->add_flag("--strict", strict, "Count pending hypotheses as incorrect");
        app->add_option("--batch-size", batch_size, "Records per refinement call");
        app->add_option("--max-in-flight", max_in_flight, "Concurrent refinement calls");
        if (with_stop_after)
            app->add_option("--stop-after", stop_after, "Last stage to run")
                ->check(CLI::IsMember({"ingested", "flattened", "refined", "consolidated", "graphed", "evaluated"}));
    }

    // Flags override the configuration recorded in an existing run directory.
    std::pair<pipeline::RunConfig, pipeline::PipelineOptions> resolve() const {
        pipeline::RunConfig cfg;
        pipeline::PipelineOptions opts;
        store::RunDir dir{fs::path(out)};
        if (dir.has_record()) cfg = pipeline::RunConfig::from_json(dir.load().config);
        cfg.out = out;
        if (!root.empty()) cfg.root = root;
        if (!device_id.empty()) cfg.device_id = device_id;
        if (cfg.device_id.empty()) cfg.device_id = std::string(fixtures::kDefaultDeviceId);
        if (sample_interval) cfg.sample_interval = *sample_interval;
        if (min_confidence) cfg.min_confidence = *min_confidence;
        if (!engine.empty()) cfg.engine = engine;
        if (!endpoint.empty()) cfg.endpoint = endpoint;
        if (!model.empty()) cfg.model = model;
        if (!zone.empty()) cfg.zone = zone;
        if (no_denylist) cfg.denylist = std::vector<std::string>{};
        else if (!denylist.empty()) cfg.denylist = denylist;
        if (!ground_truth.empty()) cfg.ground_truth = ground_truth;
        if (strict) cfg.strict = true;
        if (batch_size) cfg.batch_size = *batch_size;
        if (max_in_flight) cfg.max_in_flight = *max_in_flight;
        if (cfg.ground_truth.empty() && dir.exists("ground_truth.json")) opts.ground_truth_bytes = dir.read("ground_truth.json");
        if (!stop_after.empty()) opts.stop_after = stop_after;
        return {cfg, opts};
    }
};

void print_summary(const store::RunRecord& rec, const fs::path& out) {
    nlohmann::ordered_json j;
    j["run_id"] = rec.run_id;
    j["out"] = out.string();
    j["last_stage"] = rec.last_stage();
    j["counts"] = rec.counts;
    std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("dfkg"));
    spdlog::set_pattern("%H:%M:%S %^%l%$ %v");

    CLI::App app{"Forensic knowledge-graph pipeline over mobile database images"};
    app.require_subcommand(1);
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

    ConfigFlags run_flags;
    auto* run = app.add_subcommand("run", "Run the pipeline (resumes completed stages)");
    run_flags.add_to(run, true);

    struct StageCommand {
        const char* name;
        const char* stage;
        const char* help;
        ConfigFlags flags;
        CLI::App* cmd = nullptr;
    };
    StageCommand stages[] = {
        {"scan", "ingested", "Locate SQLite databases and write the manifest", {}},
        {"flatten", "flattened", "Flatten tables and write the unified record set", {}},
        {"refine", "refined", "Extract artifacts from unified records", {}},
        {"graph", "graphed", "Consolidate artifacts and build the knowledge graph", {}},
        {"evaluate", "evaluated", "Compute metrics against the ground truth", {}},
    };
    for (auto& s : stages) {
        s.cmd = app.add_subcommand(s.name, s.help);
        s.flags.add_to(s.cmd, false);
    }

    std::string data_dir = ".", host = "127.0.0.1", ui_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Serve runs over the HTTP API");
    serve->add_option("--data-dir", data_dir, "Run directory or directory of runs");
    serve->add_option("--host", host, "Bind address (default loopback)");
    serve->add_option("--port", port, "Port, 0 for ephemeral")->check(CLI::Range(0, 65535));
    serve->add_option("--ui-dir", ui_dir, "Static review UI assets");

    std::string fixture_out, fixture_gt, review_dir, fixture_device = std::string(fixtures::kDefaultDeviceId);
    std::uint64_t fixture_interval = 6;
    auto* fixture = app.add_subcommand("fixture-gen", "Write synthetic evidence fixtures");
    fixture->add_option("--out", fixture_out, "Image root for the planted-artifact image");
    fixture->add_option("--ground-truth", fixture_gt, "Where to write the image's ground truth");
    fixture->add_option("--sample-interval", fixture_interval, "Interval the planted rows must survive");
    fixture->add_option("--device-id", fixture_device, "Device identifier");
    fixture->add_option("--review-run", review_dir, "Write a complete hypothesis-review run here");

    CLI11_PARSE(app, argc, argv);
    if (verbose) spdlog::set_level(spdlog::level::debug);
    if (quiet) spdlog::set_level(spdlog::level::warn);

    try {
        if (*run) {
            auto [cfg, opts] = run_flags.resolve();
            print_summary(pipeline::run_pipeline(cfg, opts), cfg.out);
            return 0;
        }
        for (auto& s : stages) {
            if (!*s.cmd) continue;
            auto [cfg, opts] = s.flags.resolve();
            opts.stop_after = s.stage;
            auto rec = pipeline::run_pipeline(cfg, opts);
            if (std::string(s.stage) == "evaluated") std::cout << store::RunDir(cfg.out).read("metrics_report.json");
            else print_summary(rec, cfg.out);
            return 0;
        }
        if (*serve) {
            service::serve(data_dir, host, port, ui_dir);
            return 0;
        }
        if (*fixture) {
            if (fixture_out.empty() && review_dir.empty())
                throw Error(ErrorCode::InvalidConfig, "fixture-gen needs --out and/or --review-run");
            if (!fixture_out.empty()) {
                auto gt = fixtures::build_planted_image(fixture_out, fixture_device, fixture_interval);
                if (fixture_gt.empty()) std::cout << gt.dump(2) << "\n";
                else write_file_atomic(fixture_gt, gt.dump(2) + "\n");
            }
            if (!review_dir.empty()) print_summary(fixtures::build_review_run(review_dir, fixture_device), review_dir);
            return 0;
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
