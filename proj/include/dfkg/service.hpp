#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

namespace dfkg::service {

inline constexpr std::string_view kApiPrefix = "/api/v1";

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::map<std::string, std::string> headers;
};

/// HTTP-framework-independent request handling over a directory of runs.
/// Reads never modify run directories; verdict writes are serialized per run.
class Service {
public:
    explicit Service(std::filesystem::path data_dir);

    /// `path` is already percent-decoded and carries no query string. Header
    /// names are matched case-insensitively.
    Response handle(std::string_view method, std::string_view path, std::string_view body,
                    const std::map<std::string, std::string>& headers = {},
                    const std::map<std::string, std::string>& query = {});

    const std::filesystem::path& data_dir() const { return data_dir_; }

private:
    Response list_runs();
    Response get_run(const std::string& run_id);
    Response get_graph(const std::string& run_id, const std::map<std::string, std::string>& headers);
    Response get_hypotheses(const std::string& run_id);
    Response get_metrics(const std::string& run_id);
    Response get_provenance(const std::string& uid, const std::string& run_filter);
    Response post_verdict(const std::string& run_id, std::string_view body);

    std::mutex& run_mutex(const std::string& run_id);

    std::filesystem::path data_dir_;
    std::mutex mutexes_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> mutexes_;
};

/// Lowercase hex SHA-256 of the exact payload bytes, quoted for ETag use.
std::string etag_for(std::string_view payload);

/// HTTP front end for Service. `ui_dir`, when non-empty, is served as static
/// files at "/".
class HttpServer {
public:
    HttpServer(std::filesystem::path data_dir, std::filesystem::path ui_dir = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Port 0 picks an ephemeral port. Returns the bound port; throws Error(Io).
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

void serve(const std::filesystem::path& data_dir, const std::string& host, int port,
           const std::filesystem::path& ui_dir = {});

}  // namespace dfkg::service
