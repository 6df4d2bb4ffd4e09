#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "dfkg/error.hpp"
#include "dfkg/refine.hpp"
#include "dfkg/util.hpp"

namespace dfkg::refine {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint parse_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/\s]+)(/\S*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error(ErrorCode::InvalidConfig, "engine endpoint is not an http(s) URL: " + url);
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

std::string response_content(const std::string& body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_object()) {
        auto choices = j.find("choices");
        if (choices != j.end() && choices->is_array() && !choices->empty()) {
            const auto& first = (*choices)[0];
            if (first.contains("message") && first["message"].contains("content") &&
                first["message"]["content"].is_string())
                return first["message"]["content"].get<std::string>();
            if (first.contains("text") && first["text"].is_string()) return first["text"].get<std::string>();
        }
    }
    return body;
}

}  // namespace

RemoteEngine::RemoteEngine(RemoteOptions options) : options_(std::move(options)) {
    parse_endpoint(options_.endpoint);
    if (options_.max_attempts < 1) throw Error(ErrorCode::InvalidConfig, "max_attempts must be at least 1");
}

void RemoteEngine::audit(const std::vector<flatten::FlatRecord>& batch, int attempt, int status,
                         const std::string& body) {
    if (options_.audit_path.empty()) return;
    nlohmann::ordered_json entry;
    entry["timestamp"] = utc_now_iso8601();
    entry["engine"] = id();
    entry["attempt"] = attempt;
    entry["status"] = status;
    auto uids = nlohmann::ordered_json::array();
    for (const auto& r : batch) uids.push_back(r.uid);
    entry["batch_uids"] = std::move(uids);
    entry["raw_response"] = body;
    std::lock_guard lock(audit_mu_);
    append_line(options_.audit_path, entry.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

RefinementEngine::BatchResult RemoteEngine::refine(const std::vector<flatten::FlatRecord>& batch) {
    BatchResult result;
    Prompt prompt = build_prompt(batch);
    Endpoint ep = parse_endpoint(options_.endpoint);

    nlohmann::ordered_json request;
    request["model"] = options_.model;
    request["temperature"] = 0;
    request["messages"] = nlohmann::ordered_json::array(
        {{{"role", "system"}, {"content", prompt.instructions}}, {{"role", "user"}, {"content", prompt.data}}});
    const std::string body = request.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);

    httplib::Headers headers;
    if (const char* token = std::getenv(options_.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    std::set<std::string, std::less<>> uids;
    for (const auto& r : batch) uids.insert(r.uid);

    auto delay = options_.backoff;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        httplib::Client client(ep.origin);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        client.set_write_timeout(options_.timeout);
        auto res = client.Post(ep.path, headers, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            audit(batch, attempt, res->status, res->body);
            auto parsed = parse_refinement(response_content(res->body), uids, id());
            result.artifacts = std::move(parsed.artifacts);
            for (const auto& w : parsed.warnings)
                result.warnings.push_back("line " + std::to_string(w.line) + ": " + w.reason);
            return result;
        }
        int status = res ? res->status : 0;
        std::string reason = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
        audit(batch, attempt, status, res ? res->body : std::string{});
        result.warnings.push_back("attempt " + std::to_string(attempt) + " failed: " + reason);
        spdlog::warn("refinement call failed ({}), attempt {}/{}", reason, attempt, options_.max_attempts);
        if (attempt < options_.max_attempts) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
    result.refined = false;
    return result;
}

}  // namespace dfkg::refine
