#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "scenforge/genpipe.hpp"

namespace scenforge {

namespace fs = std::filesystem;

void BackendConfig::validate() const {
  if (sample_count < 1) throw ConfigError("sample_count must be at least 1");
  if (mode == Mode::kReplay && replay_dir.empty())
    throw ConfigError("replay backend needs a fixture directory");
  if (mode == Mode::kHttpChat && endpoint.empty()) throw ConfigError("http backend needs an endpoint");
  if (!(timeout_seconds > 0.0)) throw ConfigError("timeout_seconds must be positive");
}

ReplayBackend::ReplayBackend(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  if (!fs::is_directory(dir_, ec)) throw ReplayError("replay directory not found: " + dir_);
  for (const auto& entry : fs::directory_iterator(dir_))
    if (entry.is_regular_file()) files_.push_back(entry.path().string());
  std::sort(files_.begin(), files_.end());
  if (files_.empty()) throw ReplayError("replay directory has no fixtures: " + dir_);
}

std::vector<std::string> ReplayBackend::complete(const std::string&, std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m; ++i) {
    const std::string& path = files_[cursor_];
    cursor_ = (cursor_ + 1) % files_.size();
    try {
      out.push_back(read_file(path));
    } catch (const Error&) {
      throw ReplayError("replay fixture unreadable: " + path);
    }
  }
  return out;
}

HttpChatBackend::HttpChatBackend(BackendConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::string HttpChatBackend::request_body(const BackendConfig& cfg, const std::string& prompt, std::size_t n) {
  nlohmann::ordered_json j;
  j["model"] = cfg.model;
  j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  j["temperature"] = cfg.temperature;
  j["n"] = n;
  return j.dump();
}

std::vector<std::string> HttpChatBackend::parse_response(std::string_view body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("response is not a JSON object");
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty())
    throw ProtocolError("response has no choices");
  std::vector<std::string> out;
  for (const auto& c : *choices) {
    const auto* content = c.is_object() && c.contains("message") && c["message"].is_object()
                              ? &c["message"]["content"]
                              : nullptr;
    if (!content || !content->is_string()) throw ProtocolError("choice lacks message.content");
    out.push_back(content->get<std::string>());
  }
  return out;
}

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint is not an absolute URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

std::vector<std::string> HttpChatBackend::complete(const std::string& prompt, std::size_t m) {
  const Endpoint ep = split_url(cfg_.endpoint);
  httplib::Client client(ep.base);
  const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (const char* key = std::getenv("SCENFORGE_API_KEY"); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  std::vector<std::string> out;
  // some servers ignore n; keep asking for the remainder
  for (std::size_t round = 0; out.size() < m && round < m; ++round) {
    auto res = client.Post(ep.path, headers, request_body(cfg_, prompt, m - out.size()), "application/json");
    if (!res) throw TransportError("request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status >= 400)
      throw TransportError("backend returned HTTP " + std::to_string(res->status) + " from " + cfg_.endpoint);
    for (auto& text : parse_response(res->body)) {
      if (out.size() < m) out.push_back(std::move(text));
    }
  }
  return out;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  cfg.validate();
  if (cfg.mode == BackendConfig::Mode::kReplay) return std::make_unique<ReplayBackend>(cfg.replay_dir);
  return std::make_unique<HttpChatBackend>(cfg);
}

}  // namespace scenforge
