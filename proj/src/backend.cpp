#include "slicetype/backend.hpp"

#include <cstdlib>
#include <fstream>

#include "httplib.h"
#include "json.hpp"

namespace slicetype {

using json = nlohmann::json;

std::string prompt_hash(const std::string &prompt) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : prompt) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char *digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

// ---------------------------------------------------------------------------
// MockBackend
// ---------------------------------------------------------------------------

std::unique_ptr<MockBackend> MockBackend::from_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("mock file not found: " + path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_text(text, path);
}

std::unique_ptr<MockBackend> MockBackend::from_text(const std::string &json_text,
                                                    const std::string &origin) {
    json parsed;
    try {
        parsed = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw FormatError(std::string("malformed mock file: ") + e.what(), origin);
    }
    auto backend = std::make_unique<MockBackend>();
    auto read_list = [](const json &j) {
        std::vector<std::string> out;
        for (const auto &v : j) {
            out.push_back(v.get<std::string>());
        }
        return out;
    };
    if (parsed.is_array()) {
        backend->fallback_ = read_list(parsed);
        return backend;
    }
    if (!parsed.is_object()) {
        throw FormatError("mock file must be a JSON object or array", origin);
    }
    const json &table = parsed.contains("by_hash") ? parsed.at("by_hash") : parsed;
    for (const auto &[key, value] : table.items()) {
        if (key == "default" || key == "by_hash") {
            continue;
        }
        backend->by_hash_[key] = read_list(value);
    }
    if (parsed.contains("default")) {
        backend->fallback_ = read_list(parsed.at("default"));
    }
    return backend;
}

std::string MockBackend::complete(const std::string &prompt, const SamplingConfig &config) {
    (void)config;
    std::string key = prompt_hash(prompt);
    std::lock_guard<std::mutex> lock(mutex_);
    const std::vector<std::string> *list = nullptr;
    auto it = by_hash_.find(key);
    if (it != by_hash_.end()) {
        list = &it->second;
    } else if (!fallback_.empty()) {
        list = &fallback_;
    }
    if (list == nullptr || list->empty()) {
        throw BackendError("mock file has no samples for prompt " + key);
    }
    std::size_t &cursor = cursor_[key];
    std::string out = (*list)[cursor % list->size()];
    ++cursor;
    return out;
}

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(std::string base_url, std::string api_key, std::string model,
                         int timeout_seconds)
    : api_key_(std::move(api_key)), model_(std::move(model)), timeout_seconds_(timeout_seconds) {
    std::string url = base_url;
    if (url.rfind("https://", 0) == 0) {
        https_ = true;
        url = url.substr(8);
        port_ = 443;
    } else if (url.rfind("http://", 0) == 0) {
        url = url.substr(7);
    }
    std::size_t slash = url.find('/');
    std::string authority = slash == std::string::npos ? url : url.substr(0, slash);
    path_prefix_ = slash == std::string::npos ? "" : url.substr(slash);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
        path_prefix_.pop_back();
    }
    std::size_t colon = authority.find(':');
    if (colon != std::string::npos) {
        host_ = authority.substr(0, colon);
        port_ = std::stoi(authority.substr(colon + 1));
    } else {
        host_ = authority;
    }
    if (host_.empty()) {
        throw BackendError("backend base URL missing a host");
    }
}

std::string HttpBackend::complete(const std::string &prompt, const SamplingConfig &config) {
    if (https_) {
        // the vendored client is built without TLS; keep the failure explicit
        throw BackendError("https endpoints are not supported by this build; "
                           "use an http proxy or gateway");
    }
    httplib::Client client(host_, port_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    json body = {
        {"model", model_},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
        {"temperature", config.temperature},
        {"top_p", config.top_p},
        {"n", 1},
    };
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
        throw BackendError("transport failure talking to " + host_ + ":" + std::to_string(port_));
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("backend returned HTTP " + std::to_string(res->status));
    }
    json parsed;
    try {
        parsed = json::parse(res->body);
    } catch (const json::parse_error &) {
        throw FormatError("backend response is not JSON");
    }
    try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception &) {
        throw FormatError("backend response missing choices[0].message.content");
    }
}

// ---------------------------------------------------------------------------

namespace {
std::string env_or(const char *name, const std::string &fallback) {
    const char *v = std::getenv(name);
    return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}
} // namespace

std::unique_ptr<GenerationBackend> make_backend(const std::string &kind, const std::string &mock_file,
                                                const std::string &base_url, const std::string &api_key,
                                                const std::string &model) {
    if (kind == "mock") {
        if (mock_file.empty()) {
            throw Error("mock backend requires --mock-file");
        }
        return MockBackend::from_file(mock_file);
    }
    if (kind == "http") {
        std::string base = !base_url.empty() ? base_url : env_or("SLICETYPE_API_BASE", "");
        std::string key = !api_key.empty() ? api_key : env_or("SLICETYPE_API_KEY", "");
        std::string mdl = !model.empty() ? model : env_or("SLICETYPE_MODEL", "");
        if (base.empty()) {
            throw Error("http backend requires --api-base or SLICETYPE_API_BASE");
        }
        if (mdl.empty()) {
            throw Error("http backend requires --model or SLICETYPE_MODEL");
        }
        return std::make_unique<HttpBackend>(base, key, mdl);
    }
    throw Error("unknown backend kind '" + kind + "' (expected http or mock)");
}

} // namespace slicetype
