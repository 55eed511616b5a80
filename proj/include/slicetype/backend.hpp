#pragma once

#include "slicetype/diagnostics.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace slicetype {

struct SamplingConfig {
    double temperature = 0.2;
    double top_p = 0.3;
    int n_samples = 20;
    int max_retries = 2; // additional attempts after the first failure
};

/// One completion per call; sampling loops and retries live in the pipeline.
class GenerationBackend {
  public:
    virtual ~GenerationBackend() = default;
    /// Returns the raw completion text. Throws BackendError on transport
    /// failure (retriable) and FormatError on an unusable response body.
    virtual std::string complete(const std::string &prompt, const SamplingConfig &config) = 0;
    virtual std::string name() const = 0;
};

/// Stable 64-bit FNV-1a hash of the prompt, hex-encoded; the mock file key.
std::string prompt_hash(const std::string &prompt);

/// Deterministic file-backed backend. The file maps prompt hashes to sample
/// lists; consecutive calls for the same prompt cycle through its list.
/// A "default" entry answers prompts with no matching hash.
///
///   { "by_hash": { "<hex>": ["Ggnn", ...] }, "default": ["int"] }
///
/// A bare JSON object of hash -> list (or a bare list, used for every
/// prompt) is accepted too.
class MockBackend : public GenerationBackend {
  public:
    static std::unique_ptr<MockBackend> from_file(const std::string &path);
    static std::unique_ptr<MockBackend> from_text(const std::string &json_text,
                                                  const std::string &origin);

    std::string complete(const std::string &prompt, const SamplingConfig &config) override;
    std::string name() const override { return "mock"; }

  private:
    std::map<std::string, std::vector<std::string>> by_hash_;
    std::vector<std::string> fallback_;
    std::map<std::string, std::size_t> cursor_;
    std::mutex mutex_;
};

/// Chat-completion client over HTTP. Reads base URL, key, and model from
/// the constructor; `make_backend` wires in the SLICETYPE_* environment.
class HttpBackend : public GenerationBackend {
  public:
    HttpBackend(std::string base_url, std::string api_key, std::string model,
                int timeout_seconds = 60);

    std::string complete(const std::string &prompt, const SamplingConfig &config) override;
    std::string name() const override { return "http"; }

  private:
    std::string host_;
    std::string path_prefix_;
    std::string api_key_;
    std::string model_;
    int port_ = 80;
    bool https_ = false;
    int timeout_seconds_;
};

/// `kind` is "mock" or "http". For http, base/key/model fall back to the
/// SLICETYPE_API_BASE, SLICETYPE_API_KEY, and SLICETYPE_MODEL variables.
std::unique_ptr<GenerationBackend> make_backend(const std::string &kind,
                                                const std::string &mock_file = {},
                                                const std::string &base_url = {},
                                                const std::string &api_key = {},
                                                const std::string &model = {});

} // namespace slicetype
