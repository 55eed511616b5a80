#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace slicetype {

/// Non-fatal findings collected while parsing, resolving calls, merging
/// knowledge bases, or talking to a generation backend.
struct Diagnostic {
    enum class Severity { Note, Warning, Error };
    Severity severity = Severity::Warning;
    std::string message;
    std::string path;   // empty when not file-related
    int line = 0;       // 1-based, 0 when unknown

    std::string str() const;
};

class Diagnostics {
  public:
    void note(std::string message, std::string path = {}, int line = 0);
    void warn(std::string message, std::string path = {}, int line = 0);
    void error(std::string message, std::string path = {}, int line = 0);

    const std::vector<Diagnostic> &all() const { return items_; }
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }

  private:
    std::vector<Diagnostic> items_;
};

/// Base class for all domain errors raised by the toolchain.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Source text that does not lex/parse within the supported subset.
struct ParseError : Error {
    ParseError(const std::string &message, std::string path, int line, int column);
    std::string path;
    int line = 0;
    int column = 0;
};

/// Input bytes that do not decode as UTF-8.
struct EncodingError : Error {
    using Error::Error;
};

/// A requested entity (variable, file, module) does not exist.
struct NotFoundError : Error {
    using Error::Error;
};

/// A structured input file (manifest, dataset, predictions) is malformed.
struct FormatError : Error {
    FormatError(const std::string &message, std::string path = {}, int line = 0);
    std::string path;
    int line = 0;
};

/// The generation backend failed after exhausting retries.
struct BackendError : Error {
    using Error::Error;
};

} // namespace slicetype
