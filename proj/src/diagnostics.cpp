#include "slicetype/diagnostics.hpp"

namespace slicetype {

namespace {
const char *severity_name(Diagnostic::Severity s) {
    switch (s) {
    case Diagnostic::Severity::Note: return "note";
    case Diagnostic::Severity::Warning: return "warning";
    case Diagnostic::Severity::Error: return "error";
    }
    return "?";
}
} // namespace

std::string Diagnostic::str() const {
    std::string out;
    if (!path.empty()) {
        out += path;
        if (line > 0) {
            out += ":" + std::to_string(line);
        }
        out += ": ";
    }
    out += severity_name(severity);
    out += ": ";
    out += message;
    return out;
}

void Diagnostics::note(std::string message, std::string path, int line) {
    items_.push_back({Diagnostic::Severity::Note, std::move(message), std::move(path), line});
}

void Diagnostics::warn(std::string message, std::string path, int line) {
    items_.push_back({Diagnostic::Severity::Warning, std::move(message), std::move(path), line});
}

void Diagnostics::error(std::string message, std::string path, int line) {
    items_.push_back({Diagnostic::Severity::Error, std::move(message), std::move(path), line});
}

ParseError::ParseError(const std::string &message, std::string path_, int line_, int column_)
    : Error(path_ + ":" + std::to_string(line_) + ":" + std::to_string(column_) + ": " + message),
      path(std::move(path_)), line(line_), column(column_) {}

FormatError::FormatError(const std::string &message, std::string path_, int line_)
    : Error(path_.empty() ? message : path_ + ":" + std::to_string(line_) + ": " + message),
      path(std::move(path_)), line(line_) {}

} // namespace slicetype
