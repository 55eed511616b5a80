#pragma once

#include "slicetype/project.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace slicetype::test {

inline std::string fixture_path(const std::string &rel) {
    return std::string(SLICETYPE_FIXTURE_DIR) + "/" + rel;
}

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline Project load_fig1() {
    Diagnostics diags;
    return Project::load(fixture_path("fig1"), diags);
}

inline Project project_from(std::vector<std::pair<std::string, std::string>> sources) {
    Diagnostics diags;
    return Project::from_sources(sources, diags);
}

} // namespace slicetype::test
