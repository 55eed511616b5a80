#pragma once

#include "slicetype/source_model.hpp"

#include <map>
#include <string>
#include <vector>

namespace slicetype {

/// A callable visible at some call site: a free function, a method, or a
/// class constructor.
struct Callable {
    int unit_index = -1;
    const FunctionDecl *fn = nullptr; // null for a class without __init__
    bool is_constructor = false;
    std::string class_name;      // set when is_constructor
    int class_signature_id = -1; // set when is_constructor
    int signature_id = -1;       // def line (or class line for bare ctor)
    int line = 0;

    std::string key() const;
};

/// Immutable index over all parsed units of one project. Units are ordered
/// by path so downstream artifacts are deterministic.
class Project {
  public:
    static Project load(const std::string &root_dir, Diagnostics &diags);
    static Project from_sources(const std::vector<std::pair<std::string, std::string>> &path_text,
                                Diagnostics &diags);

    const std::vector<SourceUnit> &units() const { return units_; }
    const SourceUnit &unit(int index) const { return units_.at(static_cast<std::size_t>(index)); }
    int unit_count() const { return static_cast<int>(units_.size()); }

    /// Index by exact path; -1 when absent.
    int unit_index(const std::string &path) const;
    /// Accepts a path, a path without extension, or a dotted module name.
    int find_unit(const std::string &spec) const;

    /// Dotted module name of a unit ("pkg.mod" for pkg/mod.py).
    const std::string &module_name(int unit_index) const;
    int unit_of_module(const std::string &module) const;

    const std::vector<ImportEdge> &imports_of(int unit_index) const;

    /// Callables visible from `unit_index` with the given bare name:
    /// same-file declarations plus declarations exposed by its imports.
    /// Ordered by (file path, line).
    std::vector<Callable> visible_callables(int unit_index, const std::string &name) const;

    /// All classes in the project paired with their unit index.
    std::vector<std::pair<int, const ClassDecl *>> all_classes() const;

  private:
    void build_indexes(Diagnostics &diags);

    std::vector<SourceUnit> units_;
    std::vector<std::string> module_names_;
    std::map<std::string, int> module_to_unit_;
    std::map<std::string, int> path_to_unit_;
    std::vector<std::vector<ImportEdge>> imports_;
};

/// Module name for a project-relative path: "a/b.py" -> "a.b".
std::string module_name_for_path(const std::string &relative_path);

} // namespace slicetype
