#include "slicetype/project.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace slicetype {

std::string Callable::key() const {
    return std::to_string(unit_index) + ":" + std::to_string(signature_id);
}

std::string module_name_for_path(const std::string &relative_path) {
    std::string p = relative_path;
    if (p.size() > 3 && p.compare(p.size() - 3, 3, ".py") == 0) {
        p.resize(p.size() - 3);
    }
    std::replace(p.begin(), p.end(), '\\', '/');
    const std::string init = "/__init__";
    if (p.size() > init.size() && p.compare(p.size() - init.size(), init.size(), init) == 0) {
        p.resize(p.size() - init.size());
    } else if (p == "__init__") {
        p.clear();
    }
    std::replace(p.begin(), p.end(), '/', '.');
    return p;
}

Project Project::load(const std::string &root_dir, Diagnostics &diags) {
    fs::path root(root_dir);
    if (!fs::exists(root)) {
        throw NotFoundError("project directory not found: " + root_dir);
    }
    std::vector<std::pair<std::string, std::string>> sources;
    for (const auto &entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".py") {
            continue;
        }
        std::ifstream in(entry.path(), std::ios::binary);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::string rel = fs::relative(entry.path(), root).generic_string();
        sources.emplace_back(std::move(rel), std::move(text));
    }
    return from_sources(sources, diags);
}

Project Project::from_sources(const std::vector<std::pair<std::string, std::string>> &path_text,
                              Diagnostics &diags) {
    Project project;
    auto sorted = path_text;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto &a, const auto &b) { return a.first < b.first; });
    for (const auto &[path, text] : sorted) {
        project.units_.push_back(parse_source(text, path));
    }
    project.build_indexes(diags);
    return project;
}

void Project::build_indexes(Diagnostics &diags) {
    module_names_.clear();
    for (int i = 0; i < unit_count(); ++i) {
        const std::string &path = units_[static_cast<std::size_t>(i)].path;
        path_to_unit_[path] = i;
        std::string mod = module_name_for_path(path);
        module_names_.push_back(mod);
        if (!mod.empty() && !module_to_unit_.emplace(mod, i).second) {
            diags.warn("duplicate module name '" + mod + "'", path);
        }
    }
    imports_.clear();
    for (int i = 0; i < unit_count(); ++i) {
        imports_.push_back(resolve_imports(units_[static_cast<std::size_t>(i)], *this));
    }
}

int Project::unit_index(const std::string &path) const {
    auto it = path_to_unit_.find(path);
    return it == path_to_unit_.end() ? -1 : it->second;
}

int Project::find_unit(const std::string &spec) const {
    if (int i = unit_index(spec); i >= 0) {
        return i;
    }
    if (int i = unit_index(spec + ".py"); i >= 0) {
        return i;
    }
    if (int i = unit_of_module(spec); i >= 0) {
        return i;
    }
    // last resort: unique suffix match on the path
    int found = -1;
    for (const auto &[path, idx] : path_to_unit_) {
        if (path.size() >= spec.size() &&
            path.compare(path.size() - spec.size(), spec.size(), spec) == 0) {
            if (found >= 0) {
                return -1; // ambiguous
            }
            found = idx;
        }
    }
    return found;
}

const std::string &Project::module_name(int unit_index) const {
    return module_names_.at(static_cast<std::size_t>(unit_index));
}

int Project::unit_of_module(const std::string &module) const {
    auto it = module_to_unit_.find(module);
    return it == module_to_unit_.end() ? -1 : it->second;
}

const std::vector<ImportEdge> &Project::imports_of(int unit_index) const {
    return imports_.at(static_cast<std::size_t>(unit_index));
}

namespace {

void collect_unit_callables(const Project &project, int unit_idx,
                            const std::vector<std::string> *symbols,
                            const std::string &name, std::vector<Callable> &out) {
    const SourceUnit &unit = project.unit(unit_idx);
    auto exposed = [&](const std::string &decl_name) {
        return symbols == nullptr || symbols->empty() ||
               std::find(symbols->begin(), symbols->end(), decl_name) != symbols->end();
    };
    for (const auto &fn : unit.functions) {
        if (fn.name == name && exposed(fn.name)) {
            Callable c;
            c.unit_index = unit_idx;
            c.fn = &fn;
            c.signature_id = fn.signature_id;
            c.line = unit.statements[static_cast<std::size_t>(fn.signature_id)].line;
            out.push_back(c);
        }
    }
    for (const auto &cls : unit.classes) {
        if (cls.name == name && exposed(cls.name)) {
            Callable c;
            c.unit_index = unit_idx;
            c.is_constructor = true;
            c.class_name = cls.name;
            c.class_signature_id = cls.signature_id;
            c.fn = cls.constructor();
            c.signature_id = c.fn != nullptr ? c.fn->signature_id : cls.signature_id;
            c.line = unit.statements[static_cast<std::size_t>(cls.signature_id)].line;
            out.push_back(c);
        }
        if (!exposed(cls.name)) {
            continue;
        }
        // methods are callable through instances of an exposed class
        for (const auto &m : cls.methods) {
            if (m.name == name) {
                Callable c;
                c.unit_index = unit_idx;
                c.fn = &m;
                c.signature_id = m.signature_id;
                c.line = unit.statements[static_cast<std::size_t>(m.signature_id)].line;
                out.push_back(c);
            }
        }
    }
}

} // namespace

std::vector<Callable> Project::visible_callables(int unit_index, const std::string &name) const {
    std::vector<Callable> out;
    collect_unit_callables(*this, unit_index, nullptr, name, out);
    for (const auto &edge : imports_of(unit_index)) {
        if (edge.kind != ImportKind::Project) {
            continue;
        }
        int target = this->unit_index(edge.to_path);
        if (target < 0 || target == unit_index) {
            continue;
        }
        const std::vector<std::string> *symbols = edge.symbols.empty() ? nullptr : &edge.symbols;
        collect_unit_callables(*this, target, symbols, name, out);
    }
    std::sort(out.begin(), out.end(), [this](const Callable &a, const Callable &b) {
        const std::string &pa = unit(a.unit_index).path;
        const std::string &pb = unit(b.unit_index).path;
        return std::tie(pa, a.line, a.signature_id) < std::tie(pb, b.line, b.signature_id);
    });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const Callable &a, const Callable &b) {
                              return a.unit_index == b.unit_index && a.signature_id == b.signature_id &&
                                     a.is_constructor == b.is_constructor;
                          }),
              out.end());
    return out;
}

std::vector<std::pair<int, const ClassDecl *>> Project::all_classes() const {
    std::vector<std::pair<int, const ClassDecl *>> out;
    for (int i = 0; i < unit_count(); ++i) {
        for (const auto &cls : units_[static_cast<std::size_t>(i)].classes) {
            out.emplace_back(i, &cls);
        }
    }
    return out;
}

std::vector<ImportEdge> resolve_imports(const SourceUnit &unit, const Project &project) {
    std::vector<ImportEdge> edges;
    for (const auto &decl : unit.imports) {
        ImportEdge edge;
        edge.from_path = unit.path;
        edge.symbols = decl.symbols;

        const std::string &module = decl.module;
        int target = -1;
        bool handled = false;
        if (!module.empty() && module[0] == '.') {
            // relative import: resolve against the importing file's directory
            std::size_t dots = 0;
            while (dots < module.size() && module[dots] == '.') {
                ++dots;
            }
            fs::path base = fs::path(unit.path).parent_path();
            for (std::size_t k = 1; k < dots; ++k) {
                base = base.parent_path();
            }
            std::string rest = module.substr(dots);
            std::replace(rest.begin(), rest.end(), '.', '/');
            fs::path candidate = rest.empty() ? base : base / rest;
            std::string as_file = candidate.generic_string() + ".py";
            std::string as_pkg = (candidate / "__init__.py").generic_string();
            target = project.unit_index(as_file);
            if (target < 0) {
                target = project.unit_index(as_pkg);
            }
        } else {
            target = project.unit_of_module(module);
            if (target < 0 && !decl.symbols.empty()) {
                // `from pkg import mod` where mod is itself a project module
                for (const auto &sym : decl.symbols) {
                    int sub = project.unit_of_module(module + "." + sym);
                    if (sub >= 0) {
                        ImportEdge sub_edge;
                        sub_edge.from_path = unit.path;
                        sub_edge.kind = ImportKind::Project;
                        sub_edge.to_path = project.unit(sub).path;
                        edges.push_back(std::move(sub_edge));
                        handled = true;
                    }
                }
            }
        }
        if (target >= 0) {
            edge.kind = ImportKind::Project;
            edge.to_path = project.unit(target).path;
        } else if (handled) {
            continue;
        } else {
            edge.kind = ImportKind::External;
            std::string pkg = module;
            while (!pkg.empty() && pkg[0] == '.') {
                pkg.erase(pkg.begin());
            }
            std::size_t dot = pkg.find('.');
            edge.package = dot == std::string::npos ? pkg : pkg.substr(0, dot);
        }
        edges.push_back(std::move(edge));
    }
    return edges;
}

} // namespace slicetype
