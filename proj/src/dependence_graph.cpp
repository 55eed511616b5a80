#include "slicetype/dependence_graph.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <set>
#include <sstream>

namespace slicetype {

const char *to_string(EdgeKind kind) {
    switch (kind) {
    case EdgeKind::Data: return "data";
    case EdgeKind::Control: return "control";
    case EdgeKind::CallArg: return "call-arg";
    case EdgeKind::CallReturn: return "call-return";
    }
    return "?";
}

bool DependenceGraph::has_node(NodeId n) const {
    return std::binary_search(nodes.begin(), nodes.end(), n);
}

void DependenceGraph::add_node(NodeId n) {
    nodes.push_back(n);
}

void DependenceGraph::add_edge(GraphEdge e) {
    edges.push_back(e);
}

void DependenceGraph::normalize() {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

// ---------------------------------------------------------------------------
// Statement-level CFG over one scope
// ---------------------------------------------------------------------------

namespace {

std::string first_word(const Statement &s) {
    std::size_t i = 0;
    while (i < s.text.size() && s.text[i] == ' ') {
        ++i;
    }
    std::size_t j = i;
    while (j < s.text.size() && (std::isalnum(static_cast<unsigned char>(s.text[j])) || s.text[j] == '_')) {
        ++j;
    }
    return s.text.substr(i, j - i);
}

bool is_loop_header(const Statement &s) {
    if (s.kind != StatementKind::Control) {
        return false;
    }
    std::string w = first_word(s);
    return w == "for" || w == "while";
}

bool is_chain_continuation(const Statement &s) {
    if (s.kind != StatementKind::Control) {
        return false;
    }
    std::string w = first_word(s);
    return w == "elif" || w == "else" || w == "except" || w == "finally";
}

/// Control-flow successors for the statements of one scope. `root` is the
/// parent id marking the scope top (signature id, class id, or -1).
struct ScopeCfg {
    const SourceUnit *unit = nullptr;
    int root = -1;
    int entry = -1; // signature id for functions, -1 otherwise
    std::vector<int> stmts;
    std::map<int, std::vector<int>> children;
    std::map<int, std::vector<int>> succ;

    const Statement &stmt(int id) const { return *unit->statement(id); }

    void build(const SourceUnit &u, const std::vector<int> &scope_stmts, int root_id, int entry_id) {
        unit = &u;
        root = root_id;
        entry = entry_id;
        stmts = scope_stmts;
        for (int id : stmts) {
            if (id == entry) {
                continue;
            }
            children[stmt(id).parent_id].push_back(id);
        }
        for (int id : stmts) {
            compute_succ(id);
        }
    }

    int next_after(int id) const {
        int parent = stmt(id).parent_id;
        auto it = children.find(parent);
        if (it != children.end()) {
            const auto &sibs = it->second;
            auto pos = std::find(sibs.begin(), sibs.end(), id);
            if (pos != sibs.end()) {
                for (auto j = pos + 1; j != sibs.end(); ++j) {
                    if (!is_chain_continuation(stmt(*j))) {
                        return *j;
                    }
                }
            }
        }
        if (parent == root || parent < 0) {
            return -1;
        }
        if (is_loop_header(stmt(parent))) {
            return parent; // loop back edge
        }
        return next_after(parent);
    }

    void compute_succ(int id) {
        auto &targets = succ[id];
        const Statement &s = stmt(id);
        if (id == entry) {
            auto it = children.find(root);
            if (it != children.end() && !it->second.empty()) {
                targets.push_back(it->second.front());
            }
            return;
        }
        if (s.kind == StatementKind::Return) {
            return;
        }
        auto kids = children.find(id);
        if (kids != children.end() && !kids->second.empty()) {
            targets.push_back(kids->second.front());
        }
        if (s.kind == StatementKind::Control) {
            // branch not taken: the chained elif/else header, or past the chain
            int alt = -1;
            auto it = children.find(s.parent_id);
            if (it != children.end()) {
                const auto &sibs = it->second;
                auto pos = std::find(sibs.begin(), sibs.end(), id);
                if (pos != sibs.end() && pos + 1 != sibs.end() && is_chain_continuation(stmt(*(pos + 1)))) {
                    alt = *(pos + 1);
                }
            }
            if (alt < 0) {
                alt = next_after(id);
            }
            if (alt >= 0) {
                targets.push_back(alt);
            }
        } else {
            int next = next_after(id);
            if (next >= 0) {
                targets.push_back(next);
            }
        }
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    }
};

using DefKey = std::pair<std::string, std::string>; // (scope, dotted name)

DefKey key_of(const VariableRef &ref) {
    return {ref.scope, ref.dotted()};
}

/// Reaching definitions over the scope CFG by worklist iteration; yields one
/// data edge per (reaching def, use) pair.
void add_data_edges(const ScopeCfg &cfg, int unit_index, DependenceGraph &graph) {
    using DefInstance = std::pair<DefKey, int>;
    std::map<int, std::set<DefInstance>> in, out;
    std::map<int, std::set<DefKey>> gen_keys;
    for (int id : cfg.stmts) {
        for (const auto &d : cfg.stmt(id).defs) {
            gen_keys[id].insert(key_of(d));
        }
    }
    // predecessor map
    std::map<int, std::vector<int>> preds;
    for (const auto &[id, targets] : cfg.succ) {
        for (int t : targets) {
            preds[t].push_back(id);
        }
    }
    std::vector<int> worklist = cfg.stmts;
    while (!worklist.empty()) {
        int id = worklist.back();
        worklist.pop_back();
        std::set<DefInstance> new_in;
        for (int p : preds[id]) {
            new_in.insert(out[p].begin(), out[p].end());
        }
        std::set<DefInstance> new_out;
        const auto &killed = gen_keys[id];
        for (const auto &inst : new_in) {
            if (!killed.count(inst.first)) {
                new_out.insert(inst);
            }
        }
        for (const auto &k : killed) {
            new_out.insert({k, id});
        }
        bool changed = new_out != out[id];
        in[id] = std::move(new_in);
        out[id] = std::move(new_out);
        if (changed) {
            auto it = cfg.succ.find(id);
            if (it != cfg.succ.end()) {
                for (int t : it->second) {
                    worklist.push_back(t);
                }
            }
        }
    }
    for (int id : cfg.stmts) {
        std::set<DefKey> used;
        for (const auto &u : cfg.stmt(id).uses) {
            used.insert(key_of(u));
        }
        for (const auto &[key, def_stmt] : in[id]) {
            if (used.count(key)) {
                graph.add_edge({{unit_index, def_stmt}, {unit_index, id}, EdgeKind::Data, -1});
            }
        }
    }
}

void add_control_edges(const ScopeCfg &cfg, int unit_index, DependenceGraph &graph) {
    // a control statement guards every statement nested below it
    for (int id : cfg.stmts) {
        if (cfg.stmt(id).kind != StatementKind::Control) {
            continue;
        }
        std::vector<int> frontier{id};
        while (!frontier.empty()) {
            int cur = frontier.back();
            frontier.pop_back();
            auto it = cfg.children.find(cur);
            if (it == cfg.children.end()) {
                continue;
            }
            for (int child : it->second) {
                graph.add_edge({{unit_index, id}, {unit_index, child}, EdgeKind::Control, -1});
                frontier.push_back(child);
            }
        }
    }
}

DependenceGraph build_scope_pdg(const SourceUnit &unit, int unit_index, const std::string &scope_key,
                                int root, int entry) {
    DependenceGraph graph;
    graph.scope = "pdg:" + unit.path + ":" + scope_key;
    std::vector<int> stmts;
    if (entry >= 0) {
        stmts.push_back(entry);
    }
    for (const auto &s : unit.statements) {
        if (s.scope == scope_key) {
            stmts.push_back(s.id);
        }
    }
    std::sort(stmts.begin(), stmts.end());
    stmts.erase(std::unique(stmts.begin(), stmts.end()), stmts.end());
    for (int id : stmts) {
        graph.add_node({unit_index, id});
    }
    ScopeCfg cfg;
    cfg.build(unit, stmts, root, entry);
    add_data_edges(cfg, unit_index, graph);
    add_control_edges(cfg, unit_index, graph);
    graph.normalize();
    return graph;
}

} // namespace

DependenceGraph build_pdg(const FunctionDecl &fn, const SourceUnit &unit, int unit_index) {
    return build_scope_pdg(unit, unit_index, fn.scope_key, fn.signature_id, fn.signature_id);
}

DependenceGraph build_module_pdg(const SourceUnit &unit, int unit_index) {
    return build_scope_pdg(unit, unit_index, "<module>", -1, -1);
}

std::vector<DependenceGraph> build_all_pdgs(const Project &project) {
    std::vector<DependenceGraph> pdgs;
    for (int i = 0; i < project.unit_count(); ++i) {
        const SourceUnit &unit = project.unit(i);
        pdgs.push_back(build_module_pdg(unit, i));
        for (const FunctionDecl *fn : unit.all_functions()) {
            pdgs.push_back(build_pdg(*fn, unit, i));
        }
        for (const auto &cls : unit.classes) {
            // class-level statements form their own small scope
            pdgs.push_back(build_scope_pdg(unit, i, "<class:" + cls.name + ">", cls.signature_id, -1));
        }
    }
    return pdgs;
}

// ---------------------------------------------------------------------------
// Call resolution
// ---------------------------------------------------------------------------

namespace {

/// Formal parameters as seen by a caller (receiver stripped for methods and
/// constructors).
std::vector<const Param *> effective_params(const Callable &c) {
    std::vector<const Param *> out;
    if (c.fn == nullptr) {
        return out;
    }
    bool skip_receiver = c.is_constructor || !c.fn->owner.empty();
    for (std::size_t i = skip_receiver ? 1 : 0; i < c.fn->params.size(); ++i) {
        out.push_back(&c.fn->params[i]);
    }
    return out;
}

std::string canonical_type_name(std::string ann) {
    std::string out;
    for (char ch : ann) {
        if (ch != ' ') {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        }
    }
    return out;
}

bool literal_compatible(const std::string &literal_type, const std::string &annotation) {
    static const std::set<std::string> known = {"int", "float", "str", "bool", "list", "dict", "none"};
    std::string ann = canonical_type_name(annotation);
    if (ann == "nonetype") {
        ann = "none";
    }
    if (!known.count(ann)) {
        return true; // only elementary annotations constrain literals
    }
    if (literal_type == ann) {
        return true;
    }
    return literal_type == "int" && ann == "float";
}

int return_arity_of(const Callable &c) {
    if (c.is_constructor) {
        return 1; // a constructor yields the instance
    }
    return c.fn != nullptr ? c.fn->return_arity : 0;
}

} // namespace

CalleeCandidateSet resolve_call(const CallSite &site, int site_unit, const Project &project) {
    std::vector<Callable> pool = project.visible_callables(site_unit, site.callee_name);
    if (pool.empty()) {
        throw NotFoundError("no callable named '" + site.callee_name + "' visible from " +
                            project.unit(site_unit).path);
    }
    // parameter matching: keyword names first, literal types otherwise
    if (!site.keyword_args.empty()) {
        std::erase_if(pool, [&](const Callable &c) {
            auto params = effective_params(c);
            for (const auto &[key, value] : site.keyword_args) {
                (void)value;
                bool found = std::any_of(params.begin(), params.end(),
                                         [&](const Param *p) { return p->name == key; });
                if (!found) {
                    return true;
                }
            }
            return false;
        });
    } else {
        bool any_literal = std::any_of(site.positional_args.begin(), site.positional_args.end(),
                                       [](const Arg &a) { return a.kind == Arg::Kind::Literal; });
        if (any_literal) {
            std::erase_if(pool, [&](const Callable &c) {
                auto params = effective_params(c);
                for (std::size_t i = 0; i < site.positional_args.size(); ++i) {
                    const Arg &arg = site.positional_args[i];
                    if (arg.kind != Arg::Kind::Literal || i >= params.size()) {
                        continue;
                    }
                    if (params[i]->annotation &&
                        !literal_compatible(arg.literal_type, *params[i]->annotation)) {
                        return true;
                    }
                }
                return false;
            });
        }
    }
    if (site.receivers.size() > 1) {
        std::erase_if(pool, [&](const Callable &c) {
            return return_arity_of(c) < static_cast<int>(site.receivers.size());
        });
    }
    if (pool.empty()) {
        throw NotFoundError("no callable named '" + site.callee_name +
                            "' matches the call shape at statement " +
                            std::to_string(site.statement_id));
    }
    CalleeCandidateSet result;
    result.site = &site;
    result.site_unit = site_unit;
    result.candidates = std::move(pool);
    result.resolution = result.candidates.size() == 1 ? Resolution::Unique : Resolution::Ambiguous;
    return result;
}

// ---------------------------------------------------------------------------
// SDG construction
// ---------------------------------------------------------------------------

DependenceGraph build_sdg(const std::vector<DependenceGraph> &pdgs, const Project &project,
                          Diagnostics &diags) {
    DependenceGraph sdg;
    sdg.scope = "sdg";
    for (const auto &pdg : pdgs) {
        sdg.nodes.insert(sdg.nodes.end(), pdg.nodes.begin(), pdg.nodes.end());
        sdg.edges.insert(sdg.edges.end(), pdg.edges.begin(), pdg.edges.end());
    }
    for (int u = 0; u < project.unit_count(); ++u) {
        const SourceUnit &unit = project.unit(u);
        for (const auto &stmt : unit.statements) {
            for (const auto &site : stmt.call_sites) {
                CalleeCandidateSet resolved;
                try {
                    resolved = resolve_call(site, u, project);
                } catch (const NotFoundError &e) {
                    diags.note(std::string("unresolved call: ") + e.what(), unit.path, stmt.line);
                    continue;
                }
                NodeId call_node{u, stmt.id};
                for (const Callable &cand : resolved.candidates) {
                    NodeId sig_node{cand.unit_index, cand.signature_id};
                    int arg_index = 0;
                    for (std::size_t i = 0; i < site.positional_args.size(); ++i) {
                        sdg.add_edge({call_node, sig_node, EdgeKind::CallArg, arg_index++});
                    }
                    for (std::size_t i = 0; i < site.keyword_args.size(); ++i) {
                        sdg.add_edge({call_node, sig_node, EdgeKind::CallArg, arg_index++});
                    }
                    if (site.receivers.empty()) {
                        continue;
                    }
                    if (cand.is_constructor) {
                        // the constructed value flows from the class declaration
                        NodeId cls_node{cand.unit_index, cand.class_signature_id};
                        sdg.add_edge({cls_node, call_node, EdgeKind::CallReturn, -1});
                        continue;
                    }
                    const SourceUnit &cunit = project.unit(cand.unit_index);
                    for (const auto &cs : cunit.statements) {
                        if (cs.kind == StatementKind::Return && cs.scope == cand.fn->scope_key) {
                            sdg.add_edge({{cand.unit_index, cs.id}, call_node, EdgeKind::CallReturn, -1});
                        }
                    }
                }
            }
        }
    }
    sdg.normalize();
    return sdg;
}

std::string serialize_graph(const DependenceGraph &graph, const Project &project) {
    std::ostringstream out;
    auto label = [&](NodeId n) {
        return project.unit(n.unit).path + ":" + std::to_string(n.statement);
    };
    for (NodeId n : graph.nodes) {
        const Statement *s = project.unit(n.unit).statement(n.statement);
        out << "N " << label(n) << ":" << (s != nullptr ? s->line : 0) << "\n";
    }
    for (const GraphEdge &e : graph.edges) {
        out << "E " << label(e.src) << " " << label(e.dst) << " " << to_string(e.kind) << "\n";
    }
    return out.str();
}

} // namespace slicetype
