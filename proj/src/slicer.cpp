#include "slicetype/slicer.hpp"

#include <algorithm>
#include <cassert>
#include <deque>
#include <map>
#include <sstream>

namespace slicetype {

const char *to_string(TargetOrigin origin) {
    switch (origin) {
    case TargetOrigin::Field: return "field";
    case TargetOrigin::Parameter: return "parameter";
    case TargetOrigin::ReturnReceiver: return "return-receiver";
    case TargetOrigin::Plain: return "plain";
    }
    return "?";
}

namespace {

// Neighbor lists split by edge family. Control edges carry no value flow,
// so the worklist never adds statements through them.
struct Adjacency {
    std::map<NodeId, std::vector<NodeId>> data;
    std::map<NodeId, std::vector<NodeId>> call; // call-arg + call-return, both ends

    explicit Adjacency(const DependenceGraph &sdg) {
        for (const auto &e : sdg.edges) {
            switch (e.kind) {
            case EdgeKind::Data:
                data[e.src].push_back(e.dst);
                data[e.dst].push_back(e.src);
                break;
            case EdgeKind::CallArg:
            case EdgeKind::CallReturn:
                call[e.src].push_back(e.dst);
                call[e.dst].push_back(e.src);
                break;
            case EdgeKind::Control:
                break;
            }
        }
        for (auto *m : {&data, &call}) {
            for (auto &[node, neighbors] : *m) {
                std::sort(neighbors.begin(), neighbors.end());
                neighbors.erase(std::unique(neighbors.begin(), neighbors.end()), neighbors.end());
            }
        }
    }
};

/// Cache of per-statement call resolutions, shared across the targets of one
/// slicing run.
struct ResolutionCache {
    const Project &project;
    std::map<NodeId, std::vector<CalleeCandidateSet>> by_statement;

    explicit ResolutionCache(const Project &p) : project(p) {}

    const std::vector<CalleeCandidateSet> &resolved(NodeId node) {
        auto it = by_statement.find(node);
        if (it != by_statement.end()) {
            return it->second;
        }
        std::vector<CalleeCandidateSet> sets;
        const Statement *stmt = project.unit(node.unit).statement(node.statement);
        if (stmt != nullptr) {
            for (const auto &site : stmt->call_sites) {
                try {
                    sets.push_back(resolve_call(site, node.unit, project));
                } catch (const NotFoundError &) {
                    // unresolved sites contribute no inter-procedural flow
                }
            }
        }
        return by_statement.emplace(node, std::move(sets)).first->second;
    }
};

VariableRef param_ref(const FunctionDecl &fn, const std::string &param_name) {
    VariableRef ref;
    ref.name = param_name;
    ref.scope = fn.scope_key;
    return ref;
}

/// Pairs (actual, formal) for one resolved candidate at one site. The
/// receiver parameter of methods and constructors is skipped.
std::vector<std::pair<VariableRef, VariableRef>> argument_bindings(const CallSite &site,
                                                                   const Callable &cand) {
    std::vector<std::pair<VariableRef, VariableRef>> out;
    if (cand.fn == nullptr) {
        return out;
    }
    bool skip_receiver = cand.is_constructor || !cand.fn->owner.empty();
    std::size_t base = skip_receiver ? 1 : 0;
    for (std::size_t i = 0; i < site.positional_args.size(); ++i) {
        const Arg &arg = site.positional_args[i];
        std::size_t slot = base + i;
        if (arg.kind != Arg::Kind::Variable || arg.var.name.empty() ||
            slot >= cand.fn->params.size()) {
            continue;
        }
        out.emplace_back(arg.var, param_ref(*cand.fn, cand.fn->params[slot].name));
    }
    for (const auto &[key, arg] : site.keyword_args) {
        if (arg.kind != Arg::Kind::Variable || arg.var.name.empty()) {
            continue;
        }
        for (std::size_t p = base; p < cand.fn->params.size(); ++p) {
            if (cand.fn->params[p].name == key) {
                out.emplace_back(arg.var, param_ref(*cand.fn, key));
                break;
            }
        }
    }
    return out;
}

} // namespace

std::pair<VariableRef, NodeId> locate_variable(const Project &project, const std::string &file,
                                               int line, const std::string &name) {
    int unit_idx = project.find_unit(file);
    if (unit_idx < 0) {
        throw NotFoundError("no project file matches '" + file + "'");
    }
    const SourceUnit &unit = project.unit(unit_idx);
    const Statement *stmt = unit.statement_at_line(line);
    if (stmt == nullptr) {
        throw NotFoundError(unit.path + ":" + std::to_string(line) + ": no statement at this line");
    }
    auto matches = [&](const VariableRef &ref) {
        return ref.dotted() == name || ref.name == name;
    };
    // prefer defs (annotation sites are definitions), then uses
    for (const auto &ref : stmt->defs) {
        if (matches(ref)) {
            return {ref, NodeId{unit_idx, stmt->id}};
        }
    }
    for (const auto &ref : stmt->uses) {
        if (matches(ref)) {
            return {ref, NodeId{unit_idx, stmt->id}};
        }
    }
    throw NotFoundError(unit.path + ":" + std::to_string(line) + ": variable '" + name +
                        "' does not occur here");
}

std::vector<TargetVariable> expand_target_variables(const VariableRef &v, NodeId anchor_hint,
                                                    const DependenceGraph &sdg,
                                                    const Project &project,
                                                    const SliceOptions &options) {
    (void)sdg;
    std::vector<TargetVariable> out;
    const SourceUnit &unit = project.unit(anchor_hint.unit);
    const Statement *anchor_stmt = unit.statement(anchor_hint.statement);
    if (anchor_stmt == nullptr) {
        throw NotFoundError("anchor statement not found");
    }

    // A query naming a function at its own signature asks for the return
    // type: anchor at every return statement of the body.
    if (anchor_stmt->kind == StatementKind::FunctionSignature && !v.qualified()) {
        for (const FunctionDecl *fn : unit.all_functions()) {
            if (fn->signature_id != anchor_hint.statement || fn->name != v.name) {
                continue;
            }
            for (const auto &s : unit.statements) {
                if (s.kind == StatementKind::Return && s.scope == fn->scope_key) {
                    out.push_back({v, NodeId{anchor_hint.unit, s.id}, TargetOrigin::ReturnReceiver});
                }
            }
            if (out.empty()) {
                out.push_back({v, anchor_hint, TargetOrigin::Plain});
            }
            return out;
        }
    }

    // Fields of a class: one target per use statement of the field.
    if (v.qualified()) {
        const FunctionDecl *method = unit.function_for_scope(v.scope);
        if (method != nullptr && !method->owner.empty() && !method->params.empty() &&
            v.qualifier.size() == 1 && v.qualifier[0] == method->params.front().name) {
            const std::string &field = v.name;
            for (int ui = 0; ui < project.unit_count(); ++ui) {
                const SourceUnit &u = project.unit(ui);
                for (const auto &cls : u.classes) {
                    if (cls.name != method->owner) {
                        continue;
                    }
                    auto scan = [&](const FunctionDecl &m) {
                        if (m.params.empty()) {
                            return;
                        }
                        const std::string &recv = m.params.front().name;
                        for (const auto &s : u.statements) {
                            if (s.scope != m.scope_key) {
                                continue;
                            }
                            for (const auto &use : s.uses) {
                                if (use.qualifier.size() == 1 && use.qualifier[0] == recv &&
                                    use.name == field) {
                                    out.push_back({use, NodeId{ui, s.id}, TargetOrigin::Field});
                                }
                            }
                        }
                    };
                    for (const auto &m : cls.methods) {
                        scan(m);
                    }
                    for (const auto &m : cls.private_methods) {
                        scan(m);
                    }
                }
            }
            if (out.empty()) {
                out.push_back({v, anchor_hint, TargetOrigin::Field});
            }
            return out;
        }
        out.push_back({v, anchor_hint, TargetOrigin::Plain});
        return out;
    }

    // Function parameters: the signature anchor plus every call site,
    // anchored at the actual-argument statement.
    {
        const FunctionDecl *fn = unit.function_for_scope(v.scope);
        bool is_param = fn != nullptr &&
                        std::any_of(fn->params.begin(), fn->params.end(),
                                    [&](const Param &p) { return p.name == v.name; });
        if (is_param) {
            out.push_back({v, NodeId{anchor_hint.unit, fn->signature_id}, TargetOrigin::Parameter});
            if (!options.intra_only) {
                std::size_t param_index = 0;
                for (; param_index < fn->params.size(); ++param_index) {
                    if (fn->params[param_index].name == v.name) {
                        break;
                    }
                }
                bool has_receiver = !fn->owner.empty();
                for (int ui = 0; ui < project.unit_count(); ++ui) {
                    const SourceUnit &u = project.unit(ui);
                    for (const auto &s : u.statements) {
                        for (const auto &site : s.call_sites) {
                            if (site.callee_name != fn->name) {
                                continue;
                            }
                            CalleeCandidateSet resolved;
                            try {
                                resolved = resolve_call(site, ui, project);
                            } catch (const NotFoundError &) {
                                continue;
                            }
                            bool hits = std::any_of(
                                resolved.candidates.begin(), resolved.candidates.end(),
                                [&](const Callable &c) {
                                    return c.fn == fn && c.unit_index == anchor_hint.unit;
                                });
                            if (!hits) {
                                continue;
                            }
                            VariableRef bound = v;
                            std::size_t caller_slot =
                                has_receiver && param_index > 0 ? param_index - 1 : param_index;
                            if (caller_slot < site.positional_args.size() &&
                                site.positional_args[caller_slot].kind == Arg::Kind::Variable &&
                                !site.positional_args[caller_slot].var.name.empty()) {
                                bound = site.positional_args[caller_slot].var;
                            } else {
                                for (const auto &[key, arg] : site.keyword_args) {
                                    if (key == v.name && arg.kind == Arg::Kind::Variable &&
                                        !arg.var.name.empty()) {
                                        bound = arg.var;
                                        break;
                                    }
                                }
                            }
                            out.push_back({bound, NodeId{ui, s.id}, TargetOrigin::Parameter});
                        }
                    }
                }
            }
            return out;
        }
    }

    // Receivers of call return values: anchor at every return of the callee.
    out.push_back({v, anchor_hint, TargetOrigin::Plain});
    if (!options.intra_only) {
        for (const auto &s : unit.statements) {
            if (s.scope != v.scope || !s.defs.count(v)) {
                continue;
            }
            for (const auto &site : s.call_sites) {
                bool receives = std::any_of(site.receivers.begin(), site.receivers.end(),
                                            [&](const VariableRef &r) { return r == v; });
                if (!receives) {
                    continue;
                }
                CalleeCandidateSet resolved;
                try {
                    resolved = resolve_call(site, anchor_hint.unit, project);
                } catch (const NotFoundError &) {
                    continue;
                }
                for (const Callable &cand : resolved.candidates) {
                    if (cand.fn == nullptr) {
                        continue;
                    }
                    const SourceUnit &cu = project.unit(cand.unit_index);
                    for (const auto &cs : cu.statements) {
                        if (cs.kind == StatementKind::Return && cs.scope == cand.fn->scope_key) {
                            out.push_back(
                                {v, NodeId{cand.unit_index, cs.id}, TargetOrigin::ReturnReceiver});
                        }
                    }
                }
            }
        }
    }
    return out;
}

namespace {

struct SliceComputation {
    const DependenceGraph &sdg;
    const Project &project;
    const SliceOptions &options;
    Adjacency &adjacency;
    ResolutionCache &resolutions;
    SliceStats *stats;

    Slice run(const TargetVariable &tv) {
        std::map<NodeId, int> dist; // edges crossed from the anchor
        std::set<NodeId> visited;
        // level h holds nodes first reached after crossing h call edges
        std::vector<NodeId> level{tv.anchor};
        visited.insert(tv.anchor);
        dist[tv.anchor] = 0;
        bump_pushes(1);

        for (int hop = 0; hop <= options.alias_hop_cap && !level.empty(); ++hop) {
            // close the level under data edges
            std::deque<NodeId> queue(level.begin(), level.end());
            std::vector<NodeId> component = level;
            while (!queue.empty()) {
                NodeId cur = queue.front();
                queue.pop_front();
                auto it = adjacency.data.find(cur);
                if (it == adjacency.data.end()) {
                    continue;
                }
                for (NodeId next : it->second) {
                    if (visited.insert(next).second) {
                        dist[next] = dist[cur] + 1;
                        queue.push_back(next);
                        component.push_back(next);
                        bump_pushes(1);
                    }
                }
            }
            if (options.intra_only || hop == options.alias_hop_cap) {
                break;
            }
            std::sort(component.begin(), component.end());
            std::vector<NodeId> next_level;
            for (NodeId cur : component) {
                auto it = adjacency.call.find(cur);
                if (it == adjacency.call.end()) {
                    continue;
                }
                for (NodeId next : it->second) {
                    if (visited.insert(next).second) {
                        dist[next] = dist[cur] + 1;
                        next_level.push_back(next);
                        bump_pushes(1);
                    }
                }
            }
            level = std::move(next_level);
        }

        Slice slice;
        slice.target = tv;
        std::set<NodeId> members;
        for (const auto &[node, d] : dist) {
            (void)d;
            members.insert(node);
        }
        add_enclosing_signatures(members, dist);
        truncate(members, dist, tv.anchor);
        propagate_aliases(slice, members, tv);
        for (NodeId node : members) {
            const SourceUnit &unit = project.unit(node.unit);
            const Statement *s = unit.statement(node.statement);
            slice.statements.push_back({unit.path, node.statement, s->line, s->text});
        }
        std::sort(slice.statements.begin(), slice.statements.end(),
                  [](const SliceStatement &a, const SliceStatement &b) {
                      return std::tie(a.path, a.line, a.statement_id) <
                             std::tie(b.path, b.line, b.statement_id);
                  });
        return slice;
    }

    void bump_pushes(std::size_t n) {
        if (stats != nullptr) {
            stats->worklist_pushes += n;
        }
    }

    /// Statements of a function body pull in their signature line; class
    /// bodies pull in the class line.
    void add_enclosing_signatures(std::set<NodeId> &members, std::map<NodeId, int> &dist) {
        bool changed = true;
        while (changed) {
            changed = false;
            std::vector<NodeId> to_add;
            for (NodeId node : members) {
                const SourceUnit &unit = project.unit(node.unit);
                const Statement *s = unit.statement(node.statement);
                if (s == nullptr || s->scope == "<module>") {
                    continue;
                }
                int sig = -1;
                if (const FunctionDecl *fn = unit.function_for_scope(s->scope)) {
                    sig = fn->signature_id;
                } else {
                    for (const auto &cls : unit.classes) {
                        if (s->scope == "<class:" + cls.name + ">") {
                            sig = cls.signature_id;
                            break;
                        }
                    }
                }
                NodeId sig_node{node.unit, sig};
                if (sig >= 0 && !members.count(sig_node)) {
                    to_add.push_back(sig_node);
                    int d = dist.count(node) ? dist[node] : 0;
                    if (!dist.count(sig_node) || dist[sig_node] > d) {
                        dist[sig_node] = d;
                    }
                }
            }
            for (NodeId n : to_add) {
                changed |= members.insert(n).second;
            }
        }
    }

    void truncate(std::set<NodeId> &members, const std::map<NodeId, int> &dist, NodeId anchor) {
        if (static_cast<int>(members.size()) <= options.max_statements) {
            return;
        }
        std::vector<NodeId> ordered(members.begin(), members.end());
        std::stable_sort(ordered.begin(), ordered.end(), [&](NodeId a, NodeId b) {
            int da = dist.count(a) ? dist.at(a) : 0;
            int db = dist.count(b) ? dist.at(b) : 0;
            return std::tie(da, a) < std::tie(db, b);
        });
        members.clear();
        members.insert(anchor);
        for (NodeId n : ordered) {
            if (static_cast<int>(members.size()) >= options.max_statements) {
                break;
            }
            members.insert(n);
        }
    }

    /// Fixed point over the call bindings inside the slice: variables that
    /// carry the target's value across calls become aliases.
    void propagate_aliases(Slice &slice, const std::set<NodeId> &members, const TargetVariable &tv) {
        auto &aliases = slice.aliases;
        if (!tv.ref.name.empty()) {
            aliases.insert(tv.ref);
        }
        const Statement *anchor_stmt = project.unit(tv.anchor.unit).statement(tv.anchor.statement);
        if (tv.origin == TargetOrigin::ReturnReceiver && anchor_stmt != nullptr &&
            anchor_stmt->kind == StatementKind::Return) {
            for (const auto &use : anchor_stmt->uses) {
                aliases.insert(use);
            }
        }
        if (options.intra_only) {
            return;
        }
        bool changed = true;
        while (changed) {
            changed = false;
            for (NodeId node : members) {
                for (const auto &resolved : resolutions.resolved(node)) {
                    for (const Callable &cand : resolved.candidates) {
                        NodeId sig{cand.unit_index, cand.signature_id};
                        if (!members.count(sig)) {
                            continue;
                        }
                        for (const auto &[actual, formal] : argument_bindings(*resolved.site, cand)) {
                            if (aliases.count(actual) && !aliases.count(formal)) {
                                aliases.insert(formal);
                                changed = true;
                            }
                            if (aliases.count(formal) && !aliases.count(actual)) {
                                aliases.insert(actual);
                                changed = true;
                            }
                        }
                        if (cand.fn == nullptr || resolved.site->receivers.empty()) {
                            continue;
                        }
                        bool receiver_aliased =
                            std::any_of(resolved.site->receivers.begin(), resolved.site->receivers.end(),
                                        [&](const VariableRef &r) { return aliases.count(r) > 0; });
                        const SourceUnit &cu = project.unit(cand.unit_index);
                        for (const auto &cs : cu.statements) {
                            if (cs.kind != StatementKind::Return || cs.scope != cand.fn->scope_key ||
                                !members.count(NodeId{cand.unit_index, cs.id})) {
                                continue;
                            }
                            bool return_aliased =
                                std::any_of(cs.uses.begin(), cs.uses.end(),
                                            [&](const VariableRef &r) { return aliases.count(r) > 0; });
                            if (receiver_aliased && !return_aliased) {
                                for (const auto &u : cs.uses) {
                                    changed |= aliases.insert(u).second;
                                }
                            } else if (return_aliased && !receiver_aliased) {
                                for (const auto &r : resolved.site->receivers) {
                                    changed |= aliases.insert(r).second;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
};

} // namespace

Slice slice_one(const DependenceGraph &sdg, const TargetVariable &tv, const Project &project,
                const SliceOptions &options, SliceStats *stats) {
    Adjacency adjacency(sdg);
    ResolutionCache resolutions(project);
    SliceComputation comp{sdg, project, options, adjacency, resolutions, stats};
    if (stats != nullptr) {
        stats->targets += 1;
    }
    return comp.run(tv);
}

std::vector<Slice> slice_all(const DependenceGraph &sdg, const VariableRef &v, NodeId anchor_hint,
                             const Project &project, const SliceOptions &options, SliceStats *stats) {
    std::vector<TargetVariable> targets = expand_target_variables(v, anchor_hint, sdg, project, options);
    Adjacency adjacency(sdg);
    ResolutionCache resolutions(project);
    SliceComputation comp{sdg, project, options, adjacency, resolutions, stats};
    std::vector<Slice> out;
    std::set<std::vector<SliceStatement>> seen;
    for (const auto &tv : targets) {
        if (stats != nullptr) {
            stats->targets += 1;
        }
        Slice slice = comp.run(tv);
        if (seen.insert(slice.statements).second) {
            out.push_back(std::move(slice));
        } else {
            // merge aliases of a duplicate closure into the kept slice
            for (auto &kept : out) {
                if (kept.statements == slice.statements) {
                    kept.aliases.insert(slice.aliases.begin(), slice.aliases.end());
                    break;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

bool word_boundary(const std::string &text, std::size_t pos, std::size_t len) {
    auto is_word = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    if (pos > 0 && is_word(text[pos - 1])) {
        return false;
    }
    std::size_t end = pos + len;
    return end >= text.size() || !is_word(text[end]);
}

std::size_t find_word(const std::string &text, const std::string &word, std::size_t from = 0) {
    std::size_t pos = text.find(word, from);
    while (pos != std::string::npos && !word_boundary(text, pos, word.size())) {
        pos = text.find(word, pos + 1);
    }
    return pos;
}

/// Insert `: <mask>` at the annotation position of `name`, replacing an
/// existing annotation when present.
std::string mask_variable(const std::string &text, const std::string &name) {
    std::size_t pos = find_word(text, name);
    if (pos == std::string::npos) {
        return text + "  # <mask>";
    }
    std::size_t after = pos + name.size();
    std::size_t k = after;
    while (k < text.size() && text[k] == ' ') {
        ++k;
    }
    if (k < text.size() && text[k] == ':' && (k + 1 >= text.size() || text[k + 1] != '=')) {
        // replace the existing annotation up to '=', ',' or ')'
        std::size_t end = k + 1;
        int depth = 0;
        while (end < text.size()) {
            char c = text[end];
            if (c == '[' || c == '(' || c == '{') {
                ++depth;
            } else if (c == ']' || c == ')' || c == '}') {
                if (depth == 0) {
                    break;
                }
                --depth;
            } else if (depth == 0 && (c == '=' || c == ',')) {
                break;
            }
            ++end;
        }
        return text.substr(0, k + 1) + " <mask>" + (end < text.size() ? " " + text.substr(end) : "");
    }
    return text.substr(0, after) + ": <mask>" + text.substr(after);
}

std::string mask_return(const std::string &text) {
    std::size_t colon = text.rfind(':');
    std::size_t arrow = text.rfind("->");
    if (arrow != std::string::npos && (colon == std::string::npos || arrow < colon)) {
        std::string head = text.substr(0, arrow + 2);
        return head + " <mask>" + (colon != std::string::npos ? text.substr(colon) : "");
    }
    std::size_t close = text.rfind(')');
    if (close == std::string::npos) {
        return text + "  # <mask>";
    }
    return text.substr(0, close + 1) + " -> <mask>" + text.substr(close + 1);
}

} // namespace

std::string render_slices(const std::vector<Slice> &slices, const std::optional<MaskTarget> &mask) {
    // union of all slices, grouped by file, ordered by line
    std::map<std::string, std::map<int, std::string>> by_file;
    for (const auto &slice : slices) {
        for (const auto &s : slice.statements) {
            by_file[s.path].emplace(s.line, s.text);
        }
    }
    bool masked = false;
    std::ostringstream out;
    bool first = true;
    for (auto &[path, lines] : by_file) {
        if (!first) {
            out << "\n";
        }
        first = false;
        out << "# file: " << path << "\n";
        for (auto &[line, text] : lines) {
            std::string rendered = text;
            if (!masked && mask && mask->path == path && mask->line == line) {
                switch (mask->slot) {
                case MaskSlot::Parameter:
                case MaskSlot::Variable:
                    rendered = mask_variable(rendered, mask->name);
                    break;
                case MaskSlot::Return:
                    rendered = mask_return(rendered);
                    break;
                }
                masked = true;
            }
            out << line << "| " << rendered << "\n";
        }
    }
    return out.str();
}

} // namespace slicetype
