#pragma once

#include "slicetype/project.hpp"

#include <compare>
#include <string>
#include <vector>

namespace slicetype {

struct NodeId {
    int unit = -1;
    int statement = -1;
    auto operator<=>(const NodeId &) const = default;
};

enum class EdgeKind { Data, Control, CallArg, CallReturn };

const char *to_string(EdgeKind kind);

struct GraphEdge {
    NodeId src;
    NodeId dst;
    EdgeKind kind = EdgeKind::Data;
    /// Argument position for CallArg edges (keyword args follow positional),
    /// -1 otherwise. Keeps one edge per actual argument.
    int arg_index = -1;
    auto operator<=>(const GraphEdge &) const = default;
};

/// Statement-level dependence graph: per-function (PDG) or project-wide (SDG).
/// Nodes and edges are kept sorted so serialization is deterministic.
struct DependenceGraph {
    std::string scope; // "pdg:<unit>:<scope-key>" or "sdg"
    std::vector<NodeId> nodes;
    std::vector<GraphEdge> edges;

    bool has_node(NodeId n) const;
    void add_node(NodeId n);
    void add_edge(GraphEdge e);
    void normalize(); // sort + dedupe
};

/// How a call site was resolved against the visible callables.
enum class Resolution { Unique, Ambiguous };

struct CalleeCandidateSet {
    const CallSite *site = nullptr;
    int site_unit = -1;
    std::vector<Callable> candidates; // ordered by (file path, line)
    Resolution resolution = Resolution::Unique;
};

/// Build the program dependence graph of one function: a node per body
/// statement plus the signature node, data edges per reaching definitions,
/// control edges from each control statement to its body.
DependenceGraph build_pdg(const FunctionDecl &fn, const SourceUnit &unit, int unit_index);

/// PDG over a unit's module-level statements (treated as one implicit scope).
DependenceGraph build_module_pdg(const SourceUnit &unit, int unit_index);

/// All PDGs of a project: every function, method, and module scope.
std::vector<DependenceGraph> build_all_pdgs(const Project &project);

/// Resolve a call site by name, parameter, and return-count matching.
/// Throws NotFoundError when no callable survives; the caller records the
/// site in diagnostics and skips its inter-procedural edges.
CalleeCandidateSet resolve_call(const CallSite &site, int site_unit, const Project &project);

/// Merge PDGs into the system dependence graph, adding call-arg edges
/// (argument node -> callee signature node) and call-return edges (callee
/// return statements -> receiver statement) for every resolved candidate.
DependenceGraph build_sdg(const std::vector<DependenceGraph> &pdgs, const Project &project,
                          Diagnostics &diags);

/// Line-oriented dump: `N <path>:<id>:<line>` and `E <src> <dst> <kind>`.
std::string serialize_graph(const DependenceGraph &graph, const Project &project);

} // namespace slicetype
