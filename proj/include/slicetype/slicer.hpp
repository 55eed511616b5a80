#pragma once

#include "slicetype/dependence_graph.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace slicetype {

enum class TargetOrigin { Field, Parameter, ReturnReceiver, Plain };

const char *to_string(TargetOrigin origin);

/// One anchor to slice from. Expansion of the queried variable produces a
/// set of these: field uses, the signature plus call sites for parameters,
/// return statements for call receivers, or just the variable itself.
struct TargetVariable {
    VariableRef ref;    // variable bound at this anchor
    NodeId anchor;      // statement the worklist starts from
    TargetOrigin origin = TargetOrigin::Plain;
};

struct SliceStatement {
    std::string path;
    int statement_id = 0;
    int line = 0;
    std::string text;
    auto operator<=>(const SliceStatement &) const = default;
};

struct Slice {
    TargetVariable target;
    std::vector<SliceStatement> statements; // ordered by (path, line)
    /// Variables that carry the target's value across call boundaries,
    /// including the target itself. Scoped, for structural profiling.
    std::set<VariableRef> aliases;
};

struct SliceOptions {
    bool intra_only = false;  // ignore call edges and call-site expansion
    int max_statements = 200; // farthest-from-anchor statements drop first
    int alias_hop_cap = 3;    // call edges crossed on one path
};

/// Worklist counters, exposed so tests can check the termination bound.
struct SliceStats {
    std::size_t worklist_pushes = 0;
    std::size_t targets = 0;
};

/// Expand a queried variable occurrence into the set of anchors to slice.
/// `anchor_hint` is the statement where the query names the variable.
std::vector<TargetVariable> expand_target_variables(const VariableRef &v, NodeId anchor_hint,
                                                    const DependenceGraph &sdg,
                                                    const Project &project,
                                                    const SliceOptions &options = {});

/// Fixed-point slice for one target: every statement connected to the anchor
/// through data edges, crossing call-arg/call-return edges up to the hop cap.
/// Statements pull in their enclosing signature lines for context.
Slice slice_one(const DependenceGraph &sdg, const TargetVariable &tv, const Project &project,
                const SliceOptions &options = {}, SliceStats *stats = nullptr);

/// All slices for a variable: expansion, per-target slicing, dedup by
/// statement set, deterministic order.
std::vector<Slice> slice_all(const DependenceGraph &sdg, const VariableRef &v, NodeId anchor_hint,
                             const Project &project, const SliceOptions &options = {},
                             SliceStats *stats = nullptr);

/// Where the inferred type annotation belongs, for mask placement.
enum class MaskSlot { Variable, Parameter, Return };

struct MaskTarget {
    std::string path;
    int line = 0;
    std::string name;
    MaskSlot slot = MaskSlot::Variable;
};

/// Render slices as prompt context: grouped by file in path order, each
/// statement prefixed with its line number. When `mask` is given, the
/// annotation position of the target is replaced with the <mask> marker.
std::string render_slices(const std::vector<Slice> &slices,
                          const std::optional<MaskTarget> &mask = std::nullopt);

/// Locate a variable occurrence by (file, line, name). Throws NotFoundError.
std::pair<VariableRef, NodeId> locate_variable(const Project &project, const std::string &file,
                                               int line, const std::string &name);

} // namespace slicetype
