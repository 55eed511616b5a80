#pragma once

#include "slicetype/knowledge_base.hpp"
#include "slicetype/slicer.hpp"

#include <set>
#include <string>
#include <vector>

namespace slicetype {

/// Structure observed on the target variable within its slices: field names
/// it is dereferenced with and method names it is called with. A name seen
/// in call position is a method even if it also appears as a plain access.
struct StructuralProfile {
    std::set<std::string> var_fields;
    std::set<std::string> var_methods;

    bool empty() const { return var_fields.empty() && var_methods.empty(); }
    std::set<std::string> all_names() const;
};

struct RankedCandidate {
    TypeRecord record;
    double score = 0.0;
};

inline constexpr double kScoreThreshold = 0.5;
inline constexpr int kMaxCandidates = 5;

/// Attribute accesses through the variable or any of its slice aliases.
StructuralProfile extract_structure(const std::vector<Slice> &slices, const VariableRef &v,
                                    const Project &project);

/// Overlap of the profile with a record's structure, normalized by the
/// profile size. Throws Error on an empty profile (callers skip ranking).
double score(const StructuralProfile &profile, const TypeRecord &record);

/// Records scoring at least the threshold, best first, capped at five.
/// Ties break project-before-library, then name ascending. An empty profile
/// yields an empty list.
std::vector<RankedCandidate> rank_candidates(const StructuralProfile &profile,
                                             const KnowledgeBase &kb);

} // namespace slicetype
