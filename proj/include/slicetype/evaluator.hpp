#pragma once

#include "slicetype/knowledge_base.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace slicetype {

/// Canonical member set of one type annotation. Unions flatten into one
/// member per alternative; structural types with optional fields expand into
/// their variants; everything else is a singleton.
struct TypeSet {
    std::set<std::string> members;

    bool operator==(const TypeSet &) const = default;
    bool intersects(const TypeSet &other) const;
    /// Whitespace-free rendering with sorted union members.
    std::string canonical() const;
};

/// Parse a type annotation. Never fails: an annotation outside the grammar
/// becomes a singleton of its trimmed text (with a diagnostic when a sink is
/// given).
TypeSet parse_type(const std::string &annotation, Diagnostics *diags = nullptr);

/// Strict variant: nullopt when the annotation does not fully parse.
std::optional<TypeSet> parse_type_strict(const std::string &annotation);

/// True for the wildcard annotation (`any` / `Any`).
bool is_any_type(const std::string &raw);

/// Names counted as elementary builtins when unparameterized.
bool is_elementary_name(const std::string &name);

/// Bare (possibly dotted) identifier test, e.g. a plain type name.
bool is_bare_identifier(const std::string &raw);

/// Set equality with the wildcard rules: a wildcard label matches anything,
/// a wildcard prediction matches only a wildcard label.
bool exact_match(const TypeSet &label, const TypeSet &pred, const std::string &label_raw,
                 const std::string &pred_raw);

/// Set intersection, or equal outer constructors of two generic
/// applications; wildcard rules as in exact_match.
bool base_match(const TypeSet &label, const TypeSet &pred, const std::string &label_raw,
                const std::string &pred_raw);

/// Mean reciprocal rank: 1/rank for hits within [1, n], 0 otherwise.
/// Throws Error on an empty input.
double mrr_at_n(const std::vector<std::optional<int>> &first_correct_ranks, int n);

enum class TypeKind { Ele, Gen, Usr };
enum class SampleSlot { Var, Ret, Arg };

const char *to_string(TypeKind kind);
const char *to_string(SampleSlot slot);
std::optional<SampleSlot> parse_slot(const std::string &text);

TypeKind categorize(const std::string &label_raw, const KnowledgeBase &kb);

struct EvalSample {
    std::string id;
    std::string label;
    SampleSlot slot = SampleSlot::Var;
    std::vector<std::string> predictions; // ranked
};

struct GroupStats {
    int count = 0;
    // hits within the top 1, 3, and 5 predictions
    int em_hits[3] = {0, 0, 0};
    int bm_hits[3] = {0, 0, 0};
    double mrr_sum = 0.0;

    double em_percent(int k_index) const;
    double bm_percent(int k_index) const;
    double mrr() const;
};

/// Accuracy table grouped by slot (Var/Ret/Arg) and kind (Ele/Gen/Usr).
struct Report {
    static const std::vector<std::string> &group_order(); // All, Var, Ret, Arg, Ele, Gen, Usr
    std::map<std::string, GroupStats> groups;
};

Report evaluate(const std::vector<EvalSample> &samples, const KnowledgeBase &kb);

std::string render_report_table(const Report &report);
std::string render_report_json(const Report &report);

} // namespace slicetype
