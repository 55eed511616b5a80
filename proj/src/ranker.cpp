#include "slicetype/ranker.hpp"

#include <algorithm>

namespace slicetype {

std::set<std::string> StructuralProfile::all_names() const {
    std::set<std::string> out = var_fields;
    out.insert(var_methods.begin(), var_methods.end());
    return out;
}

StructuralProfile extract_structure(const std::vector<Slice> &slices, const VariableRef &v,
                                    const Project &project) {
    StructuralProfile profile;
    std::set<VariableRef> aliases;
    if (!v.name.empty()) {
        aliases.insert(v);
    }
    for (const auto &slice : slices) {
        aliases.insert(slice.aliases.begin(), slice.aliases.end());
    }
    auto aliased_base = [&](const std::vector<std::string> &qualifier, const std::string &scope) {
        if (qualifier.size() != 1) {
            return false; // first-level attributes only
        }
        VariableRef base;
        base.name = qualifier[0];
        base.scope = scope;
        return aliases.count(base) > 0;
    };

    std::set<std::pair<std::string, int>> seen;
    for (const auto &slice : slices) {
        for (const auto &sstmt : slice.statements) {
            if (!seen.insert({sstmt.path, sstmt.statement_id}).second) {
                continue;
            }
            int unit_idx = project.unit_index(sstmt.path);
            if (unit_idx < 0) {
                continue;
            }
            const Statement *stmt = project.unit(unit_idx).statement(sstmt.statement_id);
            if (stmt == nullptr) {
                continue;
            }
            for (const auto &ref : stmt->uses) {
                if (ref.qualified() && aliased_base(ref.qualifier, ref.scope)) {
                    profile.var_fields.insert(ref.name);
                }
            }
            for (const auto &ref : stmt->defs) {
                if (ref.qualified() && aliased_base(ref.qualifier, ref.scope)) {
                    profile.var_fields.insert(ref.name);
                }
            }
            for (const auto &site : stmt->call_sites) {
                if (!site.callee_qualifier.empty() &&
                    aliased_base(site.callee_qualifier, stmt->scope)) {
                    profile.var_methods.insert(site.callee_name);
                }
            }
        }
    }
    // call position wins when a name appears both ways
    for (const auto &m : profile.var_methods) {
        profile.var_fields.erase(m);
    }
    return profile;
}

double score(const StructuralProfile &profile, const TypeRecord &record) {
    if (profile.empty()) {
        throw Error("structural score undefined for an empty profile");
    }
    std::set<std::string> var_names = profile.all_names();
    std::set<std::string> record_names = record.structure_names();
    std::size_t hits = 0;
    for (const auto &n : var_names) {
        if (record_names.count(n)) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(var_names.size());
}

std::vector<RankedCandidate> rank_candidates(const StructuralProfile &profile,
                                             const KnowledgeBase &kb) {
    std::vector<RankedCandidate> out;
    if (profile.empty()) {
        return out;
    }
    for (const auto &record : kb.records()) {
        double s = score(profile, record);
        if (s >= kScoreThreshold) {
            out.push_back({record, s});
        }
    }
    std::sort(out.begin(), out.end(), [](const RankedCandidate &a, const RankedCandidate &b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.record.source != b.record.source) {
            return a.record.source < b.record.source; // project first
        }
        return std::tie(a.record.name, a.record.package) < std::tie(b.record.name, b.record.package);
    });
    if (out.size() > static_cast<std::size_t>(kMaxCandidates)) {
        out.resize(static_cast<std::size_t>(kMaxCandidates));
    }
    return out;
}

} // namespace slicetype
