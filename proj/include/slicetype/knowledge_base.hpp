#pragma once

#include "slicetype/project.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace slicetype {

struct ApiSignature {
    std::string name;
    std::vector<std::string> params;
    auto operator<=>(const ApiSignature &) const = default;
};

enum class RecordSource { Project, Library };

/// One knowledge-base entry: the structural shape of a class.
struct TypeRecord {
    std::string name;
    std::string package;
    std::set<std::string> fields;   // public field names
    std::vector<ApiSignature> api;  // public methods, sorted by name
    RecordSource source = RecordSource::Project;

    /// Field names plus method names, the record side of the match score.
    std::set<std::string> structure_names() const;
};

/// Structural type store over project classes and library manifests.
/// Immutable once built; lookups prefer project records over library ones.
class KnowledgeBase {
  public:
    void add(TypeRecord record);
    void rebuild_indexes();

    const std::vector<TypeRecord> &records() const { return records_; }
    bool empty() const { return records_.empty(); }
    std::size_t size() const { return records_.size(); }

    /// Exact-name lookup, project records first.
    std::vector<const TypeRecord *> lookup(const std::string &name) const;
    bool contains(const std::string &name) const { return !lookup(name).empty(); }

    /// Name corpus statistics for similarity scoring (documents are the
    /// record names tokenized to lowercase character bigrams).
    struct TokenStats {
        std::map<std::string, int> bigram_df;
        double avg_doc_len = 0.0;
        int doc_count = 0;
    };
    const TokenStats &token_stats() const { return stats_; }

  private:
    std::vector<TypeRecord> records_; // sorted by (name, package, source)
    std::map<std::string, std::vector<int>> name_index_;
    TokenStats stats_;
};

/// Lowercase character bigrams of a name ("Name" -> na, am, me).
std::vector<std::string> name_bigrams(const std::string &name);

/// One record per class declared in the project (public structure only).
KnowledgeBase build_project_kb(const Project &project);

/// Append library records from a manifest file (same JSON shape as the KB
/// serialization). Duplicate (name, package) entries are rejected with a
/// diagnostic. Throws FormatError on malformed input.
void merge_library_kb(KnowledgeBase &kb, const std::string &manifest_path, Diagnostics &diags);
void merge_library_kb_text(KnowledgeBase &kb, const std::string &manifest_json,
                           const std::string &origin, Diagnostics &diags);

std::vector<const TypeRecord *> lookup_type(const KnowledgeBase &kb, const std::string &name);

std::string serialize_kb(const KnowledgeBase &kb);
KnowledgeBase load_kb(const std::string &path);
KnowledgeBase load_kb_text(const std::string &json_text, const std::string &origin);
void save_kb(const KnowledgeBase &kb, const std::string &path);

} // namespace slicetype
