#include "slicetype/knowledge_base.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "json.hpp"

namespace slicetype {

using json = nlohmann::ordered_json;

std::set<std::string> TypeRecord::structure_names() const {
    std::set<std::string> out = fields;
    for (const auto &sig : api) {
        out.insert(sig.name);
    }
    return out;
}

std::vector<std::string> name_bigrams(const std::string &name) {
    std::string lower;
    for (char c : name) {
        lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::vector<std::string> out;
    if (lower.size() < 2) {
        if (!lower.empty()) {
            out.push_back(lower);
        }
        return out;
    }
    for (std::size_t i = 0; i + 1 < lower.size(); ++i) {
        out.push_back(lower.substr(i, 2));
    }
    return out;
}

void KnowledgeBase::add(TypeRecord record) {
    records_.push_back(std::move(record));
}

void KnowledgeBase::rebuild_indexes() {
    std::sort(records_.begin(), records_.end(), [](const TypeRecord &a, const TypeRecord &b) {
        return std::tie(a.name, a.package, a.source) < std::tie(b.name, b.package, b.source);
    });
    name_index_.clear();
    for (int i = 0; i < static_cast<int>(records_.size()); ++i) {
        name_index_[records_[static_cast<std::size_t>(i)].name].push_back(i);
    }
    stats_ = TokenStats{};
    stats_.doc_count = static_cast<int>(records_.size());
    double total_len = 0.0;
    for (const auto &r : records_) {
        auto grams = name_bigrams(r.name);
        total_len += static_cast<double>(grams.size());
        std::set<std::string> unique(grams.begin(), grams.end());
        for (const auto &g : unique) {
            ++stats_.bigram_df[g];
        }
    }
    stats_.avg_doc_len = stats_.doc_count > 0 ? total_len / stats_.doc_count : 0.0;
}

std::vector<const TypeRecord *> KnowledgeBase::lookup(const std::string &name) const {
    std::vector<const TypeRecord *> out;
    auto it = name_index_.find(name);
    if (it == name_index_.end()) {
        return out;
    }
    for (int i : it->second) {
        out.push_back(&records_[static_cast<std::size_t>(i)]);
    }
    std::stable_sort(out.begin(), out.end(), [](const TypeRecord *a, const TypeRecord *b) {
        return a->source < b->source; // Project before Library
    });
    return out;
}

std::vector<const TypeRecord *> lookup_type(const KnowledgeBase &kb, const std::string &name) {
    return kb.lookup(name);
}

namespace {

bool is_public(const std::string &name) {
    return !name.empty() && name[0] != '_';
}

TypeRecord record_for_class(const ClassDecl &cls, const std::string &package) {
    TypeRecord rec;
    rec.name = cls.name;
    rec.package = package;
    rec.source = RecordSource::Project;
    for (const auto &f : cls.fields) {
        if (is_public(f)) {
            rec.fields.insert(f);
        }
    }
    for (const auto &m : cls.methods) {
        ApiSignature sig;
        sig.name = m.name;
        for (const auto &p : m.params) {
            sig.params.push_back(p.name);
        }
        rec.api.push_back(std::move(sig));
    }
    std::sort(rec.api.begin(), rec.api.end());
    return rec;
}

} // namespace

KnowledgeBase build_project_kb(const Project &project) {
    KnowledgeBase kb;
    for (const auto &[unit_idx, cls] : project.all_classes()) {
        kb.add(record_for_class(*cls, module_name_for_path(project.unit(unit_idx).path)));
    }
    kb.rebuild_indexes();
    return kb;
}

namespace {

int line_of_offset(const std::string &text, std::size_t offset) {
    int line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
        }
    }
    return line;
}

TypeRecord record_from_json(const json &j, RecordSource default_source) {
    TypeRecord rec;
    rec.name = j.at("name").get<std::string>();
    rec.package = j.value("package", std::string{});
    if (rec.name.empty()) {
        throw FormatError("record with empty name");
    }
    for (const auto &f : j.value("fields", json::array())) {
        rec.fields.insert(f.get<std::string>());
    }
    for (const auto &a : j.value("api", json::array())) {
        ApiSignature sig;
        sig.name = a.at("name").get<std::string>();
        for (const auto &p : a.value("params", json::array())) {
            sig.params.push_back(p.get<std::string>());
        }
        rec.api.push_back(std::move(sig));
    }
    std::sort(rec.api.begin(), rec.api.end());
    std::string source = j.value("source", std::string{});
    if (source == "project") {
        rec.source = RecordSource::Project;
    } else if (source == "library" || source.empty()) {
        rec.source = default_source;
    } else {
        throw FormatError("unknown record source '" + source + "'");
    }
    return rec;
}

json record_to_json(const TypeRecord &rec) {
    json j;
    j["name"] = rec.name;
    j["package"] = rec.package;
    j["fields"] = json::array();
    for (const auto &f : rec.fields) {
        j["fields"].push_back(f);
    }
    j["api"] = json::array();
    for (const auto &sig : rec.api) {
        json a;
        a["name"] = sig.name;
        a["params"] = sig.params;
        j["api"].push_back(std::move(a));
    }
    j["source"] = rec.source == RecordSource::Project ? "project" : "library";
    return j;
}

} // namespace

void merge_library_kb_text(KnowledgeBase &kb, const std::string &manifest_json,
                           const std::string &origin, Diagnostics &diags) {
    json parsed;
    try {
        parsed = json::parse(manifest_json);
    } catch (const json::parse_error &e) {
        throw FormatError(std::string("malformed manifest: ") + e.what(), origin,
                          line_of_offset(manifest_json, e.byte));
    }
    if (!parsed.is_array()) {
        throw FormatError("manifest must be a JSON array of records", origin, 1);
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto &r : kb.records()) {
        seen.insert({r.name, r.package});
    }
    for (const auto &j : parsed) {
        TypeRecord rec;
        try {
            rec = record_from_json(j, RecordSource::Library);
        } catch (const json::exception &e) {
            throw FormatError(std::string("malformed record: ") + e.what(), origin, 1);
        }
        if (!seen.insert({rec.name, rec.package}).second) {
            diags.warn("duplicate record (" + rec.name + ", " + rec.package + ") rejected", origin);
            continue;
        }
        kb.add(std::move(rec));
    }
    kb.rebuild_indexes();
}

void merge_library_kb(KnowledgeBase &kb, const std::string &manifest_path, Diagnostics &diags) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
        throw NotFoundError("manifest not found: " + manifest_path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    merge_library_kb_text(kb, text, manifest_path, diags);
}

std::string serialize_kb(const KnowledgeBase &kb) {
    json arr = json::array();
    for (const auto &rec : kb.records()) {
        arr.push_back(record_to_json(rec));
    }
    return arr.dump(2) + "\n";
}

KnowledgeBase load_kb_text(const std::string &json_text, const std::string &origin) {
    KnowledgeBase kb;
    json parsed;
    try {
        parsed = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw FormatError(std::string("malformed knowledge base: ") + e.what(), origin,
                          line_of_offset(json_text, e.byte));
    }
    if (!parsed.is_array()) {
        throw FormatError("knowledge base must be a JSON array", origin, 1);
    }
    for (const auto &j : parsed) {
        try {
            kb.add(record_from_json(j, RecordSource::Library));
        } catch (const json::exception &e) {
            throw FormatError(std::string("malformed record: ") + e.what(), origin, 1);
        }
    }
    kb.rebuild_indexes();
    return kb;
}

KnowledgeBase load_kb(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("knowledge base not found: " + path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_kb_text(text, path);
}

void save_kb(const KnowledgeBase &kb, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write knowledge base: " + path);
    }
    out << serialize_kb(kb);
}

} // namespace slicetype
