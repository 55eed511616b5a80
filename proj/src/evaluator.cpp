#include "slicetype/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace slicetype {

// ---------------------------------------------------------------------------
// Type annotation grammar
// ---------------------------------------------------------------------------

namespace {

struct TypeNode {
    enum class Kind { Name, Generic, Struct, Union };
    struct Field {
        std::string name;
        bool optional = false;
        std::vector<TypeNode> type; // single element; vector avoids recursion issues
    };
    Kind kind = Kind::Name;
    std::string name;            // Name text or Generic base
    std::vector<TypeNode> args;  // Generic args or Union members
    std::vector<Field> fields;   // Struct
};

bool union_base(const std::string &name) {
    std::size_t dot = name.rfind('.');
    std::string last = dot == std::string::npos ? name : name.substr(dot + 1);
    return last == "Union" || last == "union";
}

bool optional_base(const std::string &name) {
    std::size_t dot = name.rfind('.');
    std::string last = dot == std::string::npos ? name : name.substr(dot + 1);
    return last == "Optional";
}

class TypeParser {
  public:
    explicit TypeParser(const std::string &text) : text_(text) {}

    std::optional<TypeNode> run() {
        skip_ws();
        auto node = parse_union();
        if (!node) {
            return std::nullopt;
        }
        skip_ws();
        if (pos_ != text_.size()) {
            return std::nullopt;
        }
        return node;
    }

  private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    bool eat(char c) {
        skip_ws();
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::optional<TypeNode> parse_union() {
        auto first = parse_single();
        if (!first) {
            return std::nullopt;
        }
        std::vector<TypeNode> members{*first};
        while (true) {
            skip_ws();
            if (peek() != '|') {
                break;
            }
            ++pos_;
            auto next = parse_single();
            if (!next) {
                return std::nullopt;
            }
            members.push_back(*next);
        }
        if (members.size() == 1) {
            return members.front();
        }
        TypeNode node;
        node.kind = TypeNode::Kind::Union;
        node.args = std::move(members);
        return node;
    }

    std::optional<TypeNode> parse_single() {
        skip_ws();
        if (peek() == '{') {
            return parse_struct();
        }
        if (text_.compare(pos_, 3, "...") == 0) {
            pos_ += 3;
            TypeNode node;
            node.name = "...";
            return node;
        }
        auto name = parse_dotted_name();
        if (!name) {
            return std::nullopt;
        }
        skip_ws();
        char open = peek();
        if (open == '[' || open == '<') {
            char close = open == '[' ? ']' : '>';
            ++pos_;
            TypeNode node;
            node.kind = TypeNode::Kind::Generic;
            node.name = *name;
            while (true) {
                auto arg = parse_union();
                if (!arg) {
                    return std::nullopt;
                }
                node.args.push_back(std::move(*arg));
                skip_ws();
                if (eat(',')) {
                    continue;
                }
                if (eat(close)) {
                    break;
                }
                return std::nullopt;
            }
            if (node.args.empty()) {
                return std::nullopt;
            }
            return node;
        }
        TypeNode node;
        node.name = *name;
        return node;
    }

    std::optional<TypeNode> parse_struct() {
        if (!eat('{')) {
            return std::nullopt;
        }
        TypeNode node;
        node.kind = TypeNode::Kind::Struct;
        skip_ws();
        if (eat('}')) {
            return node; // empty structure
        }
        while (true) {
            skip_ws();
            auto name = parse_identifier();
            if (!name) {
                return std::nullopt;
            }
            TypeNode::Field field;
            field.name = *name;
            if (eat('?')) {
                field.optional = true;
            }
            if (!eat(':')) {
                return std::nullopt;
            }
            auto type = parse_union();
            if (!type) {
                return std::nullopt;
            }
            field.type.push_back(std::move(*type));
            node.fields.push_back(std::move(field));
            skip_ws();
            if (eat(',')) {
                continue;
            }
            if (eat('}')) {
                break;
            }
            return std::nullopt;
        }
        return node;
    }

    std::optional<std::string> parse_identifier() {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ >= text_.size() ||
            !(std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            return std::nullopt;
        }
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        return text_.substr(start, pos_ - start);
    }

    std::optional<std::string> parse_dotted_name() {
        auto first = parse_identifier();
        if (!first) {
            return std::nullopt;
        }
        std::string out = *first;
        while (true) {
            std::size_t save = pos_;
            skip_ws();
            if (peek() != '.') {
                pos_ = save;
                break;
            }
            ++pos_;
            auto next = parse_identifier();
            if (!next) {
                pos_ = save;
                break;
            }
            out += "." + *next;
        }
        return out;
    }

    const std::string &text_;
    std::size_t pos_ = 0;
};

std::string canon_node(const TypeNode &node);

std::string canon_union_members(const std::vector<std::string> &members) {
    std::vector<std::string> sorted = members;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() == 1) {
        return sorted.front();
    }
    std::string out = "Union[";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i != 0) {
            out += ',';
        }
        out += sorted[i];
    }
    out += ']';
    return out;
}

/// Union alternatives of one node, canonicalized (used both for nested
/// rendering and top-level expansion).
std::vector<std::string> union_alternatives(const TypeNode &node) {
    std::vector<std::string> out;
    if (node.kind == TypeNode::Kind::Union) {
        for (const auto &m : node.args) {
            auto nested = union_alternatives(m);
            out.insert(out.end(), nested.begin(), nested.end());
        }
        return out;
    }
    if (node.kind == TypeNode::Kind::Generic && union_base(node.name)) {
        for (const auto &m : node.args) {
            auto nested = union_alternatives(m);
            out.insert(out.end(), nested.begin(), nested.end());
        }
        return out;
    }
    if (node.kind == TypeNode::Kind::Generic && optional_base(node.name)) {
        for (const auto &m : node.args) {
            auto nested = union_alternatives(m);
            out.insert(out.end(), nested.begin(), nested.end());
        }
        out.push_back("None");
        return out;
    }
    out.push_back(canon_node(node));
    return out;
}

std::string canon_node(const TypeNode &node) {
    switch (node.kind) {
    case TypeNode::Kind::Name:
        return node.name;
    case TypeNode::Kind::Union:
        return canon_union_members(union_alternatives(node));
    case TypeNode::Kind::Generic: {
        if (union_base(node.name) || optional_base(node.name)) {
            return canon_union_members(union_alternatives(node));
        }
        std::string out = node.name + "[";
        for (std::size_t i = 0; i < node.args.size(); ++i) {
            if (i != 0) {
                out += ',';
            }
            out += canon_node(node.args[i]);
        }
        out += ']';
        return out;
    }
    case TypeNode::Kind::Struct: {
        auto fields = node.fields;
        std::sort(fields.begin(), fields.end(),
                  [](const TypeNode::Field &a, const TypeNode::Field &b) { return a.name < b.name; });
        std::string out = "{";
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i != 0) {
                out += ',';
            }
            out += fields[i].name;
            if (fields[i].optional) {
                out += '?';
            }
            out += ':';
            out += canon_node(fields[i].type.front());
        }
        out += '}';
        return out;
    }
    }
    return node.name;
}

constexpr int kOptionalFieldCap = 8;

void expand_struct(const TypeNode &node, std::set<std::string> &out, Diagnostics *diags) {
    auto fields = node.fields;
    std::sort(fields.begin(), fields.end(),
              [](const TypeNode::Field &a, const TypeNode::Field &b) { return a.name < b.name; });
    std::vector<std::size_t> optional_idx;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].optional) {
            optional_idx.push_back(i);
        }
    }
    if (static_cast<int>(optional_idx.size()) > kOptionalFieldCap) {
        if (diags != nullptr) {
            diags->warn("structural type has " + std::to_string(optional_idx.size()) +
                        " optional fields; expanding only the first " +
                        std::to_string(kOptionalFieldCap));
        }
        // extras are treated as required
        optional_idx.resize(kOptionalFieldCap);
    }
    std::size_t variants = std::size_t{1} << optional_idx.size();
    for (std::size_t mask = 0; mask < variants; ++mask) {
        std::string variant = "{";
        bool first = true;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            auto opt_pos = std::find(optional_idx.begin(), optional_idx.end(), i);
            if (opt_pos != optional_idx.end()) {
                std::size_t bit = static_cast<std::size_t>(opt_pos - optional_idx.begin());
                if ((mask & (std::size_t{1} << bit)) == 0) {
                    continue; // field omitted in this variant
                }
            }
            if (!first) {
                variant += ',';
            }
            first = false;
            variant += fields[i].name;
            variant += ':';
            variant += canon_node(fields[i].type.front());
        }
        variant += '}';
        out.insert(variant);
    }
}

void expand_members(const TypeNode &node, std::set<std::string> &out, Diagnostics *diags) {
    if (node.kind == TypeNode::Kind::Union) {
        for (const auto &m : node.args) {
            expand_members(m, out, diags);
        }
        return;
    }
    if (node.kind == TypeNode::Kind::Generic && union_base(node.name)) {
        for (const auto &m : node.args) {
            expand_members(m, out, diags);
        }
        return;
    }
    if (node.kind == TypeNode::Kind::Generic && optional_base(node.name)) {
        for (const auto &m : node.args) {
            expand_members(m, out, diags);
        }
        out.insert("None");
        return;
    }
    if (node.kind == TypeNode::Kind::Struct) {
        expand_struct(node, out, diags);
        return;
    }
    out.insert(canon_node(node));
}

std::string trim(const std::string &s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

} // namespace

bool TypeSet::intersects(const TypeSet &other) const {
    for (const auto &m : members) {
        if (other.members.count(m)) {
            return true;
        }
    }
    return false;
}

std::string TypeSet::canonical() const {
    return canon_union_members({members.begin(), members.end()});
}

std::optional<TypeSet> parse_type_strict(const std::string &annotation) {
    auto node = TypeParser(annotation).run();
    if (!node) {
        return std::nullopt;
    }
    TypeSet set;
    expand_members(*node, set.members, nullptr);
    return set;
}

TypeSet parse_type(const std::string &annotation, Diagnostics *diags) {
    auto node = TypeParser(annotation).run();
    TypeSet set;
    if (!node) {
        std::string raw = trim(annotation);
        if (diags != nullptr) {
            diags->warn("annotation outside the type grammar kept verbatim: '" + raw + "'");
        }
        set.members.insert(raw);
        return set;
    }
    expand_members(*node, set.members, diags);
    return set;
}

bool is_any_type(const std::string &raw) {
    std::string t = trim(raw);
    std::size_t dot = t.rfind('.');
    if (dot != std::string::npos) {
        t = t.substr(dot + 1);
    }
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return t == "any";
}

bool is_elementary_name(const std::string &name) {
    static const std::set<std::string> vocab = {
        "int",  "float",  "str",     "bool",      "bytes",  "complex", "none",
        "number", "string", "boolean", "void",     "null",   "undefined", "object",
        "list", "dict",   "set",     "tuple",     "array",  "map"};
    std::string t = trim(name);
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "nonetype") {
        t = "none";
    }
    return vocab.count(t) > 0;
}

bool is_bare_identifier(const std::string &raw) {
    std::string t = trim(raw);
    if (t.empty()) {
        return false;
    }
    bool expect_start = true;
    for (char c : t) {
        if (expect_start) {
            if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '_')) {
                return false;
            }
            expect_start = false;
        } else if (c == '.') {
            expect_start = true;
        } else if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
            return false;
        }
    }
    return !expect_start;
}

bool exact_match(const TypeSet &label, const TypeSet &pred, const std::string &label_raw,
                 const std::string &pred_raw) {
    if (is_any_type(label_raw)) {
        return true;
    }
    if (is_any_type(pred_raw)) {
        return false;
    }
    return label.members == pred.members;
}

namespace {

/// Outer constructor when the raw text is one generic application
/// (unions and optionals are member sets, not generic categories).
std::optional<std::string> generic_constructor(const std::string &raw) {
    auto node = TypeParser(raw).run();
    if (!node || node->kind != TypeNode::Kind::Generic) {
        return std::nullopt;
    }
    if (union_base(node->name) || optional_base(node->name)) {
        return std::nullopt;
    }
    return node->name;
}

} // namespace

bool base_match(const TypeSet &label, const TypeSet &pred, const std::string &label_raw,
                const std::string &pred_raw) {
    if (is_any_type(label_raw)) {
        return true;
    }
    if (is_any_type(pred_raw)) {
        return false;
    }
    if (label.intersects(pred)) {
        return true;
    }
    auto lc = generic_constructor(label_raw);
    auto pc = generic_constructor(pred_raw);
    return lc && pc && *lc == *pc;
}

double mrr_at_n(const std::vector<std::optional<int>> &first_correct_ranks, int n) {
    if (first_correct_ranks.empty()) {
        throw Error("MRR is undefined for an empty sample list");
    }
    double sum = 0.0;
    for (const auto &rank : first_correct_ranks) {
        if (rank && *rank >= 1 && *rank <= n) {
            sum += 1.0 / static_cast<double>(*rank);
        }
    }
    return sum / static_cast<double>(first_correct_ranks.size());
}

const char *to_string(TypeKind kind) {
    switch (kind) {
    case TypeKind::Ele: return "Ele";
    case TypeKind::Gen: return "Gen";
    case TypeKind::Usr: return "Usr";
    }
    return "?";
}

const char *to_string(SampleSlot slot) {
    switch (slot) {
    case SampleSlot::Var: return "Var";
    case SampleSlot::Ret: return "Ret";
    case SampleSlot::Arg: return "Arg";
    }
    return "?";
}

std::optional<SampleSlot> parse_slot(const std::string &text) {
    std::string t = trim(text);
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "var" || t == "variable" || t == "local") {
        return SampleSlot::Var;
    }
    if (t == "ret" || t == "return") {
        return SampleSlot::Ret;
    }
    if (t == "arg" || t == "param" || t == "parameter") {
        return SampleSlot::Arg;
    }
    return std::nullopt;
}

TypeKind categorize(const std::string &label_raw, const KnowledgeBase &kb) {
    (void)kb; // identifiers outside the elementary vocabulary are Usr either way
    auto node = TypeParser(label_raw).run();
    if (!node) {
        return TypeKind::Usr;
    }
    switch (node->kind) {
    case TypeNode::Kind::Name:
        return is_elementary_name(node->name) ? TypeKind::Ele : TypeKind::Usr;
    case TypeNode::Kind::Generic:
    case TypeNode::Kind::Union:
        return TypeKind::Gen;
    case TypeNode::Kind::Struct:
        return TypeKind::Usr;
    }
    return TypeKind::Usr;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

double GroupStats::em_percent(int k_index) const {
    return count == 0 ? 0.0 : 100.0 * em_hits[k_index] / count;
}
double GroupStats::bm_percent(int k_index) const {
    return count == 0 ? 0.0 : 100.0 * bm_hits[k_index] / count;
}
double GroupStats::mrr() const {
    return count == 0 ? 0.0 : mrr_sum / count;
}

const std::vector<std::string> &Report::group_order() {
    static const std::vector<std::string> order = {"All", "Var", "Ret", "Arg", "Ele", "Gen", "Usr"};
    return order;
}

Report evaluate(const std::vector<EvalSample> &samples, const KnowledgeBase &kb) {
    Report report;
    for (const auto &g : Report::group_order()) {
        report.groups[g];
    }
    constexpr int ks[3] = {1, 3, 5};
    for (const auto &sample : samples) {
        TypeSet label = parse_type(sample.label);
        TypeKind kind = categorize(sample.label, kb);

        std::optional<int> em_rank, bm_rank;
        int limit = std::min<int>(5, static_cast<int>(sample.predictions.size()));
        for (int i = 0; i < limit; ++i) {
            const std::string &raw = sample.predictions[static_cast<std::size_t>(i)];
            TypeSet pred = parse_type(raw);
            if (!em_rank && exact_match(label, pred, sample.label, raw)) {
                em_rank = i + 1;
            }
            if (!bm_rank && base_match(label, pred, sample.label, raw)) {
                bm_rank = i + 1;
            }
        }
        auto update = [&](GroupStats &g) {
            ++g.count;
            for (int k = 0; k < 3; ++k) {
                if (em_rank && *em_rank <= ks[k]) {
                    ++g.em_hits[k];
                }
                if (bm_rank && *bm_rank <= ks[k]) {
                    ++g.bm_hits[k];
                }
            }
            if (em_rank && *em_rank <= 5) {
                g.mrr_sum += 1.0 / *em_rank;
            }
        };
        update(report.groups["All"]);
        update(report.groups[to_string(sample.slot)]);
        update(report.groups[to_string(kind)]);
    }
    return report;
}

std::string render_report_table(const Report &report) {
    std::ostringstream out;
    out << std::left << std::setw(6) << "Group" << std::right << std::setw(7) << "Count";
    for (const char *col : {"EM@1", "EM@3", "EM@5", "BM@1", "BM@3", "BM@5", "MRR@5"}) {
        out << std::setw(8) << col;
    }
    out << "\n";
    out << std::fixed;
    for (const auto &name : Report::group_order()) {
        const GroupStats &g = report.groups.at(name);
        out << std::left << std::setw(6) << name << std::right << std::setw(7) << g.count;
        out << std::setprecision(1);
        for (int k = 0; k < 3; ++k) {
            out << std::setw(8) << g.em_percent(k);
        }
        for (int k = 0; k < 3; ++k) {
            out << std::setw(8) << g.bm_percent(k);
        }
        out << std::setprecision(4) << std::setw(8) << g.mrr() << "\n";
    }
    return out.str();
}

std::string render_report_json(const Report &report) {
    nlohmann::ordered_json j;
    for (const auto &name : Report::group_order()) {
        const GroupStats &g = report.groups.at(name);
        nlohmann::ordered_json cell;
        cell["count"] = g.count;
        cell["em"] = {{"top1", g.em_percent(0)}, {"top3", g.em_percent(1)}, {"top5", g.em_percent(2)}};
        cell["bm"] = {{"top1", g.bm_percent(0)}, {"top3", g.bm_percent(1)}, {"top5", g.bm_percent(2)}};
        cell["mrr_at_5"] = g.mrr();
        j[name] = std::move(cell);
    }
    return j.dump(2) + "\n";
}

} // namespace slicetype
