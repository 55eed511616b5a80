#include "slicetype/prompt_pipeline.hpp"

#include "slicetype/bm25.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <sstream>

namespace slicetype {

namespace {

std::string trim_copy(const std::string &s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::string collapse_ws(const std::string &s) {
    std::string out;
    bool in_ws = false;
    for (char c : trim_copy(s)) {
        if (c == ' ' || c == '\t') {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) {
            out += ' ';
        }
        in_ws = false;
        out += c;
    }
    return out;
}

} // namespace

std::string Prompt::text() const {
    std::ostringstream out;
    out << instructions << "\n\n";
    out << "### Sliced code\n" << masked_slices;
    if (!candidates.empty()) {
        out << "\n### Candidate types\n";
        int n = 1;
        for (const auto &c : candidates) {
            out << n++ << ". " << c.record.name;
            if (!c.record.package.empty()) {
                out << " (package " << c.record.package << ")";
            }
            out << "\n";
            out << "   fields: ";
            bool first = true;
            for (const auto &f : c.record.fields) {
                out << (first ? "" : ", ") << f;
                first = false;
            }
            if (first) {
                out << "(none)";
            }
            out << "\n   api: ";
            first = true;
            for (const auto &sig : c.record.api) {
                out << (first ? "" : ", ") << sig.name << "(";
                for (std::size_t i = 0; i < sig.params.size(); ++i) {
                    out << (i == 0 ? "" : ", ") << sig.params[i];
                }
                out << ")";
                first = false;
            }
            if (first) {
                out << "(none)";
            }
            out << "\n";
        }
    }
    out << "\n### Answer\nReply with exactly one type name for <mask>.\n";
    return out.str();
}

int Prompt::token_estimate() const {
    std::istringstream in(text());
    int count = 0;
    std::string tok;
    while (in >> tok) {
        ++count;
    }
    return count;
}

Prompt build_prompt(const std::vector<Slice> &slices, const std::vector<RankedCandidate> &candidates,
                    const MaskTarget &target) {
    Prompt prompt;
    prompt.instructions =
        "Infer the data type of the variable marked <mask> in the code below. "
        "The code is a dependence slice: it contains the statements related to that variable, "
        "prefixed with their original line numbers.";
    prompt.masked_slices = render_slices(slices, target);
    prompt.candidates = candidates;
    if (prompt.candidates.size() > static_cast<std::size_t>(kMaxCandidates)) {
        prompt.candidates.resize(static_cast<std::size_t>(kMaxCandidates));
    }
    return prompt;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

std::string canonicalize_sample(const std::string &completion) {
    // drop fence lines, keep the first non-empty content line
    std::istringstream in(completion);
    std::string line, content;
    while (std::getline(in, line)) {
        std::string t = trim_copy(line);
        if (t.empty()) {
            continue;
        }
        if (t.rfind("```", 0) == 0) {
            continue;
        }
        content = t;
        break;
    }
    if (content.empty()) {
        return {};
    }
    auto strip_wrappers = [](std::string s) {
        bool again = true;
        while (again && s.size() >= 2) {
            again = false;
            char a = s.front(), b = s.back();
            if ((a == '`' && b == '`') || (a == '"' && b == '"') || (a == '\'' && b == '\'')) {
                s = trim_copy(s.substr(1, s.size() - 2));
                again = true;
            }
        }
        while (!s.empty() && (s.back() == '.' || s.back() == '`')) {
            s.pop_back();
        }
        while (!s.empty() && s.front() == '`') {
            s.erase(s.begin());
        }
        return trim_copy(s);
    };
    content = strip_wrappers(content);
    if (content.empty()) {
        return {};
    }
    if (parse_type_strict(content)) {
        return content;
    }
    // longest token span that parses in the type grammar, earliest first
    std::vector<std::string> tokens;
    std::istringstream ts(content);
    std::string tok;
    while (ts >> tok) {
        tokens.push_back(tok);
    }
    for (std::size_t len = tokens.size(); len >= 1; --len) {
        for (std::size_t start = 0; start + len <= tokens.size(); ++start) {
            std::string span;
            for (std::size_t i = start; i < start + len; ++i) {
                if (i != start) {
                    span += ' ';
                }
                span += tokens[i];
            }
            if (parse_type_strict(span)) {
                return span;
            }
        }
    }
    return content;
}

std::vector<std::string> sample(GenerationBackend &backend, const std::string &prompt,
                                const SamplingConfig &config, Diagnostics &diags) {
    std::vector<std::string> out;
    for (int i = 0; i < config.n_samples; ++i) {
        std::string completion;
        bool ok = false;
        for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
            try {
                completion = backend.complete(prompt, config);
                ok = true;
                break;
            } catch (const BackendError &e) {
                if (attempt == config.max_retries) {
                    diags.warn("sample " + std::to_string(i + 1) + " dropped after " +
                               std::to_string(attempt + 1) + " attempts: " + e.what());
                }
            } catch (const FormatError &e) {
                diags.warn("sample " + std::to_string(i + 1) + " skipped: " + e.what());
                break;
            }
        }
        if (!ok) {
            continue;
        }
        std::string cleaned = canonicalize_sample(completion);
        if (cleaned.empty()) {
            diags.note("sample " + std::to_string(i + 1) + " was empty after cleanup");
            continue;
        }
        out.push_back(std::move(cleaned));
    }
    return out;
}

TypePrediction vote(const std::vector<std::string> &samples) {
    TypePrediction pred;
    pred.raw_samples = samples;
    std::map<std::string, std::pair<int, std::size_t>> counts; // text -> (count, first index)
    std::size_t index = 0;
    for (const auto &s : samples) {
        std::string norm = collapse_ws(s);
        if (norm.empty()) {
            ++index;
            continue;
        }
        auto it = counts.find(norm);
        if (it == counts.end()) {
            counts.emplace(norm, std::make_pair(1, index));
        } else {
            ++it->second.first;
        }
        ++index;
    }
    std::vector<std::pair<std::string, std::pair<int, std::size_t>>> ordered(counts.begin(),
                                                                             counts.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto &a, const auto &b) {
        if (a.second.first != b.second.first) {
            return a.second.first > b.second.first;
        }
        return a.second.second < b.second.second;
    });
    for (const auto &[text, info] : ordered) {
        pred.ranked.emplace_back(text, info.first);
    }
    return pred;
}

// ---------------------------------------------------------------------------
// Stage-2 normalization
// ---------------------------------------------------------------------------

std::optional<std::string> normalize_structural(const std::string &raw, const KnowledgeBase &kb) {
    std::string t = trim_copy(raw);
    if (t.empty() || t.front() != '{') {
        return std::nullopt;
    }
    auto parsed = parse_type_strict(t);
    if (!parsed) {
        return std::nullopt;
    }
    // field names of the literal form the profile
    StructuralProfile profile;
    std::string body = t.substr(1);
    std::size_t pos = 0;
    int depth = 0;
    std::string current;
    auto flush = [&]() {
        std::string field = trim_copy(current.substr(0, current.find(':')));
        while (!field.empty() && (field.back() == '?' || field.back() == ' ')) {
            field.pop_back();
        }
        if (!field.empty()) {
            profile.var_fields.insert(field);
        }
        current.clear();
    };
    for (; pos < body.size(); ++pos) {
        char c = body[pos];
        if (c == '{' || c == '[' || c == '<' || c == '(') {
            ++depth;
        } else if (c == ']' || c == '>' || c == ')') {
            --depth;
        } else if (c == '}') {
            if (depth == 0) {
                break;
            }
            --depth;
        } else if (c == ',' && depth == 0) {
            flush();
            continue;
        }
        current += c;
    }
    flush();
    if (profile.empty()) {
        return std::nullopt;
    }
    auto ranked = rank_candidates(profile, kb);
    if (ranked.empty()) {
        return std::nullopt;
    }
    return ranked.front().record.name;
}

std::string normalize_name(const std::string &raw, const KnowledgeBase &kb) {
    std::string t = trim_copy(raw);
    if (!is_bare_identifier(t) || is_elementary_name(t) || kb.contains(t)) {
        return t;
    }
    Bm25Index index;
    std::set<std::string> names;
    for (const auto &rec : kb.records()) {
        names.insert(rec.name);
    }
    for (const auto &name : names) {
        index.add_document(name, name_bigrams(name));
    }
    index.finalize();
    std::string best = index.best(name_bigrams(t));
    return best.empty() ? t : best;
}

// ---------------------------------------------------------------------------
// End-to-end inference
// ---------------------------------------------------------------------------

Prompt build_prompt_for_target(const Project &project, const DependenceGraph &sdg,
                               const KnowledgeBase &kb, const InferTarget &target,
                               const InferOptions &options) {
    auto slices = slice_all(sdg, target.ref, target.anchor, project, options.slice);
    std::vector<RankedCandidate> candidates;
    if (!options.no_candidates) {
        StructuralProfile profile = extract_structure(slices, target.ref, project);
        if (!profile.empty()) {
            candidates = rank_candidates(profile, kb);
        }
    }
    const SourceUnit &unit = project.unit(target.anchor.unit);
    const Statement *anchor_stmt = unit.statement(target.anchor.statement);
    MaskTarget mask;
    mask.path = unit.path;
    mask.line = anchor_stmt != nullptr ? anchor_stmt->line : 0;
    mask.name = target.ref.dotted();
    mask.slot = target.slot;
    return build_prompt(slices, candidates, mask);
}

TypePrediction infer(const Project &project, const DependenceGraph &sdg, const KnowledgeBase &kb,
                     GenerationBackend &backend, const InferTarget &target,
                     const InferOptions &options, Diagnostics &diags) {
    Prompt prompt = build_prompt_for_target(project, sdg, kb, target, options);
    std::string prompt_text = prompt.text();
    std::vector<std::string> samples_out = sample(backend, prompt_text, options.sampling, diags);
    TypePrediction stage1 = vote(samples_out);

    // stage 2: map structure-shaped outputs and repair unknown bare names,
    // then re-vote with merged counts
    struct Merged {
        int count = 0;
        std::size_t first_rank = 0;
    };
    std::map<std::string, Merged> merged;
    std::size_t rank = 0;
    for (const auto &[text, count] : stage1.ranked) {
        std::string name = text;
        if (auto mapped = normalize_structural(text, kb)) {
            name = *mapped;
        } else if (is_bare_identifier(text)) {
            name = normalize_name(text, kb);
        }
        auto [it, inserted] = merged.emplace(name, Merged{count, rank});
        if (!inserted) {
            it->second.count += count;
        }
        ++rank;
    }
    std::vector<std::pair<std::string, Merged>> ordered(merged.begin(), merged.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto &a, const auto &b) {
        if (a.second.count != b.second.count) {
            return a.second.count > b.second.count;
        }
        return a.second.first_rank < b.second.first_rank;
    });
    TypePrediction pred;
    pred.raw_samples = stage1.raw_samples;
    pred.prompt_tokens = prompt.token_estimate();
    for (const auto &[name, info] : ordered) {
        pred.ranked.emplace_back(name, info.count);
    }
    return pred;
}

} // namespace slicetype
