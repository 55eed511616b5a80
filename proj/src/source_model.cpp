#include "slicetype/source_model.hpp"
#include "slicetype/project.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cctype>
#include <sstream>
#include <unordered_set>

namespace slicetype {

std::string VariableRef::dotted() const {
    std::string out;
    for (const auto &q : qualifier) {
        out += q;
        out += '.';
    }
    out += name;
    return out;
}

const char *to_string(StatementKind kind) {
    switch (kind) {
    case StatementKind::Assign: return "assign";
    case StatementKind::Call: return "call";
    case StatementKind::Return: return "return";
    case StatementKind::FunctionSignature: return "function-signature";
    case StatementKind::ClassSignature: return "class-signature";
    case StatementKind::Import: return "import";
    case StatementKind::Expression: return "expression";
    case StatementKind::Control: return "control";
    }
    return "?";
}

const FunctionDecl *ClassDecl::constructor() const {
    for (const auto &m : private_methods) {
        if (m.name == "__init__") {
            return &m;
        }
    }
    for (const auto &m : methods) {
        if (m.name == "__init__") {
            return &m;
        }
    }
    return nullptr;
}

const Statement *SourceUnit::statement(int id) const {
    if (id < 0 || id >= static_cast<int>(statements.size())) {
        return nullptr;
    }
    return &statements[static_cast<std::size_t>(id)];
}

const Statement *SourceUnit::statement_at_line(int line) const {
    for (const auto &s : statements) {
        if (s.line == line) {
            return &s;
        }
    }
    return nullptr;
}

std::vector<const FunctionDecl *> SourceUnit::all_functions() const {
    std::vector<const FunctionDecl *> out;
    for (const auto &f : functions) {
        out.push_back(&f);
    }
    for (const auto &c : classes) {
        for (const auto &m : c.methods) {
            out.push_back(&m);
        }
        for (const auto &m : c.private_methods) {
            out.push_back(&m);
        }
    }
    return out;
}

const FunctionDecl *SourceUnit::function_for_scope(const std::string &scope_key) const {
    for (const FunctionDecl *f : all_functions()) {
        if (f->scope_key == scope_key) {
            return f;
        }
    }
    return nullptr;
}

std::string SourceUnit::render() const {
    std::string out;
    for (const auto &s : statements) {
        out += s.text;
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

namespace {

bool valid_utf8(const std::string &bytes) {
    std::size_t i = 0;
    while (i < bytes.size()) {
        unsigned char c = static_cast<unsigned char>(bytes[i]);
        int extra;
        if (c < 0x80) {
            extra = 0;
        } else if ((c >> 5) == 0x6) {
            extra = 1;
        } else if ((c >> 4) == 0xE) {
            extra = 2;
        } else if ((c >> 3) == 0x1E) {
            extra = 3;
        } else {
            return false;
        }
        if (i + static_cast<std::size_t>(extra) >= bytes.size() && extra > 0) {
            return false;
        }
        for (int k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(k)]) >> 6) != 0x2) {
                return false;
            }
        }
        i += static_cast<std::size_t>(extra) + 1;
    }
    return true;
}

const std::unordered_set<std::string> &keywords() {
    static const std::unordered_set<std::string> kw = {
        "False", "None", "True", "and", "as", "assert", "async", "await", "break",
        "class", "continue", "def", "del", "elif", "else", "except", "finally",
        "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
        "not", "or", "pass", "raise", "return", "try", "while", "with", "yield"};
    return kw;
}

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

struct Token {
    enum class Kind { Ident, Keyword, Number, Str, Punct };
    Kind kind;
    std::string text;
    bool is(const char *p) const { return kind == Kind::Punct && text == p; }
    bool ident() const { return kind == Kind::Ident; }
    bool kw(const char *k) const { return kind == Kind::Keyword && text == k; }
};

/// One logical line: physical lines joined across open brackets, trailing
/// backslashes, and triple-quoted strings.
struct LogicalLine {
    int line = 0; // first physical line, 1-based
    int indent = 0;
    std::string text;          // without indentation
    std::vector<Token> tokens; // lexed from text
};

bool is_string_prefix(const std::string &s) {
    if (s.size() > 2) {
        return false;
    }
    for (char c : s) {
        char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (l != 'r' && l != 'b' && l != 'f' && l != 'u') {
            return false;
        }
    }
    return !s.empty();
}

class Lexer {
  public:
    Lexer(const std::string &text, std::string path) : text_(text), path_(std::move(path)) {}

    std::vector<LogicalLine> run() {
        std::vector<LogicalLine> lines;
        while (pos_ < text_.size()) {
            LogicalLine ll = logical_line();
            if (!ll.tokens.empty()) {
                lines.push_back(std::move(ll));
            }
        }
        return lines;
    }

  private:
    [[noreturn]] void fail(const std::string &msg, int line, int col) {
        throw ParseError(msg, path_, line, col);
    }

    char peek(std::size_t off = 0) const {
        return pos_ + off < text_.size() ? text_[pos_ + off] : '\0';
    }
    bool at_end() const { return pos_ >= text_.size(); }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    // Measures indentation (tabs count to the next multiple of 8).
    int measure_indent() {
        int indent = 0;
        while (!at_end()) {
            char c = peek();
            if (c == ' ') {
                ++indent;
            } else if (c == '\t') {
                indent = (indent / 8 + 1) * 8;
            } else {
                break;
            }
            advance();
        }
        return indent;
    }

    LogicalLine logical_line() {
        LogicalLine ll;
        ll.indent = measure_indent();
        ll.line = line_;
        int depth = 0;
        bool joined_space_pending = false;
        while (!at_end()) {
            char c = peek();
            if (c == '\n') {
                advance();
                if (depth > 0) {
                    joined_space_pending = true;
                    // skip continuation-line indentation
                    measure_indent();
                    continue;
                }
                break;
            }
            if (c == '#') {
                while (!at_end() && peek() != '\n') {
                    advance();
                }
                continue;
            }
            if (c == '\\' && peek(1) == '\n') {
                advance();
                advance();
                joined_space_pending = true;
                measure_indent();
                continue;
            }
            if (joined_space_pending) {
                ll.text += ' ';
                joined_space_pending = false;
            }
            if (c == '\'' || c == '"' || (ident_start(c) && string_ahead())) {
                lex_string(ll);
                continue;
            }
            if (ident_start(c)) {
                std::string word;
                while (!at_end() && ident_char(peek())) {
                    word += peek();
                    advance();
                }
                ll.text += word;
                ll.tokens.push_back({keywords().count(word) ? Token::Kind::Keyword : Token::Kind::Ident, word});
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                std::string num;
                while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' ||
                                     peek() == '_' ||
                                     ((peek() == '+' || peek() == '-') && !num.empty() &&
                                      (num.back() == 'e' || num.back() == 'E')))) {
                    num += peek();
                    advance();
                }
                ll.text += num;
                ll.tokens.push_back({Token::Kind::Number, num});
                continue;
            }
            if (c == '(' || c == '[' || c == '{') {
                ++depth;
            } else if (c == ')' || c == ']' || c == '}') {
                --depth;
                if (depth < 0) {
                    fail("unbalanced closing bracket", line_, col_);
                }
            }
            // multi-char operators worth keeping as one token
            static const std::array<const char *, 22> ops = {
                "**=", "//=", ">>=", "<<=", "->",  "==", "!=", "<=", ">=", "+=", "-=",
                "*=",  "/=",  "%=",  "&=",  "|=",  "^=", "**", "//", ">>", "<<", ":="};
            bool matched = false;
            for (const char *op : ops) {
                std::size_t n = std::char_traits<char>::length(op);
                if (text_.compare(pos_, n, op) == 0) {
                    ll.text += op;
                    ll.tokens.push_back({Token::Kind::Punct, op});
                    for (std::size_t k = 0; k < n; ++k) {
                        advance();
                    }
                    matched = true;
                    break;
                }
            }
            if (matched) {
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r') {
                if (!ll.text.empty() && ll.text.back() != ' ') {
                    ll.text += ' ';
                }
                advance();
                continue;
            }
            ll.text += c;
            ll.tokens.push_back({Token::Kind::Punct, std::string(1, c)});
            advance();
        }
        if (depth > 0) {
            fail("unclosed bracket at end of input", ll.line, 1);
        }
        // trim trailing blanks from the rendered text
        while (!ll.text.empty() && ll.text.back() == ' ') {
            ll.text.pop_back();
        }
        return ll;
    }

    // True when the identifier at pos_ is a string prefix (r"", f'', ...).
    bool string_ahead() const {
        std::size_t k = pos_;
        std::string prefix;
        while (k < text_.size() && ident_char(text_[k]) && prefix.size() <= 2) {
            prefix += text_[k];
            ++k;
        }
        return k < text_.size() && (text_[k] == '\'' || text_[k] == '"') && is_string_prefix(prefix);
    }

    void lex_string(LogicalLine &ll) {
        int start_line = line_;
        int start_col = col_;
        std::string raw;
        while (!at_end() && ident_char(peek())) { // prefix letters
            raw += peek();
            advance();
        }
        char quote = peek();
        bool triple = text_.compare(pos_, 3, std::string(3, quote)) == 0;
        int quotes = triple ? 3 : 1;
        for (int k = 0; k < quotes; ++k) {
            raw += peek();
            advance();
        }
        while (true) {
            if (at_end()) {
                fail("unterminated string literal", start_line, start_col);
            }
            char c = peek();
            if (c == '\\' && !triple) {
                raw += c;
                advance();
                if (at_end()) {
                    fail("unterminated string literal", start_line, start_col);
                }
                raw += peek();
                advance();
                continue;
            }
            if (!triple && c == '\n') {
                fail("unterminated string literal", start_line, start_col);
            }
            if (c == quote && (!triple || text_.compare(pos_, 3, std::string(3, quote)) == 0)) {
                for (int k = 0; k < quotes; ++k) {
                    raw += peek();
                    advance();
                }
                break;
            }
            raw += (c == '\n') ? ' ' : c; // keep rendered statements single-line
            advance();
        }
        ll.text += raw;
        ll.tokens.push_back({Token::Kind::Str, raw});
    }

    const std::string &text_;
    std::string path_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

// ---------------------------------------------------------------------------
// Expression scanning: uses + call sites from a token span
// ---------------------------------------------------------------------------

using Span = std::pair<std::size_t, std::size_t>; // [begin, end)

int bracket_delta(const Token &t) {
    if (t.kind != Token::Kind::Punct) {
        return 0;
    }
    if (t.text == "(" || t.text == "[" || t.text == "{") {
        return 1;
    }
    if (t.text == ")" || t.text == "]" || t.text == "}") {
        return -1;
    }
    return 0;
}

std::vector<Span> split_top_level(const std::vector<Token> &toks, Span span, const char *sep) {
    std::vector<Span> out;
    int depth = 0;
    std::size_t start = span.first;
    for (std::size_t i = span.first; i < span.second; ++i) {
        depth += bracket_delta(toks[i]);
        if (depth == 0 && toks[i].is(sep)) {
            out.push_back({start, i});
            start = i + 1;
        }
    }
    out.push_back({start, span.second});
    return out;
}

std::size_t find_matching_close(const std::vector<Token> &toks, std::size_t open, std::size_t end) {
    int depth = 0;
    for (std::size_t i = open; i < end; ++i) {
        depth += bracket_delta(toks[i]);
        if (depth == 0) {
            return i;
        }
    }
    return end;
}

std::string span_text(const std::vector<Token> &toks, Span span) {
    std::string out;
    for (std::size_t i = span.first; i < span.second; ++i) {
        if (!out.empty() && (toks[i].ident() || toks[i].kind == Token::Kind::Keyword ||
                             toks[i].kind == Token::Kind::Number)) {
            char last = out.back();
            if (ident_char(last)) {
                out += ' ';
            }
        }
        out += toks[i].text;
    }
    return out;
}

struct ExprScanner {
    const std::vector<Token> &toks;
    std::string scope;
    std::set<VariableRef> &uses;
    std::vector<CallSite> &calls;
    int statement_id;

    // Reads an identifier chain starting at i; returns one-past-the-end.
    std::size_t read_chain(std::size_t i, std::size_t end, std::vector<std::string> &parts) const {
        parts.push_back(toks[i].text);
        std::size_t k = i + 1;
        while (k + 1 < end && toks[k].is(".") && toks[k + 1].ident()) {
            parts.push_back(toks[k + 1].text);
            k += 2;
        }
        return k;
    }

    void add_chain_uses(const std::vector<std::string> &parts) {
        // every prefix of the chain is a use: `c.d` uses both c and c.d
        for (std::size_t n = 1; n <= parts.size(); ++n) {
            VariableRef ref;
            ref.qualifier.assign(parts.begin(), parts.begin() + static_cast<long>(n) - 1);
            ref.name = parts[n - 1];
            ref.scope = scope;
            uses.insert(std::move(ref));
        }
    }

    static bool literal_token(const Token &t, std::string &type_out) {
        if (t.kind == Token::Kind::Number) {
            type_out = (t.text.find('.') != std::string::npos || t.text.find('e') != std::string::npos ||
                        t.text.find('E') != std::string::npos)
                           ? "float"
                           : "int";
            return true;
        }
        if (t.kind == Token::Kind::Str) {
            type_out = "str";
            return true;
        }
        if (t.kw("True") || t.kw("False")) {
            type_out = "bool";
            return true;
        }
        if (t.kw("None")) {
            type_out = "none";
            return true;
        }
        return false;
    }

    // Classify one argument span (uses inside it are recorded either way).
    Arg classify_arg(Span span) {
        Arg arg;
        arg.text = span_text(toks, span);
        std::size_t len = span.second - span.first;
        if (len == 0) {
            arg.kind = Arg::Kind::Variable;
            return arg;
        }
        std::string lit;
        if (len == 1 && literal_token(toks[span.first], lit)) {
            arg.kind = Arg::Kind::Literal;
            arg.literal_type = lit;
            return arg;
        }
        if (toks[span.first].is("[")) {
            arg.kind = Arg::Kind::Literal;
            arg.literal_type = "list";
            scan(span);
            return arg;
        }
        if (toks[span.first].is("{")) {
            arg.kind = Arg::Kind::Literal;
            arg.literal_type = "dict";
            scan(span);
            return arg;
        }
        if (toks[span.first].ident()) {
            std::vector<std::string> parts;
            std::size_t after = read_chain(span.first, span.second, parts);
            if (after == span.second) { // pure chain
                add_chain_uses(parts);
                arg.kind = Arg::Kind::Variable;
                arg.var.qualifier.assign(parts.begin(), parts.end() - 1);
                arg.var.name = parts.back();
                arg.var.scope = scope;
                return arg;
            }
        }
        // arbitrary expression: scan for uses/calls, leave the var unnamed
        arg.kind = Arg::Kind::Variable;
        scan(span);
        return arg;
    }

    void scan_call_args(CallSite &site, Span inside) {
        if (inside.first >= inside.second) {
            return;
        }
        for (Span arg_span : split_top_level(toks, inside, ",")) {
            if (arg_span.first >= arg_span.second) {
                continue; // trailing comma
            }
            // keyword argument: IDENT '=' value (not '==')
            if (arg_span.second - arg_span.first >= 2 && toks[arg_span.first].ident() &&
                toks[arg_span.first + 1].is("=")) {
                std::string key = toks[arg_span.first].text;
                Arg value = classify_arg({arg_span.first + 2, arg_span.second});
                bool dup = std::any_of(site.keyword_args.begin(), site.keyword_args.end(),
                                       [&](const auto &kv) { return kv.first == key; });
                if (!dup) {
                    site.keyword_args.emplace_back(key, std::move(value));
                }
                continue;
            }
            Span s = arg_span;
            if (toks[s.first].is("*") || toks[s.first].is("**")) {
                ++s.first;
            }
            site.positional_args.push_back(classify_arg(s));
        }
    }

    void scan(Span span) {
        std::size_t i = span.first;
        while (i < span.second) {
            const Token &t = toks[i];
            if (t.ident()) {
                std::vector<std::string> parts;
                std::size_t after = read_chain(i, span.second, parts);
                if (after < span.second && toks[after].is("(")) {
                    std::size_t close = find_matching_close(toks, after, span.second);
                    add_chain_uses(parts);
                    CallSite site;
                    site.statement_id = statement_id;
                    site.callee_qualifier.assign(parts.begin(), parts.end() - 1);
                    site.callee_name = parts.back();
                    std::size_t slot = calls.size();
                    calls.emplace_back(); // keep discovery order: callee before its args
                    scan_call_args(site, {after + 1, close});
                    calls[slot] = std::move(site);
                    i = close + 1;
                    // attribute access on a call result has no stable receiver
                    while (i + 1 < span.second && toks[i].is(".") && toks[i + 1].ident()) {
                        i += 2;
                    }
                    continue;
                }
                add_chain_uses(parts);
                i = after;
                continue;
            }
            ++i;
        }
    }
};

// ---------------------------------------------------------------------------
// Statement parsing
// ---------------------------------------------------------------------------

struct PendingFunction {
    FunctionDecl decl;
    std::string owner_class; // empty for free functions
};

struct PendingClass {
    ClassDecl decl;
    std::string scope_key;
};

class Parser {
  public:
    Parser(std::vector<LogicalLine> lines, std::string path)
        : lines_(std::move(lines)), path_(std::move(path)) {
        unit_.path = path_;
    }

    SourceUnit run() {
        blocks_.push_back({-1, -1, "<module>", Owner::Module, 0, 0});
        for (auto &line : lines_) {
            close_blocks(line.indent);
            parse_statement(line);
        }
        close_all();
        collect_receiver_fields();
        return std::move(unit_);
    }

  private:
    enum class Owner { Module, Function, Class, Control };

    struct Block {
        int opener_indent;
        int opener_id;
        std::string scope;
        Owner owner;
        std::size_t pending_fn;    // index into pending_fns_ when owner == Function
        std::size_t pending_class; // index into pending_classes_ when owner == Class
    };

    void close_blocks(int indent) {
        while (blocks_.size() > 1 && indent <= blocks_.back().opener_indent) {
            pop_block();
        }
    }

    void close_all() {
        while (blocks_.size() > 1) {
            pop_block();
        }
    }

    void pop_block() {
        Block b = blocks_.back();
        blocks_.pop_back();
        if (b.owner == Owner::Function) {
            finalize_function(pending_fns_[b.pending_fn]);
        } else if (b.owner == Owner::Class) {
            finalize_class(pending_classes_[b.pending_class]);
        }
    }

    Block &enclosing() { return blocks_.back(); }

    // Innermost enclosing function (or class) pending decl, if any.
    PendingFunction *current_function() {
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
            if (it->owner == Owner::Function) {
                return &pending_fns_[it->pending_fn];
            }
            if (it->owner == Owner::Class) {
                return nullptr;
            }
        }
        return nullptr;
    }

    PendingClass *current_class() {
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
            if (it->owner == Owner::Class) {
                return &pending_classes_[it->pending_class];
            }
            if (it->owner == Owner::Function) {
                return nullptr;
            }
        }
        return nullptr;
    }

    std::string unique_scope_key(std::string base) {
        if (!used_scopes_.insert(base).second) {
            int n = 2;
            while (!used_scopes_.insert(base + "#" + std::to_string(n)).second) {
                ++n;
            }
            return base + "#" + std::to_string(n);
        }
        return base;
    }

    Statement &new_statement(const LogicalLine &line, StatementKind kind) {
        Statement s;
        s.id = static_cast<int>(unit_.statements.size());
        s.line = line.line;
        s.kind = kind;
        s.text = std::string(static_cast<std::size_t>(std::max(0, line.indent)), ' ') + line.text;
        s.scope = enclosing().scope;
        s.parent_id = enclosing().opener_id;
        unit_.statements.push_back(std::move(s));
        if (auto *fn = current_function()) {
            int id = unit_.statements.back().id;
            if (fn->decl.body_first < 0) {
                fn->decl.body_first = id;
            }
            fn->decl.body_last = id;
        }
        return unit_.statements.back();
    }

    ExprScanner scanner_for(Statement &s) {
        return ExprScanner{tokens_, s.scope, s.uses, s.call_sites, s.id};
    }

    void parse_statement(const LogicalLine &line) {
        tokens_ = line.tokens;
        const auto &t = tokens_;
        if (t.empty()) {
            return;
        }
        if (t[0].kw("def")) {
            parse_def(line);
            return;
        }
        if (t[0].kw("class")) {
            parse_class(line);
            return;
        }
        if (t[0].kw("import") || t[0].kw("from")) {
            parse_import(line);
            return;
        }
        if (t[0].kw("return")) {
            parse_return(line);
            return;
        }
        if (t[0].kw("if") || t[0].kw("elif") || t[0].kw("while")) {
            Statement &s = new_statement(line, StatementKind::Control);
            Span cond{1, t.size()};
            if (!t.empty() && t.back().is(":")) {
                cond.second = t.size() - 1;
            }
            scanner_for(s).scan(cond);
            push_control(s, line.indent);
            return;
        }
        if (t[0].kw("else") || (t[0].kw("try")) || t[0].kw("except") || t[0].kw("finally")) {
            Statement &s = new_statement(line, StatementKind::Control);
            if (t.size() > 2) { // e.g. `except ValueError as e:`
                scanner_for(s).scan({1, t.size() - 1});
            }
            push_control(s, line.indent);
            return;
        }
        if (t[0].kw("for")) {
            parse_for(line);
            return;
        }
        if (t[0].kw("with")) {
            Statement &s = new_statement(line, StatementKind::Control);
            Span span{1, t.back().is(":") ? t.size() - 1 : t.size()};
            scanner_for(s).scan(span); // best effort; `as` bindings are not tracked
            push_control(s, line.indent);
            return;
        }
        // assignment forms
        std::size_t eq = find_assignment(t);
        if (eq != t.size()) {
            parse_assign(line, eq);
            return;
        }
        if (bare_annotation(t)) {
            Statement &s = new_statement(line, StatementKind::Assign);
            s.defs.insert(VariableRef{{}, t[0].text, s.scope});
            return;
        }
        if (!t.empty() && t.back().is(":")) {
            // colon-terminated construct outside the subset (match stmt, ...)
            Statement &s = new_statement(line, StatementKind::Control);
            scanner_for(s).scan({0, t.size() - 1});
            push_control(s, line.indent);
            return;
        }
        // pure call line -> Call, anything else -> Expression
        bool pure_call = false;
        if (t[0].ident()) {
            std::vector<std::string> parts;
            ExprScanner probe{tokens_, "", probe_uses_, probe_calls_, -1};
            std::size_t after = probe.read_chain(0, t.size(), parts);
            probe_uses_.clear();
            probe_calls_.clear();
            if (after < t.size() && t[after].is("(") &&
                find_matching_close(t, after, t.size()) == t.size() - 1) {
                pure_call = true;
            }
        }
        Statement &s = new_statement(line, pure_call ? StatementKind::Call : StatementKind::Expression);
        scanner_for(s).scan({0, t.size()});
        return;
    }

    void push_control(Statement &s, int indent) {
        blocks_.push_back({indent, s.id, s.scope, Owner::Control, 0, 0});
    }

    // Index of a top-level assignment operator, or tokens.size().
    static std::size_t find_assignment(const std::vector<Token> &t) {
        static const std::unordered_set<std::string> aug = {
            "+=", "-=", "*=", "/=", "//=", "%=", "**=", "&=", "|=", "^=", ">>=", "<<="};
        int depth = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            depth += bracket_delta(t[i]);
            if (depth != 0 || t[i].kind != Token::Kind::Punct) {
                continue;
            }
            if (t[i].text == "=" || aug.count(t[i].text)) {
                return i;
            }
            if (t[i].text == "==" || t[i].text == "!=" || t[i].text == "<=" || t[i].text == ">=") {
                return t.size(); // comparison, not an assignment statement
            }
        }
        return t.size();
    }

    // `x: T` with no value
    static bool bare_annotation(const std::vector<Token> &t) {
        return t.size() >= 3 && t[0].ident() && t[1].is(":") && !t.back().is(":");
    }

    void parse_assign(const LogicalLine &line, std::size_t eq) {
        const auto &t = tokens_;
        bool augmented = !t[eq].is("=");
        Statement &s = new_statement(line, StatementKind::Assign);
        auto scan = scanner_for(s);

        // chained plain assignment: a = b = expr
        std::vector<Span> target_groups;
        std::size_t rhs_begin = eq + 1;
        target_groups.push_back({0, eq});
        if (!augmented) {
            int depth = 0;
            std::size_t start = rhs_begin;
            for (std::size_t i = rhs_begin; i < t.size(); ++i) {
                depth += bracket_delta(t[i]);
                if (depth == 0 && t[i].is("=")) {
                    target_groups.push_back({start, i});
                    start = i + 1;
                    rhs_begin = i + 1;
                }
            }
        }
        Span rhs{rhs_begin, t.size()};

        std::vector<VariableRef> receivers;
        for (Span group : target_groups) {
            // annotated single target: `x: T` before '='
            std::vector<Span> targets = split_top_level(t, group, ",");
            for (Span target : targets) {
                parse_target(s, target, augmented, receivers);
            }
        }
        scan.scan(rhs);

        // a pure-call RHS binds its return values to the targets
        if (!receivers.empty() && rhs.second > rhs.first && t[rhs.first].ident()) {
            std::vector<std::string> parts;
            std::size_t after = scan.read_chain(rhs.first, rhs.second, parts);
            if (after < rhs.second && t[after].is("(") &&
                find_matching_close(t, after, rhs.second) == rhs.second - 1) {
                for (auto &site : s.call_sites) {
                    if (site.callee_name == parts.back() &&
                        site.callee_qualifier == std::vector<std::string>(parts.begin(), parts.end() - 1)) {
                        site.receivers = receivers;
                        break;
                    }
                }
            }
        }
    }

    void parse_target(Statement &s, Span target, bool augmented, std::vector<VariableRef> &receivers) {
        const auto &t = tokens_;
        // strip grouping parens and unpack stars
        while (target.second - target.first >= 2 && t[target.first].is("(") &&
               find_matching_close(t, target.first, target.second) == target.second - 1) {
            Span inner{target.first + 1, target.second - 1};
            std::vector<Span> inner_targets = split_top_level(t, inner, ",");
            if (inner_targets.size() > 1) {
                for (Span it : inner_targets) {
                    parse_target(s, it, augmented, receivers);
                }
                return;
            }
            target = inner;
        }
        if (target.first < target.second && t[target.first].is("*")) {
            ++target.first;
        }
        if (target.first >= target.second) {
            return;
        }
        auto scan = scanner_for(s);
        if (!t[target.first].ident()) {
            scan.scan(target); // not a bindable target; treat as uses
            return;
        }
        std::vector<std::string> parts;
        std::size_t after = scan.read_chain(target.first, target.second, parts);
        // annotated target `x: T`
        std::size_t effective_end = target.second;
        if (after < target.second && t[after].is(":")) {
            effective_end = after;
        }
        if (after == effective_end) {
            VariableRef def;
            def.qualifier.assign(parts.begin(), parts.end() - 1);
            def.name = parts.back();
            def.scope = s.scope;
            // `a.b = ...` defs a.b and uses the receiver chain prefixes
            for (std::size_t n = 1; n < parts.size(); ++n) {
                VariableRef use;
                use.qualifier.assign(parts.begin(), parts.begin() + static_cast<long>(n) - 1);
                use.name = parts[n - 1];
                use.scope = s.scope;
                s.uses.insert(std::move(use));
            }
            if (augmented) {
                s.uses.insert(def);
            }
            receivers.push_back(def);
            s.defs.insert(std::move(def));
            return;
        }
        // subscript or other complex target: container mutation, uses only
        scan.scan(target);
    }

    void parse_for(const LogicalLine &line) {
        const auto &t = tokens_;
        Statement &s = new_statement(line, StatementKind::Control);
        std::size_t in_pos = t.size();
        int depth = 0;
        for (std::size_t i = 1; i < t.size(); ++i) {
            depth += bracket_delta(t[i]);
            if (depth == 0 && t[i].kw("in")) {
                in_pos = i;
                break;
            }
        }
        auto scan = scanner_for(s);
        if (in_pos < t.size()) {
            std::vector<VariableRef> receivers;
            for (Span target : split_top_level(t, {1, in_pos}, ",")) {
                parse_target(s, target, false, receivers);
            }
            Span iter{in_pos + 1, t.back().is(":") ? t.size() - 1 : t.size()};
            scan.scan(iter);
        } else {
            scan.scan({1, t.size()});
        }
        push_control(s, line.indent);
    }

    void parse_return(const LogicalLine &line) {
        const auto &t = tokens_;
        Statement &s = new_statement(line, StatementKind::Return);
        Span expr{1, t.size()};
        scanner_for(s).scan(expr);
        if (expr.second > expr.first) {
            auto values = split_top_level(t, expr, ",");
            if (values.size() == 1 && t[expr.first].is("(") &&
                find_matching_close(t, expr.first, expr.second) == expr.second - 1) {
                values = split_top_level(t, {expr.first + 1, expr.second - 1}, ",");
                if (values.back().first >= values.back().second) {
                    values.pop_back(); // trailing comma
                }
            }
            s.return_value_count = static_cast<int>(values.size());
        }
        if (auto *fn = current_function()) {
            fn->decl.return_arity = std::max(fn->decl.return_arity, s.return_value_count);
        }
    }

    void parse_import(const LogicalLine &line) {
        const auto &t = tokens_;
        Statement &s = new_statement(line, StatementKind::Import);
        auto dotted_at = [&](std::size_t &i) {
            std::string mod;
            while (i < t.size() && (t[i].ident() || t[i].is("."))) {
                mod += t[i].text;
                ++i;
            }
            return mod;
        };
        if (t[0].kw("import")) {
            // import a.b [as c][, d]
            std::size_t i = 1;
            while (i < t.size()) {
                ImportDecl decl;
                decl.statement_id = s.id;
                decl.module = dotted_at(i);
                if (i < t.size() && t[i].kw("as") && i + 1 < t.size() && t[i + 1].ident()) {
                    decl.alias = t[i + 1].text;
                    i += 2;
                }
                if (decl.module.empty()) {
                    break;
                }
                std::string bound = decl.alias.empty()
                                        ? decl.module.substr(0, decl.module.find('.'))
                                        : decl.alias;
                s.defs.insert(VariableRef{{}, bound, s.scope});
                unit_.imports.push_back(std::move(decl));
                if (i < t.size() && t[i].is(",")) {
                    ++i;
                    continue;
                }
                break;
            }
            return;
        }
        // from mod import a [as b], c   |   from mod import *
        std::size_t i = 1;
        ImportDecl decl;
        decl.statement_id = s.id;
        decl.module = dotted_at(i);
        if (i < t.size() && t[i].kw("import")) {
            ++i;
            while (i < t.size()) {
                if (t[i].is("*")) {
                    ++i;
                    continue; // wildcard: whole module, no symbol list
                }
                if (!t[i].ident()) {
                    ++i;
                    continue;
                }
                std::string sym = t[i].text;
                ++i;
                std::string bound = sym;
                if (i < t.size() && t[i].kw("as") && i + 1 < t.size() && t[i + 1].ident()) {
                    bound = t[i + 1].text;
                    i += 2;
                }
                decl.symbols.push_back(sym);
                s.defs.insert(VariableRef{{}, bound, s.scope});
                if (i < t.size() && t[i].is(",")) {
                    ++i;
                }
            }
        }
        if (!decl.module.empty()) {
            unit_.imports.push_back(std::move(decl));
        }
    }

    void parse_def(const LogicalLine &line) {
        const auto &t = tokens_;
        Statement &s = new_statement(line, StatementKind::FunctionSignature);
        PendingFunction pf;
        pf.decl.signature_id = s.id;
        if (t.size() < 2 || !t[1].ident()) {
            s.kind = StatementKind::Expression; // malformed def: keep as opaque
            scanner_for(s).scan({0, t.size()});
            return;
        }
        pf.decl.name = t[1].text;
        PendingClass *cls = current_class();
        if (cls != nullptr) {
            pf.owner_class = cls->decl.name;
            pf.decl.owner = cls->decl.name;
        }
        std::string base_key = pf.decl.owner.empty() ? pf.decl.name : pf.decl.owner + "." + pf.decl.name;
        pf.decl.scope_key = unique_scope_key(base_key);

        // the def name binds in the enclosing scope
        s.defs.insert(VariableRef{{}, pf.decl.name, s.scope});

        std::size_t open = 2;
        if (open < t.size() && t[open].is("(")) {
            std::size_t close = find_matching_close(t, open, t.size());
            for (Span p : split_top_level(t, {open + 1, close}, ",")) {
                if (p.first >= p.second) {
                    continue;
                }
                while (p.first < p.second && (t[p.first].is("*") || t[p.first].is("**") || t[p.first].is("/"))) {
                    ++p.first;
                }
                if (p.first >= p.second || !t[p.first].ident()) {
                    continue;
                }
                Param param;
                param.name = t[p.first].text;
                std::size_t k = p.first + 1;
                if (k < p.second && t[k].is(":")) {
                    std::size_t ann_end = p.second;
                    int depth = 0;
                    for (std::size_t j = k + 1; j < p.second; ++j) {
                        depth += bracket_delta(t[j]);
                        if (depth == 0 && t[j].is("=")) {
                            ann_end = j;
                            break;
                        }
                    }
                    param.annotation = span_text(t, {k + 1, ann_end});
                    k = ann_end;
                }
                if (k < p.second && t[k].is("=")) {
                    param.default_value = span_text(t, {k + 1, p.second});
                    ExprScanner def_scan{tokens_, s.scope, s.uses, s.call_sites, s.id};
                    def_scan.scan({k + 1, p.second});
                }
                // parameters are defined by the signature, in the new scope
                s.defs.insert(VariableRef{{}, param.name, pf.decl.scope_key});
                pf.decl.params.push_back(std::move(param));
            }
            std::size_t after = close + 1;
            if (after + 1 < t.size() && t[after].is("->")) {
                std::size_t end = t.back().is(":") ? t.size() - 1 : t.size();
                pf.decl.return_annotation = span_text(t, {after + 1, end});
            }
        }
        pending_fns_.push_back(std::move(pf));
        blocks_.push_back({line.indent, s.id, pending_fns_.back().decl.scope_key, Owner::Function,
                           pending_fns_.size() - 1, 0});
    }

    void parse_class(const LogicalLine &line) {
        const auto &t = tokens_;
        Statement &s = new_statement(line, StatementKind::ClassSignature);
        PendingClass pc;
        pc.decl.signature_id = s.id;
        if (t.size() < 2 || !t[1].ident()) {
            s.kind = StatementKind::Expression;
            scanner_for(s).scan({0, t.size()});
            return;
        }
        pc.decl.name = t[1].text;
        s.defs.insert(VariableRef{{}, pc.decl.name, s.scope});
        if (t.size() > 2 && t[2].is("(")) {
            std::size_t close = find_matching_close(t, 2, t.size());
            for (Span b : split_top_level(t, {3, close}, ",")) {
                if (b.first < b.second && t[b.first].ident()) {
                    std::vector<std::string> parts;
                    ExprScanner sc = scanner_for(s);
                    sc.read_chain(b.first, b.second, parts);
                    sc.add_chain_uses(parts);
                    std::string base;
                    for (const auto &part : parts) {
                        if (!base.empty()) {
                            base += '.';
                        }
                        base += part;
                    }
                    pc.decl.bases.push_back(base);
                }
            }
        }
        pc.scope_key = unique_scope_key("<class:" + pc.decl.name + ">");
        std::string scope = pc.scope_key;
        pending_classes_.push_back(std::move(pc));
        blocks_.push_back({line.indent, s.id, scope, Owner::Class, 0, pending_classes_.size() - 1});
    }

    void finalize_function(PendingFunction &pf) {
        if (!pf.owner_class.empty()) {
            // the owning class block is still open below the popped function
            for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
                if (it->owner == Owner::Class) {
                    auto &pc = pending_classes_[it->pending_class];
                    bool is_public = !pf.decl.name.empty() && pf.decl.name[0] != '_';
                    (is_public ? pc.decl.methods : pc.decl.private_methods).push_back(pf.decl);
                    return;
                }
            }
        }
        unit_.functions.push_back(pf.decl);
    }

    void finalize_class(PendingClass &pc) {
        // class-level assignments become fields
        for (const auto &s : unit_.statements) {
            if (s.scope == pc.scope_key && s.kind == StatementKind::Assign) {
                for (const auto &d : s.defs) {
                    if (!d.qualified()) {
                        pc.decl.fields.insert(d.name);
                    }
                }
            }
        }
        unit_.classes.push_back(pc.decl);
        // erase so a later same-named class does not merge into this one
        pc.decl = ClassDecl{};
    }

    // Attributes assigned on the receiver (first parameter) inside any method.
    void collect_receiver_fields() {
        for (auto &cls : unit_.classes) {
            auto scan_method = [&](const FunctionDecl &m) {
                if (m.params.empty()) {
                    return;
                }
                const std::string &receiver = m.params.front().name;
                for (int id = m.body_first; id >= 0 && id <= m.body_last; ++id) {
                    const Statement &s = unit_.statements[static_cast<std::size_t>(id)];
                    if (s.scope != m.scope_key) {
                        continue;
                    }
                    for (const auto &d : s.defs) {
                        if (d.qualifier.size() == 1 && d.qualifier[0] == receiver) {
                            cls.fields.insert(d.name);
                        }
                    }
                }
            };
            for (const auto &m : cls.methods) {
                scan_method(m);
            }
            for (const auto &m : cls.private_methods) {
                scan_method(m);
            }
        }
    }

    std::vector<LogicalLine> lines_;
    std::string path_;
    SourceUnit unit_;
    std::vector<Token> tokens_;
    std::vector<Block> blocks_;
    std::vector<PendingFunction> pending_fns_;
    std::vector<PendingClass> pending_classes_;
    std::unordered_set<std::string> used_scopes_;
    std::set<VariableRef> probe_uses_;
    std::vector<CallSite> probe_calls_;
};

} // namespace

SourceUnit parse_source(const std::string &bytes, const std::string &path) {
    if (!valid_utf8(bytes)) {
        throw EncodingError(path + ": input is not valid UTF-8");
    }
    Lexer lexer(bytes, path);
    Parser parser(lexer.run(), path);
    return parser.run();
}

std::vector<DefUseRow> extract_def_use(const SourceUnit &unit) {
    std::vector<DefUseRow> rows;
    rows.reserve(unit.statements.size());
    for (const auto &s : unit.statements) {
        rows.push_back({s.id, s.defs, s.uses});
    }
    return rows;
}

std::vector<ClassDecl> extract_class_defs(const SourceUnit &unit) {
    return unit.classes;
}

} // namespace slicetype
