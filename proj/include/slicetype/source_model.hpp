#pragma once

#include "slicetype/diagnostics.hpp"

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace slicetype {

/// A variable occurrence: a bare name or an attribute chain rooted at a
/// receiver (`model.vocabulary` has qualifier {model}, name vocabulary).
/// `scope` is the key of the enclosing function ("<module>" at top level,
/// "Class.method" for methods).
struct VariableRef {
    std::vector<std::string> qualifier; // receiver chain, may be empty
    std::string name;
    std::string scope;

    /// Full dotted spelling, e.g. "model.vocabulary".
    std::string dotted() const;
    bool qualified() const { return !qualifier.empty(); }
    /// Root of the receiver chain (name itself when unqualified).
    const std::string &base() const { return qualifier.empty() ? name : qualifier.front(); }

    auto operator<=>(const VariableRef &) const = default;
};

/// One actual argument at a call site: a variable reference or a literal.
struct Arg {
    enum class Kind { Variable, Literal };
    Kind kind = Kind::Variable;
    VariableRef var;          // valid when kind == Variable
    std::string literal_type; // int/float/str/bool/list/dict/none when kind == Literal
    std::string text;

    auto operator<=>(const Arg &) const = default;
};

struct CallSite {
    int statement_id = -1;
    std::vector<std::string> callee_qualifier; // receiver chain of the callee
    std::string callee_name;
    std::vector<Arg> positional_args;
    std::vector<std::pair<std::string, Arg>> keyword_args; // unique keys, call order
    std::vector<VariableRef> receivers; // variables receiving return values
};

enum class StatementKind {
    Assign,
    Call,
    Return,
    FunctionSignature,
    ClassSignature,
    Import,
    Expression,
    Control,
};

const char *to_string(StatementKind kind);

/// One logical source line. Compound headers (if/for/while) are Control
/// statements; their bodies are the statements whose parent_id points here.
struct Statement {
    int id = -1;
    int line = 0; // 1-based
    StatementKind kind = StatementKind::Expression;
    std::string text;   // normalized logical line, original indentation kept
    std::string scope;  // enclosing function key
    int parent_id = -1; // enclosing control/def/class header, -1 at scope top
    std::set<VariableRef> defs;
    std::set<VariableRef> uses;
    std::vector<CallSite> call_sites;
    int return_value_count = 0; // top-level values on a Return statement
};

struct Param {
    std::string name;
    std::optional<std::string> annotation;
    std::optional<std::string> default_value;
};

struct FunctionDecl {
    std::string name;
    std::vector<Param> params;
    int signature_id = -1;    // statement id of the `def` line
    int body_first = -1;      // statement id range, -1/-1 when body empty
    int body_last = -1;
    int return_arity = 0;     // max return-value count over the body
    std::optional<std::string> return_annotation;
    std::string owner;        // owning class name, empty for free functions
    std::string scope_key;    // key of the scope this function introduces
};

struct ClassDecl {
    std::string name;
    int signature_id = -1;
    std::set<std::string> fields;      // attributes assigned on the receiver
    std::vector<FunctionDecl> methods; // public API: no leading underscore
    std::vector<FunctionDecl> private_methods; // underscore-prefixed, incl. __init__
    std::vector<std::string> bases;

    const FunctionDecl *constructor() const; // __init__ when declared
};

struct ImportDecl {
    int statement_id = -1;
    std::string module;  // as written, may start with dots for relative form
    std::vector<std::string> symbols; // empty for `import module`
    std::string alias;
};

enum class ImportKind { Project, External };

/// A resolved import: either an edge to another project file or a reference
/// to an external package.
struct ImportEdge {
    ImportKind kind = ImportKind::External;
    std::string from_path;
    std::string to_path;   // project file path when kind == Project
    std::string package;   // top-level package name when kind == External
    std::vector<std::string> symbols; // imported names, empty = whole module
};

/// Statement-level model of one source file.
struct SourceUnit {
    std::string path;
    std::vector<Statement> statements; // ordered by id == index
    std::vector<FunctionDecl> functions; // free functions only
    std::vector<ClassDecl> classes;
    std::vector<ImportDecl> imports;

    const Statement *statement(int id) const;
    const Statement *statement_at_line(int line) const;
    /// Free functions plus methods of every class.
    std::vector<const FunctionDecl *> all_functions() const;
    const FunctionDecl *function_for_scope(const std::string &scope_key) const;
    /// Re-render the unit as source text (one statement per line).
    std::string render() const;
};

class Project; // project.hpp

/// Parse UTF-8 source into the statement-level model. Constructs outside the
/// supported subset become opaque Expression statements with best-effort
/// uses; they are never dropped.
SourceUnit parse_source(const std::string &bytes, const std::string &path);

/// Flat def/use table, one row per statement.
struct DefUseRow {
    int statement_id;
    std::set<VariableRef> defs;
    std::set<VariableRef> uses;
};
std::vector<DefUseRow> extract_def_use(const SourceUnit &unit);

std::vector<ClassDecl> extract_class_defs(const SourceUnit &unit);

/// Resolve the unit's import statements against the project index.
/// Unresolvable modules are classified External, never an error.
std::vector<ImportEdge> resolve_imports(const SourceUnit &unit, const Project &project);

} // namespace slicetype
