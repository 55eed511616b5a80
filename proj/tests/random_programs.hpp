#pragma once

// Call-free random programs with a ground-truth model, plus a brute-force
// slicing oracle that never touches the library's graph or slicing code:
// reaching definitions come from DFS path enumeration over the generator's
// own control-flow successors, and the slice is the undirected closure of
// those def-use pairs around the anchor.

#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace slicetype::test {

struct GenStmt {
    int line = 0;   // 1-based
    int indent = 0; // spaces
    std::string text;
    std::set<std::string> defs;
    std::set<std::string> uses;
    bool is_if = false;
    bool is_while = false;
};

struct GenProgram {
    std::vector<GenStmt> stmts;

    std::string source() const {
        std::string out;
        for (const auto &s : stmts) {
            out += std::string(static_cast<std::size_t>(s.indent), ' ') + s.text + "\n";
        }
        return out;
    }
};

inline GenProgram generate_program(std::mt19937 &rng, int max_statements = 30) {
    GenProgram prog;
    const std::vector<std::string> vars = {"a", "b", "c", "d", "e", "g", "h", "k"};
    auto pick_var = [&]() { return vars[rng() % vars.size()]; };
    int budget = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_statements - 1));

    struct Block {
        int indent;
        int remaining; // statements still owed to this block
    };
    std::vector<Block> blocks{{0, budget}};
    int line = 0;
    while (static_cast<int>(prog.stmts.size()) < budget) {
        // close blocks that have produced their quota (never the root)
        while (blocks.size() > 1 && blocks.back().remaining <= 0) {
            blocks.pop_back();
        }
        GenStmt s;
        s.line = ++line;
        s.indent = (static_cast<int>(blocks.size()) - 1) * 4;
        unsigned roll = rng() % 10;
        bool room_for_block = static_cast<int>(prog.stmts.size()) + 2 <= budget && blocks.size() < 4;
        if (roll < 2 && room_for_block) {
            std::string c = pick_var();
            bool is_while = (rng() % 2) == 0;
            s.text = (is_while ? "while " : "if ") + c + ":";
            s.uses = {c};
            s.is_if = !is_while;
            s.is_while = is_while;
            prog.stmts.push_back(s);
            for (auto &b : blocks) {
                --b.remaining;
            }
            int body = 1 + static_cast<int>(rng() % 3);
            blocks.push_back({s.indent + 4, body});
            continue;
        }
        std::string target = pick_var();
        if (roll < 7) {
            std::string u1 = pick_var();
            if (rng() % 2 == 0) {
                std::string u2 = pick_var();
                s.text = target + " = " + u1 + " + " + u2;
                s.uses = {u1, u2};
            } else {
                s.text = target + " = " + u1;
                s.uses = {u1};
            }
            s.defs = {target};
        } else if (roll < 8) {
            std::string u = pick_var();
            s.text = target + " += " + u;
            s.defs = {target};
            s.uses = {target, u};
        } else {
            s.text = target + " = " + std::to_string(rng() % 100);
            s.defs = {target};
        }
        prog.stmts.push_back(s);
        for (auto &b : blocks) {
            --b.remaining;
        }
    }
    return prog;
}

/// Ground-truth CFG successors (by statement index) from the indentation
/// structure: headers branch into their body and past it; loop-body tails
/// return to the header.
inline std::vector<std::vector<int>> oracle_cfg(const GenProgram &prog) {
    const auto &st = prog.stmts;
    int n = static_cast<int>(st.size());
    std::vector<int> parent(static_cast<std::size_t>(n), -1);
    std::vector<int> opener_stack;
    for (int i = 0; i < n; ++i) {
        while (!opener_stack.empty() && st[static_cast<std::size_t>(i)].indent <=
                                            st[static_cast<std::size_t>(opener_stack.back())].indent) {
            opener_stack.pop_back();
        }
        parent[static_cast<std::size_t>(i)] = opener_stack.empty() ? -1 : opener_stack.back();
        if (st[static_cast<std::size_t>(i)].is_if || st[static_cast<std::size_t>(i)].is_while) {
            opener_stack.push_back(i);
        }
    }
    auto next_sibling = [&](int i) {
        for (int j = i + 1; j < n; ++j) {
            if (parent[static_cast<std::size_t>(j)] == parent[static_cast<std::size_t>(i)]) {
                return j;
            }
            if (st[static_cast<std::size_t>(j)].indent <= st[static_cast<std::size_t>(i)].indent) {
                break;
            }
        }
        return -1;
    };
    // fall-through target when statement i finishes
    std::function<int(int)> after = [&](int i) -> int {
        int sib = next_sibling(i);
        if (sib >= 0) {
            return sib;
        }
        int p = parent[static_cast<std::size_t>(i)];
        if (p < 0) {
            return -1;
        }
        if (st[static_cast<std::size_t>(p)].is_while) {
            return p; // loop back edge
        }
        return after(p);
    };
    std::vector<std::vector<int>> succ(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const GenStmt &s = st[static_cast<std::size_t>(i)];
        if (s.is_if || s.is_while) {
            if (i + 1 < n && parent[static_cast<std::size_t>(i + 1)] == i) {
                succ[static_cast<std::size_t>(i)].push_back(i + 1); // branch taken
            }
            int skip = after(i);
            if (skip >= 0) {
                succ[static_cast<std::size_t>(i)].push_back(skip); // branch not taken / loop exit
            }
        } else {
            int nxt = after(i);
            if (nxt >= 0) {
                succ[static_cast<std::size_t>(i)].push_back(nxt);
            }
        }
    }
    return succ;
}

/// Def d reaches use u iff some CFG path from d to u has no intermediate
/// redefinition of the variable (checked by DFS, kills excluded).
inline bool oracle_def_reaches(const GenProgram &prog, const std::vector<std::vector<int>> &succ,
                               int def_stmt, int use_stmt, const std::string &var) {
    std::vector<int> stack(succ[static_cast<std::size_t>(def_stmt)].begin(),
                           succ[static_cast<std::size_t>(def_stmt)].end());
    std::set<int> visited;
    while (!stack.empty()) {
        int cur = stack.back();
        stack.pop_back();
        if (cur == use_stmt) {
            return true;
        }
        if (!visited.insert(cur).second) {
            continue;
        }
        if (prog.stmts[static_cast<std::size_t>(cur)].defs.count(var)) {
            continue; // killed along this path
        }
        for (int nxt : succ[static_cast<std::size_t>(cur)]) {
            stack.push_back(nxt);
        }
    }
    return false;
}

/// Brute-force def-use edges and the undirected transitive closure from the
/// anchor statement index.
inline std::set<int> oracle_slice(const GenProgram &prog, int anchor) {
    auto succ = oracle_cfg(prog);
    int n = static_cast<int>(prog.stmts.size());
    std::vector<std::vector<int>> both(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) {
        for (const auto &var : prog.stmts[static_cast<std::size_t>(d)].defs) {
            for (int u = 0; u < n; ++u) {
                if (!prog.stmts[static_cast<std::size_t>(u)].uses.count(var)) {
                    continue;
                }
                if (oracle_def_reaches(prog, succ, d, u, var)) {
                    both[static_cast<std::size_t>(d)].push_back(u);
                    both[static_cast<std::size_t>(u)].push_back(d);
                }
            }
        }
    }
    std::set<int> slice{anchor};
    std::vector<int> stack{anchor};
    while (!stack.empty()) {
        int cur = stack.back();
        stack.pop_back();
        for (int nxt : both[static_cast<std::size_t>(cur)]) {
            if (slice.insert(nxt).second) {
                stack.push_back(nxt);
            }
        }
    }
    return slice;
}

} // namespace slicetype::test
