#include "doctest.h"

#include "helpers.hpp"
#include "slicetype/dependence_graph.hpp"

#include <algorithm>

using namespace slicetype;

namespace {

bool has_edge(const DependenceGraph &g, NodeId src, NodeId dst, EdgeKind kind) {
    return std::any_of(g.edges.begin(), g.edges.end(), [&](const GraphEdge &e) {
        return e.src == src && e.dst == dst && e.kind == kind;
    });
}

int count_edges(const DependenceGraph &g, NodeId src, NodeId dst, EdgeKind kind) {
    return static_cast<int>(std::count_if(g.edges.begin(), g.edges.end(), [&](const GraphEdge &e) {
        return e.src == src && e.dst == dst && e.kind == kind;
    }));
}

NodeId node_at_line(const Project &project, int unit, int line) {
    const Statement *s = project.unit(unit).statement_at_line(line);
    REQUIRE(s != nullptr);
    return NodeId{unit, s->id};
}

DependenceGraph sdg_of(const Project &project) {
    Diagnostics diags;
    return build_sdg(build_all_pdgs(project), project, diags);
}

} // namespace

TEST_SUITE("dependence_graphs") {

TEST_CASE("straight-line chain produces the def-use edges") {
    Project p = test::project_from({{"m.py", "def f():\n    x = 1\n    y = x\n    return y\n"}});
    const SourceUnit &unit = p.unit(0);
    DependenceGraph pdg = build_pdg(*unit.all_functions()[0], unit, 0);
    CHECK(pdg.nodes.size() == 4); // signature plus three body statements
    CHECK(has_edge(pdg, node_at_line(p, 0, 2), node_at_line(p, 0, 3), EdgeKind::Data));
    CHECK(has_edge(pdg, node_at_line(p, 0, 3), node_at_line(p, 0, 4), EdgeKind::Data));
    CHECK_FALSE(has_edge(pdg, node_at_line(p, 0, 2), node_at_line(p, 0, 4), EdgeKind::Data));
}

TEST_CASE("fixture def at line 10 reaches the use at line 11") {
    Project p = test::load_fig1();
    DependenceGraph sdg = sdg_of(p);
    CHECK(has_edge(sdg, node_at_line(p, 0, 10), node_at_line(p, 0, 11), EdgeKind::Data));
}

TEST_CASE("both branch definitions reach a use after the branch") {
    // oracle: brute-force path enumeration on this CFG finds a path from
    // each def avoiding the other (line 1 -> 4 skipping the branch body,
    // line 3 -> 4 through it)
    Project p = test::project_from({{"m.py", "x = 1\nif c:\n    x = 2\ny = x\n"}});
    DependenceGraph pdg = build_module_pdg(p.unit(0), 0);
    CHECK(has_edge(pdg, node_at_line(p, 0, 1), node_at_line(p, 0, 4), EdgeKind::Data));
    CHECK(has_edge(pdg, node_at_line(p, 0, 3), node_at_line(p, 0, 4), EdgeKind::Data));
}

TEST_CASE("a later redefinition kills the earlier one") {
    Project p = test::project_from({{"m.py", "x = 1\nx = 2\ny = x\n"}});
    DependenceGraph pdg = build_module_pdg(p.unit(0), 0);
    CHECK_FALSE(has_edge(pdg, node_at_line(p, 0, 1), node_at_line(p, 0, 3), EdgeKind::Data));
    CHECK(has_edge(pdg, node_at_line(p, 0, 2), node_at_line(p, 0, 3), EdgeKind::Data));
}

TEST_CASE("loop bodies feed definitions back to the header") {
    Project p = test::project_from({{"m.py", "x = 1\nwhile x:\n    x = x + 1\ny = x\n"}});
    DependenceGraph pdg = build_module_pdg(p.unit(0), 0);
    CHECK(has_edge(pdg, node_at_line(p, 0, 3), node_at_line(p, 0, 2), EdgeKind::Data));
    CHECK(has_edge(pdg, node_at_line(p, 0, 3), node_at_line(p, 0, 4), EdgeKind::Data));
    CHECK(has_edge(pdg, node_at_line(p, 0, 1), node_at_line(p, 0, 2), EdgeKind::Data));
}

TEST_CASE("control statements guard their bodies") {
    Project p = test::project_from({{"m.py", "if c:\n    x = 1\n    if d:\n        y = 2\n"}});
    DependenceGraph pdg = build_module_pdg(p.unit(0), 0);
    CHECK(has_edge(pdg, node_at_line(p, 0, 1), node_at_line(p, 0, 2), EdgeKind::Control));
    CHECK(has_edge(pdg, node_at_line(p, 0, 1), node_at_line(p, 0, 3), EdgeKind::Control));
    CHECK(has_edge(pdg, node_at_line(p, 0, 1), node_at_line(p, 0, 4), EdgeKind::Control));
    CHECK(has_edge(pdg, node_at_line(p, 0, 3), node_at_line(p, 0, 4), EdgeKind::Control));
}

TEST_CASE("call resolution by name") {
    Project p = test::load_fig1();
    const Statement *call = p.unit(0).statement_at_line(11);
    REQUIRE(call != nullptr);
    CalleeCandidateSet resolved = resolve_call(call->call_sites[0], 0, p);
    CHECK(resolved.resolution == Resolution::Unique);
    REQUIRE(resolved.candidates.size() == 1);
    CHECK(resolved.candidates[0].fn->name == "MakeBatchBuilder");
    CHECK(resolved.candidates[0].line == 1);
}

TEST_CASE("keyword arguments disambiguate same-name functions") {
    // by hand: only the second overload has a parameter named vocab
    Project p = test::project_from({
        {"a.py", "def build(size):\n    return size\n"},
        {"b.py", "def build(vocab):\n    return vocab\n"},
        {"main.py", "from a import build\nfrom b import build\nx = build(vocab=3)\n"},
    });
    int main_idx = p.unit_index("main.py");
    const Statement *call = p.unit(main_idx).statement_at_line(3);
    REQUIRE(call != nullptr);
    CalleeCandidateSet resolved = resolve_call(call->call_sites[0], main_idx, p);
    CHECK(resolved.resolution == Resolution::Unique);
    REQUIRE(resolved.candidates.size() == 1);
    CHECK(p.unit(resolved.candidates[0].unit_index).path == "b.py");
}

TEST_CASE("return-value matching filters on receiver count") {
    // by hand: only the overload returning two values satisfies `a, b = g()`
    Project p = test::project_from({
        {"one.py", "def g():\n    return 1\n"},
        {"two.py", "def g():\n    return 1, 2\n"},
        {"main.py", "from one import g\nfrom two import g\na, b = g()\n"},
    });
    int main_idx = p.unit_index("main.py");
    const Statement *call = p.unit(main_idx).statement_at_line(3);
    CalleeCandidateSet resolved = resolve_call(call->call_sites[0], main_idx, p);
    REQUIRE(resolved.candidates.size() == 1);
    CHECK(p.unit(resolved.candidates[0].unit_index).path == "two.py");
}

TEST_CASE("literal arguments must satisfy annotated parameters") {
    Project p = test::project_from({
        {"a.py", "def h(n: int):\n    return n\n"},
        {"b.py", "def h(s: str):\n    return s\n"},
        {"main.py", "from a import h\nfrom b import h\nx = h(\"text\")\n"},
    });
    int main_idx = p.unit_index("main.py");
    const Statement *call = p.unit(main_idx).statement_at_line(3);
    CalleeCandidateSet resolved = resolve_call(call->call_sites[0], main_idx, p);
    REQUIRE(resolved.candidates.size() == 1);
    CHECK(p.unit(resolved.candidates[0].unit_index).path == "b.py");
}

TEST_CASE("unresolvable names raise not-found") {
    Project p = test::load_fig1();
    const Statement *ret = p.unit(0).statement_at_line(4);
    REQUIRE(ret != nullptr);
    REQUIRE(!ret->call_sites.empty());
    CHECK_THROWS_AS(resolve_call(ret->call_sites[0], 0, p), NotFoundError);
}

TEST_CASE("system graph adds call edges for the fixture") {
    Project p = test::load_fig1();
    DependenceGraph sdg = sdg_of(p);
    // argument flows into the callee signature
    CHECK(has_edge(sdg, node_at_line(p, 0, 11), node_at_line(p, 0, 1), EdgeKind::CallArg));
    // constructed value flows from the class declaration to the receiver
    CHECK(has_edge(sdg, node_at_line(p, 0, 5), node_at_line(p, 0, 10), EdgeKind::CallReturn));
    // callee return feeds the receiver statement
    CHECK(has_edge(sdg, node_at_line(p, 0, 4), node_at_line(p, 0, 11), EdgeKind::CallReturn));
}

TEST_CASE("a project without calls merges into a disjoint union") {
    Project p = test::project_from({
        {"a.py", "x = 1\ny = x\n"},
        {"b.py", "u = 2\nv = u\n"},
    });
    auto pdgs = build_all_pdgs(p);
    Diagnostics diags;
    DependenceGraph sdg = build_sdg(pdgs, p, diags);
    std::size_t node_sum = 0, edge_sum = 0;
    for (const auto &g : pdgs) {
        node_sum += g.nodes.size();
        edge_sum += g.edges.size();
    }
    CHECK(sdg.nodes.size() == node_sum);
    CHECK(sdg.edges.size() == edge_sum);
    for (const auto &e : sdg.edges) {
        CHECK(e.kind != EdgeKind::CallArg);
        CHECK(e.kind != EdgeKind::CallReturn);
    }
}

TEST_CASE("ambiguous call sites contribute edges for every candidate") {
    Project p = test::project_from({
        {"a.py", "def act(x):\n    return x\n"},
        {"b.py", "def act(x):\n    return x\n"},
        {"main.py", "from a import act\nfrom b import act\nr = act(v)\n"},
    });
    int main_idx = p.unit_index("main.py");
    DependenceGraph sdg = sdg_of(p);
    NodeId call = node_at_line(p, main_idx, 3);
    CHECK(has_edge(sdg, call, node_at_line(p, p.unit_index("a.py"), 1), EdgeKind::CallArg));
    CHECK(has_edge(sdg, call, node_at_line(p, p.unit_index("b.py"), 1), EdgeKind::CallArg));
    CHECK(has_edge(sdg, node_at_line(p, p.unit_index("a.py"), 2), call, EdgeKind::CallReturn));
    CHECK(has_edge(sdg, node_at_line(p, p.unit_index("b.py"), 2), call, EdgeKind::CallReturn));
}

TEST_CASE("one call-arg edge per actual argument") {
    Project p = test::project_from({
        {"lib.py", "def mix(a, b, c):\n    return a\n"},
        {"main.py", "from lib import mix\nr = mix(x, y, z)\n"},
    });
    DependenceGraph sdg = sdg_of(p);
    NodeId call = node_at_line(p, p.unit_index("main.py"), 2);
    NodeId sig = node_at_line(p, p.unit_index("lib.py"), 1);
    CHECK(count_edges(sdg, call, sig, EdgeKind::CallArg) == 3);
}

TEST_CASE("no edge dangles and nodes cover every pdg") {
    Project p = test::load_fig1();
    auto pdgs = build_all_pdgs(p);
    Diagnostics diags;
    DependenceGraph sdg = build_sdg(pdgs, p, diags);
    for (const auto &e : sdg.edges) {
        CHECK(sdg.has_node(e.src));
        CHECK(sdg.has_node(e.dst));
    }
    for (const auto &pdg : pdgs) {
        for (const auto &n : pdg.nodes) {
            CHECK(sdg.has_node(n));
        }
        for (const auto &e : pdg.edges) {
            CHECK(std::find(sdg.edges.begin(), sdg.edges.end(), e) != sdg.edges.end());
        }
    }
}

TEST_CASE("identical input serializes byte-identically") {
    Project p1 = test::load_fig1();
    Project p2 = test::load_fig1();
    std::string a = serialize_graph(sdg_of(p1), p1);
    std::string b = serialize_graph(sdg_of(p2), p2);
    CHECK(a == b);
    CHECK(!a.empty());
}

} // TEST_SUITE
