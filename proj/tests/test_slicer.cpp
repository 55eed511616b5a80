#include "doctest.h"

#include "helpers.hpp"
#include "random_programs.hpp"
#include "slicetype/slicer.hpp"

#include <algorithm>

using namespace slicetype;

namespace {

DependenceGraph sdg_of(const Project &project) {
    Diagnostics diags;
    return build_sdg(build_all_pdgs(project), project, diags);
}

std::set<int> slice_lines(const Slice &slice, const std::string &path) {
    std::set<int> out;
    for (const auto &s : slice.statements) {
        if (s.path == path) {
            out.insert(s.line);
        }
    }
    return out;
}

std::set<int> union_lines(const std::vector<Slice> &slices, const std::string &path) {
    std::set<int> out;
    for (const auto &s : slices) {
        auto lines = slice_lines(s, path);
        out.insert(lines.begin(), lines.end());
    }
    return out;
}

bool superset(const std::set<int> &big, const std::set<int> &small) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

} // namespace

TEST_SUITE("slicer") {

TEST_CASE("target expansion for the fixture parameter") {
    Project p = test::load_fig1();
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "main.py", 1, "model");
    auto targets = expand_target_variables(ref, anchor, sdg, p);
    REQUIRE(targets.size() == 2);
    CHECK(targets[0].origin == TargetOrigin::Parameter);
    CHECK(p.unit(targets[0].anchor.unit).statement(targets[0].anchor.statement)->line == 1);
    CHECK(targets[0].ref.name == "model");
    // the call-site target binds the actual argument
    CHECK(targets[1].origin == TargetOrigin::Parameter);
    CHECK(p.unit(targets[1].anchor.unit).statement(targets[1].anchor.statement)->line == 11);
    CHECK(targets[1].ref.name == "obj");
}

TEST_CASE("plain locals expand to a single target") {
    Project p = test::project_from({{"m.py", "x = 1\ny = x\n"}});
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "m.py", 2, "y");
    auto targets = expand_target_variables(ref, anchor, sdg, p);
    REQUIRE(targets.size() == 1);
    CHECK(targets[0].origin == TargetOrigin::Plain);
    CHECK(targets[0].anchor == anchor);
}

TEST_CASE("call receivers expand to every return statement of the callee") {
    Project p = test::project_from({
        {"lib.py", "def f(c):\n"
                   "    if c:\n"
                   "        return 1\n"
                   "    if c:\n"
                   "        return 2\n"
                   "    return 3\n"},
        {"main.py", "from lib import f\nx = f(v)\n"},
    });
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "main.py", 2, "x");
    auto targets = expand_target_variables(ref, anchor, sdg, p);
    // the plain target plus one per return statement (3 on this fixture)
    REQUIRE(targets.size() == 4);
    CHECK(targets[0].origin == TargetOrigin::Plain);
    std::set<int> return_lines;
    for (std::size_t i = 1; i < targets.size(); ++i) {
        CHECK(targets[i].origin == TargetOrigin::ReturnReceiver);
        return_lines.insert(
            p.unit(targets[i].anchor.unit).statement(targets[i].anchor.statement)->line);
    }
    CHECK(return_lines == std::set<int>{3, 5, 6});
}

TEST_CASE("field targets anchor at use statements of the field") {
    Project p = test::project_from({{"m.py", "class C:\n"
                                             "    def __init__(self):\n"
                                             "        self.size = 0\n"
                                             "    def grow(self):\n"
                                             "        n = self.size + 1\n"
                                             "        self.size = n\n"}});
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "m.py", 3, "self.size");
    auto targets = expand_target_variables(ref, anchor, sdg, p);
    REQUIRE(!targets.empty());
    for (const auto &tv : targets) {
        CHECK(tv.origin == TargetOrigin::Field);
    }
    // line 5 reads the field
    bool has_use_anchor = std::any_of(targets.begin(), targets.end(), [&](const TargetVariable &tv) {
        return p.unit(tv.anchor.unit).statement(tv.anchor.statement)->line == 5;
    });
    CHECK(has_use_anchor);
}

TEST_CASE("fixture slice reaches the def, the call, and the class signature") {
    Project p = test::load_fig1();
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "main.py", 11, "obj");
    TargetVariable tv{ref, anchor, TargetOrigin::Plain};
    Slice slice = slice_one(sdg, tv, p);
    std::set<int> lines = slice_lines(slice, "main.py");
    CHECK(superset(lines, {5, 10, 11}));
}

TEST_CASE("an anchor without incident edges slices to itself") {
    Project p = test::project_from({{"m.py", "x = 1\nunrelated = 2\n"}});
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "m.py", 1, "x");
    Slice slice = slice_one(sdg, TargetVariable{ref, anchor, TargetOrigin::Plain}, p);
    REQUIRE(slice.statements.size() == 1);
    CHECK(slice.statements[0].line == 1);
}

TEST_CASE("three-statement chain slices completely") {
    // oracle: brute-force def-use transitive closure over the chain
    Project p = test::project_from({{"m.py", "x = 1\ny = x\nz = y\n"}});
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "m.py", 3, "z");
    Slice slice = slice_one(sdg, TargetVariable{ref, anchor, TargetOrigin::Plain}, p);
    CHECK(slice_lines(slice, "m.py") == std::set<int>{1, 2, 3});
}

TEST_CASE("slice_all over the fixture covers the prescribed lines") {
    Project p = test::load_fig1();
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "main.py", 1, "model");
    auto slices = slice_all(sdg, ref, anchor, p);
    REQUIRE(!slices.empty());
    CHECK(superset(union_lines(slices, "main.py"), {1, 3, 5, 9, 10, 11}));
    // both expansion targets close over the same statements
    CHECK(slices.size() == 1);
}

TEST_CASE("a parameter of an empty function slices to its signature") {
    Project p = test::project_from({{"m.py", "def f(v):\n    pass\n"}});
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "m.py", 1, "v");
    auto slices = slice_all(sdg, ref, anchor, p);
    REQUIRE(slices.size() == 1);
    CHECK(slice_lines(slices[0], "m.py") == std::set<int>{1});
}

TEST_CASE("every slice contains its anchor") {
    Project p = test::load_fig1();
    DependenceGraph sdg = sdg_of(p);
    for (const char *name : {"model", "obj", "batch", "vocab", "steps"}) {
        int line = std::string(name) == "model"   ? 1
                   : std::string(name) == "obj"   ? 10
                   : std::string(name) == "batch" ? 11
                   : std::string(name) == "vocab" ? 2
                                                  : 3;
        auto [ref, anchor] = locate_variable(p, "main.py", line, name);
        auto targets = expand_target_variables(ref, anchor, sdg, p);
        for (const auto &tv : targets) {
            Slice slice = slice_one(sdg, tv, p);
            int anchor_line = p.unit(tv.anchor.unit).statement(tv.anchor.statement)->line;
            CHECK(slice_lines(slice, "main.py").count(anchor_line) == 1);
        }
    }
}

TEST_CASE("intra-only slicing stays within the function") {
    Project p = test::load_fig1();
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "main.py", 1, "model");
    SliceOptions intra;
    intra.intra_only = true;
    auto intra_slices = slice_all(sdg, ref, anchor, p, intra);
    auto full_slices = slice_all(sdg, ref, anchor, p);
    std::set<int> intra_lines = union_lines(intra_slices, "main.py");
    std::set<int> full_lines = union_lines(full_slices, "main.py");
    CHECK(superset(full_lines, intra_lines));
    CHECK(intra_lines.count(9) == 0);
    CHECK(intra_lines.count(10) == 0);
    CHECK(intra_lines.count(11) == 0);
}

TEST_CASE("the slice size cap truncates farthest statements first") {
    // a chain v0 <- v1 <- ... keeps the statements nearest the anchor
    std::string src;
    src += "v0 = 1\n";
    for (int i = 1; i < 40; ++i) {
        src += "v" + std::to_string(i) + " = v" + std::to_string(i - 1) + "\n";
    }
    Project p = test::project_from({{"m.py", src}});
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "m.py", 40, "v39");
    SliceOptions capped;
    capped.max_statements = 10;
    Slice slice = slice_one(sdg, TargetVariable{ref, anchor, TargetOrigin::Plain}, p, capped);
    CHECK(slice.statements.size() == 10);
    std::set<int> lines = slice_lines(slice, "m.py");
    CHECK(lines.count(40) == 1); // anchor survives
    CHECK(*lines.begin() == 31); // nearest 10 lines of the chain
}

TEST_CASE("rendering groups by file and masks the annotation position") {
    Project p = test::load_fig1();
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "main.py", 1, "model");
    auto slices = slice_all(sdg, ref, anchor, p);
    SUBCASE("mask at the parameter") {
        MaskTarget mask{"main.py", 1, "model", MaskSlot::Parameter};
        std::string text = render_slices(slices, mask);
        CHECK(text.find("def MakeBatchBuilder(model: <mask>):") != std::string::npos);
        CHECK(text.find("<mask>") == text.rfind("<mask>")); // exactly one
    }
    SUBCASE("no slices render to empty text") {
        CHECK(render_slices({}).empty());
    }
    SUBCASE("files render in path order with line prefixes") {
        Project two = test::project_from({
            {"a.py", "x = 1\ny = x\n"},
            {"z.py", "u = 2\nw = u\n"},
        });
        DependenceGraph sdg2 = sdg_of(two);
        auto [r1, a1] = locate_variable(two, "a.py", 2, "y");
        auto [r2, a2] = locate_variable(two, "z.py", 2, "w");
        auto s1 = slice_all(sdg2, r1, a1, two);
        auto s2 = slice_all(sdg2, r2, a2, two);
        std::vector<Slice> all = s1;
        all.insert(all.end(), s2.begin(), s2.end());
        std::string text = render_slices(all);
        CHECK(text.find("# file: a.py") != std::string::npos);
        CHECK(text.find("# file: z.py") != std::string::npos);
        CHECK(text.find("# file: a.py") < text.find("# file: z.py"));
        CHECK(text.find("1| x = 1") != std::string::npos);
    }
}

TEST_CASE("return-type masking rewrites the signature") {
    Project p = test::project_from({{"m.py", "def f(a):\n    return a\n"}});
    DependenceGraph sdg = sdg_of(p);
    auto [ref, anchor] = locate_variable(p, "m.py", 1, "f");
    auto slices = slice_all(sdg, ref, anchor, p);
    MaskTarget mask{"m.py", 1, "f", MaskSlot::Return};
    std::string text = render_slices(slices, mask);
    CHECK(text.find("def f(a) -> <mask>:") != std::string::npos);
}

TEST_CASE("slices of random call-free programs equal the brute-force closure") {
    std::mt19937 rng(20240915);
    for (int trial = 0; trial < 40; ++trial) {
        test::GenProgram prog = test::generate_program(rng);
        Project p = test::project_from({{"m.py", prog.source()}});
        REQUIRE(p.unit(0).statements.size() == prog.stmts.size());
        DependenceGraph sdg = sdg_of(p);

        // pick a random statement touching a variable
        std::vector<std::pair<int, std::string>> occurrences;
        for (std::size_t i = 0; i < prog.stmts.size(); ++i) {
            for (const auto &v : prog.stmts[i].defs) {
                occurrences.emplace_back(static_cast<int>(i), v);
            }
            for (const auto &v : prog.stmts[i].uses) {
                occurrences.emplace_back(static_cast<int>(i), v);
            }
        }
        REQUIRE(!occurrences.empty());
        auto [stmt_idx, var] = occurrences[rng() % occurrences.size()];
        CAPTURE(prog.source());
        CAPTURE(stmt_idx);
        CAPTURE(var);

        VariableRef ref;
        ref.name = var;
        ref.scope = "<module>";
        SliceStats stats;
        Slice slice =
            slice_one(sdg, TargetVariable{ref, NodeId{0, stmt_idx}, TargetOrigin::Plain}, p,
                      SliceOptions{}, &stats);
        std::set<int> got;
        for (const auto &s : slice.statements) {
            got.insert(s.statement_id);
        }
        std::set<int> expected = test::oracle_slice(prog, stmt_idx);
        CHECK(got == expected);
        // termination bound: every node enters the worklist at most once
        CHECK(stats.worklist_pushes <= sdg.nodes.size());
    }
}

TEST_CASE("adding an unrelated statement never shrinks a slice") {
    std::mt19937 rng(777);
    for (int trial = 0; trial < 15; ++trial) {
        test::GenProgram prog = test::generate_program(rng, 20);
        Project p1 = test::project_from({{"m.py", prog.source()}});
        DependenceGraph sdg1 = sdg_of(p1);
        std::vector<std::pair<int, std::string>> occurrences;
        for (std::size_t i = 0; i < prog.stmts.size(); ++i) {
            for (const auto &v : prog.stmts[i].defs) {
                occurrences.emplace_back(static_cast<int>(i), v);
            }
        }
        REQUIRE(!occurrences.empty());
        auto [stmt_idx, var] = occurrences[rng() % occurrences.size()];
        VariableRef ref;
        ref.name = var;
        ref.scope = "<module>";
        TargetVariable tv{ref, NodeId{0, stmt_idx}, TargetOrigin::Plain};
        Slice before = slice_one(sdg1, tv, p1);

        // append a statement over fresh names at module level
        Project p2 = test::project_from({{"m.py", prog.source() + "zz_fresh = 123\n"}});
        DependenceGraph sdg2 = sdg_of(p2);
        Slice after = slice_one(sdg2, tv, p2);

        std::set<int> ids_before, ids_after;
        for (const auto &s : before.statements) {
            ids_before.insert(s.statement_id);
        }
        for (const auto &s : after.statements) {
            ids_after.insert(s.statement_id);
        }
        CHECK(std::includes(ids_after.begin(), ids_after.end(), ids_before.begin(),
                            ids_before.end()));
    }
}

TEST_CASE("locating an absent variable raises not-found") {
    Project p = test::load_fig1();
    CHECK_THROWS_AS(locate_variable(p, "main.py", 1, "nosuch"), NotFoundError);
    CHECK_THROWS_AS(locate_variable(p, "absent.py", 1, "x"), NotFoundError);
    CHECK_THROWS_AS(locate_variable(p, "main.py", 999, "model"), NotFoundError);
}

} // TEST_SUITE
