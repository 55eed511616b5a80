// slicetype: infer types for variables in dynamic-language sources by
// slicing a system dependence graph, ranking structurally similar candidate
// types, and voting over generation-backend samples.

#include "slicetype/backend.hpp"
#include "slicetype/dependence_graph.hpp"
#include "slicetype/evaluator.hpp"
#include "slicetype/knowledge_base.hpp"
#include "slicetype/prompt_pipeline.hpp"
#include "slicetype/ranker.hpp"
#include "slicetype/slicer.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

using json = nlohmann::ordered_json;
using namespace slicetype;

namespace {

void print_diags(const Diagnostics &diags) {
    for (const auto &d : diags.all()) {
        std::cerr << d.str() << "\n";
    }
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot open " + path);
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path);
    }
    out << content;
}

struct TargetRow {
    std::string id;
    std::string file;
    int line = 0;
    std::string name;
    std::string slot;  // optional
    std::string label; // optional, ignored by infer
};

std::vector<TargetRow> read_target_rows(const std::string &path) {
    std::vector<TargetRow> rows;
    std::istringstream in(read_file(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
        if (trimmed.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error &e) {
            throw FormatError(std::string("bad JSON record: ") + e.what(), path, line_no);
        }
        TargetRow row;
        try {
            row.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                             : j.value("id", json(line_no)).dump();
            row.file = j.at("file").get<std::string>();
            row.line = j.at("line").get<int>();
            row.name = j.at("name").get<std::string>();
            row.slot = j.value("slot", std::string{});
            row.label = j.value("label", std::string{});
        } catch (const json::exception &e) {
            throw FormatError(std::string("bad record fields: ") + e.what(), path, line_no);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

MaskSlot slot_for_target(const Project &project, const VariableRef &ref, NodeId anchor,
                         const std::string &explicit_slot) {
    if (auto parsed = parse_slot(explicit_slot)) {
        switch (*parsed) {
        case SampleSlot::Var: return MaskSlot::Variable;
        case SampleSlot::Ret: return MaskSlot::Return;
        case SampleSlot::Arg: return MaskSlot::Parameter;
        }
    }
    const SourceUnit &unit = project.unit(anchor.unit);
    const Statement *stmt = unit.statement(anchor.statement);
    if (stmt != nullptr && stmt->kind == StatementKind::FunctionSignature) {
        for (const FunctionDecl *fn : unit.all_functions()) {
            if (fn->signature_id == anchor.statement && fn->name == ref.name) {
                return MaskSlot::Return;
            }
            if (fn->signature_id == anchor.statement) {
                for (const auto &p : fn->params) {
                    if (p.name == ref.name) {
                        return MaskSlot::Parameter;
                    }
                }
            }
        }
    }
    if (const FunctionDecl *fn = unit.function_for_scope(ref.scope)) {
        for (const auto &p : fn->params) {
            if (p.name == ref.name && !ref.qualified()) {
                return MaskSlot::Parameter;
            }
        }
    }
    return MaskSlot::Variable;
}

// ---------------------------------------------------------------------------

int cmd_kb_build(const std::string &project_dir, const std::string &libs,
                 const std::string &out_path) {
    Diagnostics diags;
    Project project = Project::load(project_dir, diags);
    KnowledgeBase kb = build_project_kb(project);
    if (!libs.empty()) {
        merge_library_kb(kb, libs, diags);
    }
    save_kb(kb, out_path);
    print_diags(diags);
    std::cerr << "wrote " << kb.size() << " records to " << out_path << "\n";
    return 0;
}

int cmd_graph(const std::string &project_dir, const std::string &out_path) {
    Diagnostics diags;
    Project project = Project::load(project_dir, diags);
    auto pdgs = build_all_pdgs(project);
    DependenceGraph sdg = build_sdg(pdgs, project, diags);
    std::string dump = serialize_graph(sdg, project);
    if (out_path == "-") {
        std::cout << dump;
    } else {
        write_file(out_path, dump);
    }
    print_diags(diags);
    return 0;
}

int cmd_slice(const std::string &project_dir, const std::string &file, int line,
              const std::string &name, bool as_json, bool intra_only) {
    Diagnostics diags;
    Project project = Project::load(project_dir, diags);
    auto pdgs = build_all_pdgs(project);
    DependenceGraph sdg = build_sdg(pdgs, project, diags);
    auto [ref, anchor] = locate_variable(project, file, line, name);
    SliceOptions options;
    options.intra_only = intra_only;
    auto slices = slice_all(sdg, ref, anchor, project, options);
    if (as_json) {
        json out = json::array();
        for (const auto &slice : slices) {
            json s;
            s["origin"] = to_string(slice.target.origin);
            s["anchor"] = {{"file", project.unit(slice.target.anchor.unit).path},
                           {"statement", slice.target.anchor.statement}};
            s["statements"] = json::array();
            for (const auto &stmt : slice.statements) {
                s["statements"].push_back({{"file", stmt.path},
                                           {"statement", stmt.statement_id},
                                           {"line", stmt.line},
                                           {"text", stmt.text}});
            }
            out.push_back(std::move(s));
        }
        std::cout << out.dump(2) << "\n";
    } else {
        std::cout << render_slices(slices);
    }
    print_diags(diags);
    return 0;
}

int cmd_rank(const std::string &kb_path, const std::string &profile_json) {
    KnowledgeBase kb = load_kb(kb_path);
    std::string text = profile_json;
    if (!text.empty() && text[0] == '@') {
        text = read_file(text.substr(1));
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        throw FormatError(std::string("bad profile JSON: ") + e.what());
    }
    StructuralProfile profile;
    for (const auto &f : j.value("fields", json::array())) {
        profile.var_fields.insert(f.get<std::string>());
    }
    for (const auto &m : j.value("methods", json::array())) {
        profile.var_methods.insert(m.get<std::string>());
    }
    auto ranked = rank_candidates(profile, kb);
    for (const auto &c : ranked) {
        std::cout << c.record.name << "\t" << std::fixed << std::setprecision(4) << c.score << "\t"
                  << (c.record.source == RecordSource::Project ? "project" : "library") << "\t"
                  << c.record.package << "\n";
    }
    return 0;
}

struct InferCli {
    std::string project_dir;
    std::string targets_path;
    std::string kb_path;
    std::string backend_kind = "mock";
    std::string mock_file;
    std::string out_path;
    std::string api_base;
    std::string api_key;
    std::string model;
    bool intra_only = false;
    bool no_candidates = false;
    bool dump_prompts = false;
    int jobs = 1;
    SamplingConfig sampling;
};

int cmd_infer(const InferCli &cli) {
    Diagnostics diags;
    Project project = Project::load(cli.project_dir, diags);
    auto pdgs = build_all_pdgs(project);
    DependenceGraph sdg = build_sdg(pdgs, project, diags);
    KnowledgeBase kb = cli.kb_path.empty() ? build_project_kb(project) : load_kb(cli.kb_path);
    auto rows = read_target_rows(cli.targets_path);

    InferOptions options;
    options.slice.intra_only = cli.intra_only;
    options.no_candidates = cli.no_candidates;
    options.sampling = cli.sampling;

    struct Row {
        std::string id;
        bool ok = false;
        std::string error;
        TypePrediction pred;
        std::string prompt; // only with --dump-prompts
    };
    std::vector<Row> results(rows.size());

    auto backend = cli.dump_prompts ? nullptr
                                    : make_backend(cli.backend_kind, cli.mock_file, cli.api_base,
                                                   cli.api_key, cli.model);

    std::mutex diag_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) {
                return;
            }
            const TargetRow &row = rows[i];
            Row &out = results[i];
            out.id = row.id;
            try {
                auto [ref, anchor] = locate_variable(project, row.file, row.line, row.name);
                InferTarget target{ref, anchor, slot_for_target(project, ref, anchor, row.slot)};
                if (cli.dump_prompts) {
                    out.prompt = build_prompt_for_target(project, sdg, kb, target, options).text();
                    out.ok = true;
                    continue;
                }
                Diagnostics local;
                out.pred = infer(project, sdg, kb, *backend, target, options, local);
                out.ok = true;
                std::lock_guard<std::mutex> lock(diag_mutex);
                for (const auto &d : local.all()) {
                    std::cerr << row.id << ": " << d.str() << "\n";
                }
            } catch (const Error &e) {
                out.error = e.what();
                std::lock_guard<std::mutex> lock(diag_mutex);
                std::cerr << row.id << ": error: " << e.what() << "\n";
            }
        }
    };
    int jobs = std::max(1, cli.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
        for (auto &t : pool) {
            t.join();
        }
    }

    std::ostringstream out;
    for (const auto &r : results) {
        if (cli.dump_prompts) {
            json j;
            j["id"] = r.id;
            j["prompt"] = r.prompt;
            j["hash"] = prompt_hash(r.prompt);
            out << j.dump() << "\n";
            continue;
        }
        json j;
        j["id"] = r.id;
        j["predictions"] = json::array();
        for (const auto &[type, votes] : r.pred.ranked) {
            j["predictions"].push_back({{"type", type}, {"votes", votes}});
        }
        j["prompt_tokens"] = r.pred.prompt_tokens;
        if (!r.ok) {
            j["error"] = r.error;
        }
        out << j.dump() << "\n";
    }
    if (cli.out_path.empty() || cli.out_path == "-") {
        std::cout << out.str();
    } else {
        write_file(cli.out_path, out.str());
    }
    print_diags(diags);
    return 0;
}

int cmd_eval(const std::string &dataset_path, const std::string &preds_path,
             const std::string &kb_path, const std::string &report_kind,
             const std::string &out_path) {
    KnowledgeBase kb = kb_path.empty() ? KnowledgeBase{} : load_kb(kb_path);
    auto rows = read_target_rows(dataset_path);

    std::map<std::string, std::vector<std::string>> preds_by_id;
    std::istringstream in(read_file(preds_path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error &e) {
            throw FormatError(std::string("bad prediction record: ") + e.what(), preds_path, line_no);
        }
        std::string id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
        std::vector<std::string> types;
        for (const auto &p : j.value("predictions", json::array())) {
            types.push_back(p.at("type").get<std::string>());
        }
        preds_by_id[id] = std::move(types);
    }

    std::vector<EvalSample> samples;
    for (const auto &row : rows) {
        EvalSample s;
        s.id = row.id;
        s.label = row.label;
        auto slot = parse_slot(row.slot);
        s.slot = slot.value_or(SampleSlot::Var);
        auto it = preds_by_id.find(row.id);
        if (it != preds_by_id.end()) {
            s.predictions = it->second;
        }
        samples.push_back(std::move(s));
    }
    Report report = evaluate(samples, kb);
    std::string rendered =
        report_kind == "json" ? render_report_json(report) : render_report_table(report);
    if (out_path.empty() || out_path == "-") {
        std::cout << rendered;
    } else {
        write_file(out_path, rendered);
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"slicetype: dependence-slicing type inference toolchain"};
    app.require_subcommand(1);

    // kb build
    auto *kb_cmd = app.add_subcommand("kb", "knowledge base operations");
    kb_cmd->require_subcommand(1);
    auto *kb_build = kb_cmd->add_subcommand("build", "build a knowledge base from project classes");
    std::string kb_project, kb_libs, kb_out;
    kb_build->add_option("--project", kb_project, "project directory")->required();
    kb_build->add_option("--libs", kb_libs, "library manifest (JSON array of records)");
    kb_build->add_option("--out", kb_out, "output file")->required();

    // graph
    auto *graph_cmd = app.add_subcommand("graph", "dump the system dependence graph");
    std::string graph_project, graph_out;
    graph_cmd->add_option("--project", graph_project, "project directory")->required();
    graph_cmd->add_option("--out", graph_out, "output file ('-' for stdout)")->required();

    // slice
    auto *slice_cmd = app.add_subcommand("slice", "print slices for a variable");
    std::string slice_project, slice_file, slice_name;
    int slice_line = 0;
    bool slice_json = false, slice_intra = false;
    slice_cmd->add_option("--project", slice_project, "project directory")->required();
    slice_cmd->add_option("--file", slice_file, "file (path or module name)")->required();
    slice_cmd->add_option("--line", slice_line, "1-based line of the variable")->required();
    slice_cmd->add_option("--name", slice_name, "variable name")->required();
    slice_cmd->add_flag("--json", slice_json, "structured output");
    slice_cmd->add_flag("--intra-only", slice_intra, "skip inter-procedural edges");

    // rank
    auto *rank_cmd = app.add_subcommand("rank", "rank knowledge-base candidates for a profile");
    std::string rank_kb, rank_profile;
    rank_cmd->add_option("--kb", rank_kb, "knowledge base file")->required();
    rank_cmd->add_option("--profile", rank_profile,
                         "profile JSON {\"fields\":[],\"methods\":[]} or @file")
        ->required();

    // infer
    auto *infer_cmd = app.add_subcommand("infer", "run the full inference pipeline");
    InferCli infer_cli;
    infer_cmd->add_option("--project", infer_cli.project_dir, "project directory")->required();
    infer_cmd->add_option("--targets", infer_cli.targets_path, "targets file (JSONL)")->required();
    infer_cmd->add_option("--kb", infer_cli.kb_path, "knowledge base file (default: project classes)");
    infer_cmd->add_option("--backend", infer_cli.backend_kind, "http or mock")
        ->check(CLI::IsMember({"http", "mock"}));
    infer_cmd->add_option("--mock-file", infer_cli.mock_file, "mock backend sample file");
    infer_cmd->add_option("--out", infer_cli.out_path, "predictions output (JSONL)");
    infer_cmd->add_option("--api-base", infer_cli.api_base, "chat-completion base URL");
    infer_cmd->add_option("--api-key", infer_cli.api_key, "API key");
    infer_cmd->add_option("--model", infer_cli.model, "model name");
    infer_cmd->add_option("--jobs", infer_cli.jobs, "concurrent variables")->check(CLI::Range(1, 256));
    infer_cmd->add_option("--n-samples", infer_cli.sampling.n_samples, "samples per variable");
    infer_cmd->add_option("--temperature", infer_cli.sampling.temperature, "sampling temperature");
    infer_cmd->add_option("--top-p", infer_cli.sampling.top_p, "nucleus sampling cutoff");
    infer_cmd->add_option("--retries", infer_cli.sampling.max_retries, "retries per failed request");
    infer_cmd->add_flag("--intra-only", infer_cli.intra_only, "skip inter-procedural analysis");
    infer_cmd->add_flag("--no-candidates", infer_cli.no_candidates, "omit candidate types");
    infer_cmd->add_flag("--dump-prompts", infer_cli.dump_prompts,
                        "emit prompts and hashes instead of querying the backend");

    // eval
    auto *eval_cmd = app.add_subcommand("eval", "score predictions against labels");
    std::string eval_dataset, eval_preds, eval_kb, eval_report = "table", eval_out;
    eval_cmd->add_option("--dataset", eval_dataset, "labeled dataset (JSONL)")->required();
    eval_cmd->add_option("--preds", eval_preds, "predictions (JSONL)")->required();
    eval_cmd->add_option("--kb", eval_kb, "knowledge base file");
    eval_cmd->add_option("--report", eval_report, "table or json")
        ->check(CLI::IsMember({"table", "json"}));
    eval_cmd->add_option("--out", eval_out, "write the report to a file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (kb_build->parsed()) {
            return cmd_kb_build(kb_project, kb_libs, kb_out);
        }
        if (graph_cmd->parsed()) {
            return cmd_graph(graph_project, graph_out);
        }
        if (slice_cmd->parsed()) {
            return cmd_slice(slice_project, slice_file, slice_line, slice_name, slice_json,
                             slice_intra);
        }
        if (rank_cmd->parsed()) {
            return cmd_rank(rank_kb, rank_profile);
        }
        if (infer_cmd->parsed()) {
            return cmd_infer(infer_cli);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_dataset, eval_preds, eval_kb, eval_report, eval_out);
        }
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
