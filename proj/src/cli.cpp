#include "schemacoder/cli.hpp"

#include "schemacoder/boosting.hpp"
#include "schemacoder/csv.hpp"
#include "schemacoder/errors.hpp"
#include "schemacoder/metrics.hpp"
#include "schemacoder/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace schemacoder {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("write failure: " + path);
}

struct RunConfig {
    std::string log_path;
    std::string ground_truth_path;
    std::string background_path;
    std::string output_dir;

    std::string backend_profile = "scripted";  // scripted | http
    std::string transcript_path;               // replay source for `scripted`
    bool record_transcript = false;
    std::size_t context_budget = 32768;

    PipelineConfig pipeline;
    json raw;  // verbatim copy for the manifest
};

[[noreturn]] void config_fail(const std::string& field, const std::string& why) {
    throw FormatError("config field '" + field + "': " + why);
}

RunConfig load_run_config(const std::string& path) {
    RunConfig config;
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError("config is not valid JSON: " + std::string(e.what()));
    }
    config.raw = doc;

    auto require_string = [&](const char* field) -> std::string {
        if (!doc.contains(field) || !doc[field].is_string() || doc[field].get<std::string>().empty()) {
            config_fail(field, "required non-empty string");
        }
        return doc[field].get<std::string>();
    };
    config.log_path = require_string("log_path");
    config.ground_truth_path = require_string("ground_truth_path");
    config.output_dir = require_string("output_dir");
    if (doc.contains("background_path")) config.background_path = doc["background_path"];

    for (const char* field : {"log_path", "ground_truth_path"}) {
        std::string value = doc[field].get<std::string>();
        if (!fs::exists(value)) config_fail(field, "path does not exist: " + value);
    }
    if (!config.background_path.empty() && !fs::exists(config.background_path)) {
        config_fail("background_path", "path does not exist: " + config.background_path);
    }

    if (doc.contains("backend")) {
        const json& backend = doc["backend"];
        if (backend.contains("profile")) config.backend_profile = backend["profile"];
        if (backend.contains("transcript_path")) config.transcript_path = backend["transcript_path"];
        if (backend.contains("record_transcript")) config.record_transcript = backend["record_transcript"];
        if (backend.contains("context_budget")) config.context_budget = backend["context_budget"];
    }
    if (config.backend_profile != "scripted" && config.backend_profile != "http") {
        config_fail("backend.profile", "must be 'scripted' or 'http'");
    }
    if (config.backend_profile == "scripted") {
        if (config.transcript_path.empty()) {
            config_fail("backend.transcript_path", "required for the scripted profile");
        }
        if (!fs::exists(config.transcript_path)) {
            config_fail("backend.transcript_path", "path does not exist: " + config.transcript_path);
        }
    }
    if (config.context_budget < 1024) config_fail("backend.context_budget", "must be >= 1024");

    PipelineConfig& p = config.pipeline;
    if (doc.contains("pipeline")) {
        const json& pj = doc["pipeline"];
        if (pj.contains("seed")) p.seed = pj["seed"];
        if (pj.contains("segment")) {
            if (pj["segment"].contains("max_lines")) p.segment.max_lines = pj["segment"]["max_lines"];
            if (pj["segment"].contains("max_tokens")) p.segment.max_tokens = pj["segment"]["max_tokens"];
        }
        if (pj.contains("embedding")) {
            if (pj["embedding"].contains("dim")) p.embedding_dim = pj["embedding"]["dim"];
            if (pj["embedding"].contains("k")) p.cluster_k = pj["embedding"]["k"].get<int>();
            if (pj["embedding"].contains("per_cluster")) {
                p.representatives_per_cluster = pj["embedding"]["per_cluster"];
            }
        }
        if (pj.contains("qtree")) {
            if (pj["qtree"].contains("breadth")) p.qtree.breadth = pj["qtree"]["breadth"];
            if (pj["qtree"].contains("token_limit")) p.qtree.token_limit = pj["qtree"]["token_limit"];
        }
        if (pj.contains("optimizer")) {
            const json& oj = pj["optimizer"];
            if (oj.contains("islands")) p.optimizer.islands = oj["islands"];
            if (oj.contains("migrate_every")) p.optimizer.migrate_every = oj["migrate_every"];
            if (oj.contains("feedback_cap")) p.optimizer.feedback_cap = oj["feedback_cap"];
            if (oj.contains("eval_line_limit")) p.optimizer.eval_line_limit = oj["eval_line_limit"];
        }
        if (pj.contains("boosting")) {
            const json& bj = pj["boosting"];
            if (bj.contains("max_boost_iterations")) p.max_boost_iterations = bj["max_boost_iterations"];
            if (bj.contains("boost_period")) p.boost_period = bj["boost_period"];
            if (bj.contains("residual_representatives")) {
                p.residual_representatives = bj["residual_representatives"];
            }
        }
    }
    if (p.segment.max_tokens < 64) config_fail("pipeline.segment.max_tokens", "must be >= 64");
    if (p.segment.max_lines < 1) config_fail("pipeline.segment.max_lines", "must be >= 1");
    if (p.embedding_dim < 16) config_fail("pipeline.embedding.dim", "must be >= 16");
    if (p.representatives_per_cluster < 1) config_fail("pipeline.embedding.per_cluster", "must be >= 1");
    if (p.qtree.breadth < 1) config_fail("pipeline.qtree.breadth", "must be >= 1");
    if (p.optimizer.islands < 1) config_fail("pipeline.optimizer.islands", "must be >= 1");
    if (p.optimizer.migrate_every < 1) config_fail("pipeline.optimizer.migrate_every", "must be >= 1");
    if (p.max_boost_iterations < 0) config_fail("pipeline.boosting.max_boost_iterations", "must be >= 0");
    if (p.boost_period < 1) config_fail("pipeline.boosting.boost_period", "must be >= 1");
    return config;
}

ParseResult parse_result_from_csv(const std::string& text, LogFile* log_out) {
    auto rows = parse_csv(text);
    if (rows.empty()) throw FormatError("prediction csv: missing header row");
    const auto& header = rows.front();
    std::size_t id_col = header.size(), content_col = header.size(), template_col = header.size();
    std::size_t matched_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "LineId") id_col = i;
        if (header[i] == "Content") content_col = i;
        if (header[i] == "EventTemplate") template_col = i;
        if (header[i] == "Matched") matched_col = i;
    }
    if (id_col == header.size() || content_col == header.size() || template_col == header.size()) {
        throw FormatError("prediction csv: header must contain LineId, Content, EventTemplate");
    }

    ParseResult result;
    LogFile log;
    std::set<LineId> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() <= std::max({id_col, content_col, template_col})) {
            throw FormatError("prediction csv: row " + std::to_string(r + 1) + " has too few fields");
        }
        LineId id = 0;
        try {
            id = std::stoll(row[id_col]);
        } catch (const std::exception&) {
            throw FormatError("prediction csv: bad LineId '" + row[id_col] + "'");
        }
        if (!seen.insert(id).second) {
            throw FormatError("prediction csv: duplicate LineId " + std::to_string(id));
        }
        log.lines.push_back(LogLine{id, row[content_col]});
        bool matched = true;
        if (matched_col != header.size() && row.size() > matched_col) {
            matched = row[matched_col] != "false";
        }
        if (matched) {
            LineAssignment assignment;
            assignment.template_text = row[template_col];
            result.assignments.emplace(id, std::move(assignment));
        } else {
            result.unmatched.insert(id);
        }
    }
    if (log_out) *log_out = std::move(log);
    return result;
}

}  // namespace

int cmd_extract(const std::string& config_path) {
    RunConfig config;
    LogFile log;
    GroundTruth truth;
    std::string background;
    try {
        config = load_run_config(config_path);
        log = load_log(config.log_path);
        truth = load_ground_truth(config.ground_truth_path);
        bind_ground_truth(truth, log);
        if (!config.background_path.empty()) background = read_file(config.background_path);
        fs::create_directories(config.output_dir);
    } catch (const Error& e) {
        std::cerr << "extract: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "extract: " << e.what() << "\n";
        return 2;
    }

    try {
        std::shared_ptr<Backend> backend;
        if (config.backend_profile == "scripted") {
            backend = std::make_shared<ReplayBackend>(
                config.transcript_path, BackendProfile{"replay", config.context_budget, true});
        } else {
            auto http = http_config_from_env();
            if (!http) {
                std::cerr << "extract: backend.profile=http requires SCHEMACODER_LLM_ENDPOINT and "
                             "SCHEMACODER_LLM_MODEL\n";
                return 2;
            }
            http->context_budget = config.context_budget;
            backend = std::make_shared<HttpBackend>(*http);
        }

        LlmClientOptions options;
        if (config.record_transcript) {
            options.recorder = std::make_shared<TranscriptRecorder>(
                (fs::path(config.output_dir) / "transcript.jsonl").string());
        }
        LlmClient client(std::move(backend), std::move(options));

        TraceSink trace;
        RunResult run;
        try {
            run = run_schemacoder(client, log, truth, background, config.pipeline, &trace);
        } catch (...) {
            // Keep whatever tree trace accumulated before the failure.
            write_file((fs::path(config.output_dir) / "qtree_trace.jsonl").string(),
                       trace_to_jsonl(trace));
            throw;
        }

        const fs::path out(config.output_dir);
        write_file((out / "rules.json").string(), serialize(run.final_program));
        ParseResult parsed = execute(run.final_program, log);
        write_parse_result_csv(parsed, log, (out / "parsed.csv").string());
        write_file((out / "report.json").string(), eval_report_to_json(run.full_report));
        write_file((out / "history.csv").string(), history_to_csv(run.history));
        write_file((out / "progress.csv").string(), progress_to_csv(run.optimizer_progress));
        write_file((out / "clusters.json").string(), [&] {
            json rows = json::array();
            for (const auto& row : run.chunk_report) {
                rows.push_back(json{{"chunk_id", row.chunk_id},
                                    {"cluster", row.cluster},
                                    {"pc1", row.pc1},
                                    {"pc2", row.pc2}});
            }
            return rows.dump(2);
        }());
        write_file((out / "qtree_trace.jsonl").string(), trace_to_jsonl(run.trace));

        json manifest;
        manifest["config"] = config.raw;
        manifest["config_path"] = config_path;
        manifest["backend_profile"] = config.backend_profile;
        manifest["seed"] = config.pipeline.seed;
        manifest["prompt_version"] = kPromptVersion;
        manifest["final"] = {{"ga", run.full_report.ga},
                             {"pa", run.full_report.pa},
                             {"fga", run.full_report.fga},
                             {"fta", run.full_report.fta},
                             {"loss", run.full_report.loss}};
        manifest["boost_steps"] = run.boost_steps_run;
        manifest["initial_loss"] = run.initial_loss;
        manifest["artifacts"] = {"rules.json",   "parsed.csv",    "report.json",
                                 "history.csv",  "progress.csv",  "clusters.json",
                                 "qtree_trace.jsonl"};
        write_file((out / "manifest.json").string(), manifest.dump(2));

        std::cout << eval_summary_line(run.full_report) << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "extract: pipeline failure: " << e.what() << "\n";
        return 3;
    }
}

int cmd_evaluate(const std::string& pred_csv, const std::string& truth_csv,
                 const std::string& report_out) {
    try {
        LogFile log;
        ParseResult pred = parse_result_from_csv(read_file(pred_csv), &log);
        GroundTruth truth = load_ground_truth(truth_csv);
        EvalReport report = evaluate(pred, truth, log);
        std::cout << eval_summary_line(report) << "\n";
        std::string out_path = report_out.empty() ? "eval_report.json" : report_out;
        write_file(out_path, eval_report_to_json(report));
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "evaluate: " << e.what() << "\n";
        return 2;
    }
}

int cmd_report(const std::string& run_dir) {
    try {
        const fs::path dir(run_dir);
        if (!fs::exists(dir / "manifest.json")) {
            throw IoError("run dir has no manifest.json: " + run_dir);
        }
        std::string clusters_text = read_file((dir / "clusters.json").string());
        std::string history_text = read_file((dir / "history.csv").string());

        json clusters = json::parse(clusters_text);
        std::vector<ChunkReportRow> rows;
        for (const auto& item : clusters) {
            ChunkReportRow row;
            row.chunk_id = item["chunk_id"];
            row.cluster = item["cluster"];
            row.pc1 = item["pc1"];
            row.pc2 = item["pc2"];
            rows.push_back(row);
        }
        write_file((dir / "pca.csv").string(), chunk_report_to_csv(rows));
        write_file((dir / "loss_curve.csv").string(), history_text);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "report: " << e.what() << "\n";
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"schemacoder: log template extraction via LLM-guided rule synthesis"};
    app.require_subcommand(1);

    std::string config_path;
    auto* extract = app.add_subcommand("extract", "run the full extraction pipeline");
    extract->add_option("--config", config_path, "run configuration JSON")->required();

    std::string pred_path, truth_path, report_out;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "score a parsed csv against ground truth");
    evaluate_cmd->add_option("--pred", pred_path, "predicted structured csv")->required();
    evaluate_cmd->add_option("--truth", truth_path, "ground truth structured csv")->required();
    evaluate_cmd->add_option("--out", report_out, "where to write the full report json");

    std::string run_dir;
    auto* report_cmd = app.add_subcommand("report", "emit plottable csv files for a finished run");
    report_cmd->add_option("--run", run_dir, "run output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (extract->parsed()) return cmd_extract(config_path);
    if (evaluate_cmd->parsed()) return cmd_evaluate(pred_path, truth_path, report_out);
    if (report_cmd->parsed()) return cmd_report(run_dir);
    return 2;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace schemacoder
