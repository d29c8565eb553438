// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// any criterion fails. Everything except the optional live smoke check
// runs fully offline.

#include "schemacoder/boosting.hpp"
#include "schemacoder/cli.hpp"
#include "schemacoder/csv.hpp"
#include "schemacoder/embedding.hpp"
#include "schemacoder/metrics.hpp"
#include "schemacoder/optimizer.hpp"
#include "schemacoder/program.hpp"
#include "schemacoder/util.hpp"

#include "metric_oracle.hpp"
#include "scenario.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace schemacoder;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const std::string& name, bool ok, const std::string& detail = "") {
    if (ok) {
        std::cout << "PASS  " << name;
        if (!detail.empty()) std::cout << "  (" << detail << ")";
        std::cout << "\n";
    } else {
        ++failures;
        std::cout << "FAIL  " << name;
        if (!detail.empty()) std::cout << "  -- " << detail;
        std::cout << "\n";
    }
}

void run_criterion(const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

struct LabelFixture {
    LogFile log;
    ParseResult pred;
    GroundTruth truth;
};

LabelFixture fixture_from_labels(const std::vector<std::string>& pred,
                                 const std::vector<std::string>& truth) {
    LabelFixture f;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        LineId id = static_cast<LineId>(i + 1);
        f.log.lines.push_back(LogLine{id, "content " + std::to_string(id)});
        f.truth.templates[id] = truth[i];
        if (pred[i].empty()) {
            f.pred.unmatched.insert(id);
        } else {
            LineAssignment assignment;
            assignment.template_text = pred[i];
            f.pred.assignments.emplace(id, std::move(assignment));
        }
    }
    return f;
}

// ---------------------------------------------------------------------
// 1 + 2: metric oracle equivalence and exact loss identity
// ---------------------------------------------------------------------
void criterion_metric_oracle() {
    auto start = Clock::now();
    SplitMix64 rng(0xACCE97);
    int mismatches = 0;
    double worst_identity = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng.next_below(12);
        oracle::Labels labels;
        for (std::size_t i = 0; i < n; ++i) {
            labels.truth.push_back("template " + std::to_string(rng.next_below(4)) + " <*>");
            if (rng.next_below(5) == 0) {
                labels.pred.push_back("");
            } else {
                labels.pred.push_back("template " + std::to_string(rng.next_below(5)) + " <*>");
            }
        }
        LabelFixture f = fixture_from_labels(labels.pred, labels.truth);
        EvalReport r = evaluate(f.pred, f.truth, f.log);
        if (r.ga != oracle::ga(labels) || r.pa != oracle::pa(labels) ||
            r.fga != oracle::fga(labels) || r.fta != oracle::fta(labels)) {
            ++mismatches;
        }
        worst_identity = std::max(
            worst_identity, std::abs(r.loss - (1.0 - (r.ga + r.pa + r.fga + r.fta) / 4.0)));
    }
    double elapsed = seconds_since(start);
    report("metric-oracle-equivalence (200 corpora, tolerance 0)",
           mismatches == 0 && elapsed < 10.0,
           std::to_string(mismatches) + " mismatches, " + std::to_string(elapsed) + "s");
    report("loss-identity (1e-12)", worst_identity <= 1e-12,
           "max deviation " + std::to_string(worst_identity));
}

// ---------------------------------------------------------------------
// 3: worked metric values
// ---------------------------------------------------------------------
void criterion_worked_values() {
    // truth {1,2},{3,4} vs pred {1,2},{3},{4} -> GA = 0.5
    LabelFixture ga_case = fixture_from_labels({"A", "A", "P", "Q"}, {"A", "A", "B", "B"});
    EvalReport ga_report = evaluate(ga_case.pred, ga_case.truth, ga_case.log);
    bool ga_ok = ga_report.ga == 0.5;

    // FGA three-group example: P = 1/3, R = 1/2 -> F1 = 0.4 exactly.
    bool fga_ok = ga_report.fga == 0.4 ||
                  std::abs(ga_report.fga - 0.4) < 1e-15;  // same arithmetic, same double

    report("worked-values GA=0.5", ga_ok, "got " + std::to_string(ga_report.ga));
    report("worked-values FGA=0.4", fga_ok, "got " + std::to_string(ga_report.fga));
}

// ---------------------------------------------------------------------
// 4: segmentation partition property on 1,000 fuzzed logs
// ---------------------------------------------------------------------
void criterion_segmentation_fuzz() {
    auto start = Clock::now();
    SplitMix64 rng(0x5E67);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n_lines = rng.next_below(250);
        std::string text;
        for (std::size_t i = 0; i < n_lines; ++i) {
            if (rng.next_below(7) == 0) {
                text += "\n";
                continue;
            }
            std::size_t len = rng.next_below(150);
            for (std::size_t j = 0; j < len; ++j) {
                text.push_back(static_cast<char>('!' + rng.next_below(90)));
            }
            text.push_back('\n');
        }
        LogFile log = load_log_from_string(text);
        SegmentConfig cfg;
        cfg.max_lines = 1 + rng.next_below(64);
        cfg.max_tokens = 64 + rng.next_below(512);
        std::vector<Chunk> chunks = segment(log, cfg);

        LineId expected = 1;
        for (const Chunk& chunk : chunks) {
            if (chunk.first_line != expected || chunk.last_line < chunk.first_line ||
                chunk.line_count() > static_cast<LineId>(cfg.max_lines) ||
                (!chunk.oversized && estimate_tokens(chunk.text) > cfg.max_tokens)) {
                ++violations;
                break;
            }
            expected = chunk.last_line + 1;
        }
        if (expected != log.total_lines() + 1) ++violations;
    }
    double elapsed = seconds_since(start);
    report("segmentation-partition (1000 fuzzed logs)", violations == 0 && elapsed < 30.0,
           std::to_string(violations) + " violations, " + std::to_string(elapsed) + "s");
}

// ---------------------------------------------------------------------
// 5: clustering determinism + planted two-blob recovery, 100/100
// ---------------------------------------------------------------------
void criterion_clustering() {
    int recovered = 0;
    int deterministic = 0;
    for (int trial = 0; trial < 100; ++trial) {
        SplitMix64 rng(1000 + static_cast<std::uint64_t>(trial));
        std::vector<EmbeddingVector> vectors;
        for (int blob = 0; blob < 2; ++blob) {
            for (int i = 0; i < 10; ++i) {
                EmbeddingVector vec;
                vec.chunk_id = blob * 10 + i;
                vec.values.assign(24, 0.0);
                vec.values[static_cast<std::size_t>(blob)] = 1.0;
                for (auto& v : vec.values) v += (rng.next_double() - 0.5) * 0.02;
                vectors.push_back(std::move(vec));
            }
        }
        std::uint64_t seed = rng.next();
        Clustering a = cluster(vectors, 2, seed);
        Clustering b = cluster(vectors, 2, seed);
        if (a.assignments == b.assignments) ++deterministic;

        int cluster_of_zero = a.assignments.at(0);
        bool exact = true;
        for (int i = 0; i < 20; ++i) {
            bool in_first = a.assignments.at(i) == cluster_of_zero;
            if (in_first != (i < 10)) exact = false;
        }
        if (exact) ++recovered;
    }
    report("clustering-determinism+two-blob-recovery (100 trials)",
           recovered == 100 && deterministic == 100,
           std::to_string(recovered) + "/100 recovered, " + std::to_string(deterministic) +
               "/100 deterministic");
}

// ---------------------------------------------------------------------
// 6: PCA vs a direct covariance eigendecomposition, 20 random matrices
// ---------------------------------------------------------------------
void criterion_pca_oracle() {
    SplitMix64 rng(0x9CA0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 10 + rng.next_below(91);   // up to 100 rows
        std::size_t dim = 4 + rng.next_below(61);  // up to 64 columns
        std::vector<EmbeddingVector> vectors;
        Eigen::MatrixXd data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < n; ++i) {
            EmbeddingVector vec;
            vec.chunk_id = static_cast<int>(i);
            vec.values.resize(dim);
            for (std::size_t d = 0; d < dim; ++d) {
                double v = rng.next_double() * 2.0 - 1.0;
                vec.values[d] = v;
                data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v;
            }
            vectors.push_back(std::move(vec));
        }
        PcaResult pca = pca_project(vectors, 2);

        Eigen::RowVectorXd mean = data.colwise().mean();
        Eigen::MatrixXd centered = data.rowwise() - mean;
        Eigen::MatrixXd cov =
            centered.transpose() * centered / static_cast<double>(n - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);

        if (pca.explained_variance[0] + 1e-9 < pca.explained_variance[1]) {
            worst = std::max(worst, 1.0);
        }
        for (int comp = 0; comp < 2; ++comp) {
            Eigen::VectorXd direction = solver.eigenvectors().col(
                static_cast<Eigen::Index>(dim - 1 - static_cast<std::size_t>(comp)));
            Eigen::Index max_idx = 0;
            direction.cwiseAbs().maxCoeff(&max_idx);
            if (direction(max_idx) < 0) direction = -direction;
            Eigen::VectorXd projected = centered * direction;
            for (std::size_t i = 0; i < n; ++i) {
                worst = std::max(worst,
                                 std::abs(pca.points[i][static_cast<std::size_t>(comp)] -
                                          projected(static_cast<Eigen::Index>(i))));
            }
            double lambda =
                solver.eigenvalues()(static_cast<Eigen::Index>(dim - 1 - static_cast<std::size_t>(comp)));
            worst = std::max(worst,
                             std::abs(pca.explained_variance[static_cast<std::size_t>(comp)] - lambda));
        }
    }
    report("pca-vs-eigensolve (20 matrices, 1e-6)", worst <= 1e-6,
           "max deviation " + std::to_string(worst));
}

// ---------------------------------------------------------------------
// 7: scripted end-to-end convergence through the CLI, fully offline
// ---------------------------------------------------------------------
void criterion_scripted_e2e() {
    auto start = Clock::now();
    fs::path dir = fs::temp_directory_path() / "sc_acceptance_e2e";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto fixture = scenario::synthetic_corpus(200, scenario::default_templates());
    PipelineConfig pipeline;
    pipeline.segment.max_lines = 25;
    pipeline.qtree.breadth = 2;
    pipeline.optimizer.islands = 2;
    pipeline.boost_period = 2;
    pipeline.max_boost_iterations = 3;
    pipeline.seed = 1;

    // Package the fixture: log, ground truth, recorded transcript, config.
    {
        std::ofstream log_out(dir / "fixture.log", std::ios::binary);
        for (const auto& line : fixture.log.lines) log_out << line.content << "\n";
        std::ofstream truth_out(dir / "fixture_truth.csv", std::ios::binary);
        truth_out << "LineId,Content,EventTemplate\n";
        for (const auto& line : fixture.log.lines) {
            truth_out << csv_join({std::to_string(line.id), line.content,
                                   fixture.truth.templates.at(line.id)})
                      << "\n";
        }
    }
    {
        auto staged = std::make_shared<scenario::StagedBackend>(fixture.templates);
        LlmClientOptions options;
        options.recorder =
            std::make_shared<TranscriptRecorder>((dir / "fixture_transcript.jsonl").string());
        LlmClient client(staged, options);
        run_schemacoder(client, fixture.log, fixture.truth, "", pipeline);
    }
    json config;
    config["log_path"] = (dir / "fixture.log").string();
    config["ground_truth_path"] = (dir / "fixture_truth.csv").string();
    config["output_dir"] = (dir / "out").string();
    config["backend"] = {{"profile", "scripted"},
                         {"transcript_path", (dir / "fixture_transcript.jsonl").string()}};
    config["pipeline"] = {
        {"seed", pipeline.seed},
        {"segment", {{"max_lines", pipeline.segment.max_lines}}},
        {"qtree", {{"breadth", pipeline.qtree.breadth}}},
        {"optimizer", {{"islands", pipeline.optimizer.islands}}},
        {"boosting",
         {{"max_boost_iterations", pipeline.max_boost_iterations},
          {"boost_period", pipeline.boost_period}}},
    };
    {
        std::ofstream config_out(dir / "config.json", std::ios::binary);
        config_out << config.dump(2);
    }

    int status = cmd_extract((dir / "config.json").string());
    bool artifacts_ok = status == 0;
    for (const char* artifact : {"rules.json", "parsed.csv", "report.json", "history.csv",
                                 "manifest.json", "qtree_trace.jsonl"}) {
        artifacts_ok = artifacts_ok && fs::exists(dir / "out" / artifact);
    }

    double final_loss = 1.0;
    int boost_steps = 0;
    bool strictly_decreasing_boosts = true;
    bool never_increases = true;
    if (artifacts_ok) {
        std::ifstream report_in(dir / "out" / "report.json");
        json report_doc = json::parse(report_in);
        final_loss = report_doc["loss"].get<double>();

        std::ifstream history_in(dir / "out" / "history.csv");
        std::ostringstream buf;
        buf << history_in.rdbuf();
        auto rows = parse_csv(buf.str());
        double last = 2.0;
        double last_boost = 2.0;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            double loss = std::stod(rows[r][2]);
            if (loss > last + 1e-12) never_increases = false;
            if (rows[r][1] == "boost") {
                ++boost_steps;
                if (loss >= last_boost) strictly_decreasing_boosts = false;
                last_boost = loss;
            }
            last = loss;
        }
    }
    double elapsed = seconds_since(start);
    bool ok = artifacts_ok && final_loss == 0.0 && boost_steps <= 3 &&
              strictly_decreasing_boosts && never_increases && elapsed < 60.0;
    report("scripted-e2e-convergence (loss 0 within 3 boosts, offline)", ok,
           "loss " + std::to_string(final_loss) + ", " + std::to_string(boost_steps) +
               " boosts, " + std::to_string(elapsed) + "s");
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------
// 8: boost-step gate under an adversarial backend, 50 random scenarios
// ---------------------------------------------------------------------
void criterion_adversarial_gate() {
    auto start = Clock::now();
    std::vector<scenario::TemplateSpec> pool = scenario::default_templates();
    pool.push_back(scenario::make_template("Thread <*> exited with status <*>"));
    pool.push_back(scenario::make_template("Request <*> handled in <*> us"));
    pool.push_back(scenario::make_template("Dropping packet from <*>"));

    SplitMix64 rng(0xADD5);
    int violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n_templates = 3 + rng.next_below(4);  // 3..6
        std::vector<scenario::TemplateSpec> templates;
        std::set<std::size_t> chosen;
        while (templates.size() < n_templates) {
            std::size_t pick = rng.next_below(pool.size());
            if (chosen.insert(pick).second) templates.push_back(pool[pick]);
        }
        int lines = 40 + static_cast<int>(rng.next_below(80));
        auto fixture = scenario::synthetic_corpus(lines, templates, rng.next());

        scenario::BackendPolicy policy;
        policy.regressive_boost_replies = true;
        policy.regressive_merge_replies = rng.next_below(2) == 0;
        policy.initial_coverage.clear();
        std::size_t covered = 1 + rng.next_below(n_templates - 1);
        for (std::size_t i = 0; i < covered; ++i) policy.initial_coverage.insert(i);

        auto backend = std::make_shared<scenario::StagedBackend>(templates, policy);
        LlmClient client(backend);
        PipelineConfig cfg;
        cfg.segment.max_lines = 20;
        cfg.qtree.breadth = 2;
        cfg.optimizer.islands = 2;
        cfg.boost_period = 1 + static_cast<int>(rng.next_below(3));
        cfg.max_boost_iterations = 3;
        cfg.seed = rng.next();

        RunResult result = run_schemacoder(client, fixture.log, fixture.truth, "", cfg);
        double last = 2.0;
        for (const auto& row : result.history) {
            if (row.phase == "boost" && row.loss > last + 1e-12) ++violations;
            last = row.loss;
        }
    }
    double elapsed = seconds_since(start);
    report("boost-gate-monotonicity (50 adversarial scenarios)", violations == 0,
           std::to_string(violations) + " violations, " + std::to_string(elapsed) + "s");
}

// ---------------------------------------------------------------------
// 9: optimizer monotonicity and byte-level reproducibility
// ---------------------------------------------------------------------
void criterion_optimizer_repro() {
    // Corpus of three word groups; the backend improves the parser once
    // mid-run and echoes the parent otherwise.
    LogFile log;
    GroundTruth truth;
    const char* words[] = {"alpha", "beta", "gamma"};
    LineId id = 1;
    for (const char* word : words) {
        for (int i = 0; i < 4; ++i) {
            log.lines.push_back(LogLine{id, std::string(word) + " " + std::to_string(100 + id)});
            truth.templates[id] = std::string(word) + " <*>";
            ++id;
        }
    }
    json initial_doc;
    initial_doc["version"] = 1;
    initial_doc["rules"] = json::array();
    initial_doc["rules"].push_back(json{
        {"id", "alpha"}, {"pattern", "alpha (\\d+)"}, {"template", "alpha <*>"}, {"priority", 0}});
    ParserProgram initial = compile_program(initial_doc.dump()).program;

    auto make_backend = [] {
        auto backend = std::make_shared<ScriptedBackend>();
        auto call = std::make_shared<int>(0);
        backend->set_handler(
            [call](const CompletionRequest& request) -> std::optional<std::string> {
                if (request.purpose != PromptId::mutate) return std::nullopt;
                ++*call;
                if (*call == 5) {
                    json doc;
                    doc["version"] = 1;
                    doc["rules"] = json::array();
                    int priority = 0;
                    for (const char* word : {"alpha", "beta", "gamma"}) {
                        doc["rules"].push_back(json{{"id", word},
                                                    {"pattern", std::string(word) + " (\\d+)"},
                                                    {"template", std::string(word) + " <*>"},
                                                    {"priority", priority++}});
                    }
                    return doc.dump();
                }
                std::string parent = scenario::extract_between(
                    request.prompt, "Current parser rule document:\n", "\n\nEvaluation feedback:");
                return parent.empty() ? std::string("{}") : parent;
            });
        return backend;
    };

    OptimizerConfig cfg;
    cfg.generations = 6;
    cfg.islands = 3;
    cfg.migrate_every = 2;
    cfg.seed = 777;

    auto run_once = [&](std::vector<ProgressRow>* progress) {
        LlmClient client(make_backend());
        VersionCounter versions(50);
        return evolve(client, initial, truth, log, cfg, "", &versions, progress);
    };

    std::vector<ProgressRow> progress_a, progress_b;
    Candidate a = run_once(&progress_a);
    Candidate b = run_once(&progress_b);

    bool monotone = true;
    double last = 0.0;
    for (const auto& row : progress_a) {
        if (row.best_score < last - 1e-12) monotone = false;
        last = row.best_score;
    }
    bool improved = a.score == 1.0;
    bool byte_equal = serialize(a.program) == serialize(b.program);
    bool lineage_equal = a.program.lineage == b.program.lineage;
    report("optimizer-monotonicity+reproducibility",
           monotone && improved && byte_equal && lineage_equal,
           std::string(monotone ? "monotone" : "NON-MONOTONE") + ", " +
               (byte_equal ? "byte-equal" : "DIFFERS") + ", " +
               (lineage_equal ? "lineage-equal" : "LINEAGE-DIFFERS"));
}

// ---------------------------------------------------------------------
// 10: parser throughput, 1,000,000 lines x 30 rules in under 60 s
// ---------------------------------------------------------------------
void criterion_throughput() {
    std::vector<scenario::TemplateSpec> templates;
    const char* verbs[] = {"started", "stopped", "registered", "deleted", "updated", "loaded"};
    const char* nouns[] = {"worker", "session", "shard", "volume", "route"};
    for (const char* verb : verbs) {
        for (const char* noun : nouns) {
            templates.push_back(scenario::make_template(
                std::string(noun) + " <*> " + verb + " by <*> at <*>"));
        }
    }
    // 30 templates -> 30 rules.
    json doc;
    doc["version"] = 1;
    doc["rules"] = json::array();
    for (std::size_t i = 0; i < templates.size(); ++i) {
        doc["rules"].push_back(json{{"id", "t" + std::to_string(i)},
                                    {"pattern", templates[i].pattern},
                                    {"template", templates[i].template_text},
                                    {"priority", static_cast<int>(i)}});
    }
    ParserProgram program = compile_program(doc.dump()).program;

    const int total = 1000000;
    LogFile log;
    log.lines.reserve(total);
    SplitMix64 rng(0x10a6);
    for (int i = 0; i < total; ++i) {
        const auto& spec = templates[static_cast<std::size_t>(i) % templates.size()];
        std::string line;
        std::size_t pos = 0;
        while (pos < spec.template_text.size()) {
            std::size_t marker = spec.template_text.find("<*>", pos);
            if (marker == std::string::npos) {
                line += spec.template_text.substr(pos);
                break;
            }
            line += spec.template_text.substr(pos, marker - pos);
            line += "id" + std::to_string(rng.next_below(100000));
            pos = marker + 3;
        }
        log.lines.push_back(LogLine{static_cast<LineId>(i + 1), std::move(line)});
    }

    auto start = Clock::now();
    ParseResult result = execute(program, log);
    double elapsed = seconds_since(start);
    bool all_matched = result.unmatched.empty() && result.assignments.size() == total;
    report("parser-throughput (1M lines, 30 rules, <60s)", all_matched && elapsed < 60.0,
           std::to_string(elapsed) + "s, " + std::to_string(result.assignments.size()) +
               " matched");
}

// ---------------------------------------------------------------------
// 11 (optional, live): real-LLM smoke test
// ---------------------------------------------------------------------
void criterion_live_smoke() {
    const char* log_path = std::getenv("SCHEMACODER_SMOKE_LOG");
    const char* truth_path = std::getenv("SCHEMACODER_SMOKE_TRUTH");
    auto http = http_config_from_env();
    if (!http || !log_path || !truth_path) {
        std::cout << "SKIP  live-llm-smoke  (set SCHEMACODER_LLM_ENDPOINT, SCHEMACODER_LLM_MODEL, "
                     "SCHEMACODER_LLM_KEY, SCHEMACODER_SMOKE_LOG, SCHEMACODER_SMOKE_TRUTH to run)\n";
        return;
    }
    LogFile log = load_log(log_path);
    GroundTruth truth = load_ground_truth(truth_path);
    bind_ground_truth(truth, log);
    auto backend = std::make_shared<HttpBackend>(*http);
    LlmClient client(backend);
    PipelineConfig cfg;
    cfg.max_boost_iterations = 3;
    cfg.boost_period = 5;
    RunResult result = run_schemacoder(client, log, truth, "", cfg);
    report("live-llm-smoke (GA >= 0.80)", result.full_report.ga >= 0.80,
           "GA " + std::to_string(result.full_report.ga));
}

}  // namespace

int main() {
    run_criterion("metric-oracle-equivalence", criterion_metric_oracle);
    run_criterion("worked-values", criterion_worked_values);
    run_criterion("segmentation-partition", criterion_segmentation_fuzz);
    run_criterion("clustering", criterion_clustering);
    run_criterion("pca-vs-eigensolve", criterion_pca_oracle);
    run_criterion("scripted-e2e-convergence", criterion_scripted_e2e);
    run_criterion("boost-gate-monotonicity", criterion_adversarial_gate);
    run_criterion("optimizer-monotonicity+reproducibility", criterion_optimizer_repro);
    run_criterion("parser-throughput", criterion_throughput);
    run_criterion("live-llm-smoke", criterion_live_smoke);

    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
