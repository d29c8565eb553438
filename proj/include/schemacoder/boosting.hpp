#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "schemacoder/corpus.hpp"
#include "schemacoder/embedding.hpp"
#include "schemacoder/llm.hpp"
#include "schemacoder/metrics.hpp"
#include "schemacoder/optimizer.hpp"
#include "schemacoder/program.hpp"
#include "schemacoder/qtree.hpp"

namespace schemacoder {

struct ResidualSet {
    std::set<LineId> lines;
    std::vector<Chunk> residual_chunks;  // contiguous runs padded with context

    bool empty() const { return lines.empty(); }
};

// Union of the report's diagnostic sets, re-segmented into contiguous
// runs padded with up to two lines of surrounding context.
ResidualSet compute_residual(const EvalReport& report, const LogFile& log);

struct ResidualFitConfig {
    std::size_t embedding_dim = 256;
    int representatives_per_cluster = 3;  // k
    QTreeConfig qtree;
    std::uint64_t seed = 1;
};

// Clusters the residual chunks, samples k representatives per cluster and
// runs the question tree on them. Throws DegenerateError when the fragment
// fails to match any residual line even after one retry.
ParserProgram fit_residual(LlmClient& llm, const ResidualSet& residual, const LogFile& log,
                           const std::string& background, const ResidualFitConfig& cfg,
                           TraceSink* trace = nullptr, VersionCounter* versions = nullptr);

struct IntegrateOutcome {
    ParserProgram program;
    double loss = 1.0;
    bool used_fallback = false;
    bool no_op = false;  // gate could not be satisfied; program == base
};

// Eq-style ensemble update with a non-regression acceptance gate: the
// integrated parser's loss on the evaluation corpus never exceeds the
// base parser's.
IntegrateOutcome integrate(LlmClient& llm, const ParserProgram& base, const ParserProgram& fragment,
                           const GroundTruth& truth, const LogFile& log,
                           const std::string& background, int boost_iteration,
                           VersionCounter* versions = nullptr);

struct PipelineConfig {
    SegmentConfig segment;
    std::size_t embedding_dim = 256;
    std::optional<int> cluster_k;
    int representatives_per_cluster = 3;
    int residual_representatives = 3;
    QTreeConfig qtree;
    OptimizerConfig optimizer;
    int max_boost_iterations = 3;
    int boost_period = 10;
    std::uint64_t seed = 1;
};

struct HistoryRow {
    int iteration = 0;  // cumulative optimizer generation count
    std::string phase;  // init | optimize | boost
    double loss = 1.0;
};

struct ChunkReportRow {
    int chunk_id = 0;
    int cluster = 0;
    double pc1 = 0.0;
    double pc2 = 0.0;
};

struct RunResult {
    ParserProgram final_program;
    EvalReport full_report;  // final program on the full log
    std::vector<HistoryRow> history;
    std::vector<ChunkReportRow> chunk_report;
    TraceSink trace;
    std::vector<ProgressRow> optimizer_progress;
    int boost_steps_run = 0;
    double initial_loss = 1.0;
};

// When `trace_out` is given, tree trace records accumulate there even if
// the run aborts, so a partial trace survives stage-A failures.
RunResult run_schemacoder(LlmClient& llm, const LogFile& log, const GroundTruth& truth,
                          const std::string& background, const PipelineConfig& cfg,
                          TraceSink* trace_out = nullptr);

std::string history_to_csv(const std::vector<HistoryRow>& history);
std::string chunk_report_to_csv(const std::vector<ChunkReportRow>& rows);
std::string progress_to_csv(const std::vector<ProgressRow>& rows);

}  // namespace schemacoder
