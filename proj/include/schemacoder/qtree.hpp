#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "schemacoder/corpus.hpp"
#include "schemacoder/llm.hpp"
#include "schemacoder/program.hpp"

namespace schemacoder {

// Monotone program-version source shared across one pipeline run.
class VersionCounter {
public:
    explicit VersionCounter(std::int64_t start = 1) : next_(start) {}
    std::int64_t next() { return next_.fetch_add(1); }

private:
    std::atomic<std::int64_t> next_;
};

struct SegmentRef {
    int chunk_id = 0;
    LineId first_line = 0;
    LineId last_line = 0;  // inclusive, global line ids
    std::string text;      // full covered lines, joined with '\n'
};

struct QBranch {
    std::string question;
    std::vector<SegmentRef> segments;
    ParserProgram fragment;
    std::vector<std::string> raw_llm_outputs;  // per-layer transcripts
    int dropped_ungrounded = 0;
};

struct QTree {
    std::string background;
    std::vector<int> chunk_ids;
    std::vector<QBranch> branches;
};

struct TraceRecord {
    int branch = -1;  // -1 for tree-level events
    std::string layer;
    std::string input_hash;
    std::string output_hash;
};

using TraceSink = std::vector<TraceRecord>;

struct QTreeConfig {
    int breadth = 4;
    std::size_t token_limit = 4096;
    int layer_retries = 3;
    std::size_t max_output_tokens = 2048;
    double explore_temperature = 0.8;
    double layer_temperature = 0.2;
};

struct QuestionSet {
    std::vector<std::string> questions;
    bool flagged_short = false;  // fewer than `breadth` after retries
};

QuestionSet generate_questions(LlmClient& llm, const std::vector<Chunk>& chunks,
                               const std::string& background, int breadth,
                               const QTreeConfig& cfg = {});

std::vector<SegmentRef> select_segments(LlmClient& llm, const std::string& question,
                                        const std::vector<Chunk>& chunks,
                                        const std::string& background, const QTreeConfig& cfg = {},
                                        int* dropped_ungrounded = nullptr);

ParserProgram generate_pattern_fragment(LlmClient& llm, const std::string& question,
                                        const std::vector<SegmentRef>& segments,
                                        const std::string& background, const QTreeConfig& cfg = {},
                                        int branch_index = 0, VersionCounter* versions = nullptr);

struct QTreeRun {
    ParserProgram program;
    QTree tree;
    int failed_branches = 0;
};

// Runs all branches, packs fragments under the token limit, merges each
// group (LLM merge with deterministic fallback), then folds the groups
// into one program. The result is checked to still match every segment
// line the branch fragments matched.
QTreeRun run_qtree(LlmClient& llm, const std::vector<Chunk>& chunks, const std::string& background,
                   const QTreeConfig& cfg, TraceSink* trace = nullptr,
                   VersionCounter* versions = nullptr);

std::string trace_to_jsonl(const TraceSink& trace);

}  // namespace schemacoder
