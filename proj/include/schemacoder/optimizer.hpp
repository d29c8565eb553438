#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "schemacoder/corpus.hpp"
#include "schemacoder/llm.hpp"
#include "schemacoder/metrics.hpp"
#include "schemacoder/program.hpp"
#include "schemacoder/qtree.hpp"

namespace schemacoder {

struct Descriptor {
    int rule_bucket = 0;  // {1-2, 3-5, 6-10, 11-20, 21+}
    int specificity_bucket = 0;  // mean-specificity quintile

    auto operator<=>(const Descriptor&) const = default;
};

Descriptor describe_program(const ParserProgram& program);

struct Candidate {
    ParserProgram program;
    double score = 0.0;  // 1 - loss
    EvalReport report;
    Descriptor descriptor;
    int island = 0;
    int generation = 0;
};

class EliteArchive {
public:
    // Returns true when the candidate took the cell (strictly higher score;
    // ties keep the earlier occupant).
    bool insert(Candidate candidate);

    const Candidate* best() const;
    const std::map<Descriptor, Candidate>& grid() const { return grid_; }
    std::size_t size() const { return grid_.size(); }

private:
    std::map<Descriptor, Candidate> grid_;
};

struct FeedbackExemplar {
    LineId line_id = 0;
    std::string content;
    std::string predicted;  // "UNMATCHED" for unmatched lines
    std::string expected;
    std::string category;   // unmatched | template_mismatch | misgrouped
};

struct TextualFeedback {
    std::string summary;
    std::vector<FeedbackExemplar> exemplars;

    std::string to_text() const;
};

TextualFeedback build_feedback(const EvalReport& report, const GroundTruth& truth,
                               const LogFile& log, std::size_t cap, std::uint64_t seed = 0);

struct OptimizerConfig {
    int islands = 4;
    int generations = 10;
    int migrate_every = 5;
    std::uint64_t seed = 1;
    std::size_t feedback_cap = 20;
    std::size_t eval_line_limit = 50000;
    double mutate_temperature = 0.7;
    std::size_t max_output_tokens = 4096;
};

// Renders the mutate prompt and parses the reply; an unusable reply falls
// back to a deterministic mutation so a child always exists.
ParserProgram mutate(LlmClient& llm, const ParserProgram& parent, const TextualFeedback& feedback,
                     const std::string& background, const OptimizerConfig& cfg, int generation,
                     VersionCounter* versions = nullptr);

struct ProgressRow {
    int generation = 0;
    int island = 0;
    double best_score = 0.0;
    double loss = 0.0;
};

struct MigrationEvent {
    int generation = 0;
    std::vector<int> from_islands;  // ring order
};

class Evolution {
public:
    Evolution(LlmClient& llm, ParserProgram initial, const GroundTruth& truth, const LogFile& log,
              OptimizerConfig cfg, std::string background, VersionCounter* versions = nullptr);

    void step_generation();
    int generation() const { return generation_; }

    const Candidate& global_best() const { return global_best_; }
    Candidate evaluate_program(const ParserProgram& program) const;

    // Archive-inserts an externally produced program into every island and
    // refreshes the global best (used by the boosting loop).
    void inject(const ParserProgram& program);

    const LogFile& eval_log() const { return eval_log_; }
    const GroundTruth& eval_truth() const { return eval_truth_; }
    const std::vector<ProgressRow>& progress() const { return progress_; }
    const std::vector<MigrationEvent>& migrations() const { return migrations_; }

private:
    void migrate();

    LlmClient& llm_;
    OptimizerConfig cfg_;
    std::string background_;
    VersionCounter* versions_;
    VersionCounter local_versions_;

    LogFile eval_log_;
    GroundTruth eval_truth_;

    std::vector<EliteArchive> islands_;
    Candidate global_best_;
    int generation_ = 0;
    SplitMix64 rng_;
    std::vector<ProgressRow> progress_;
    std::vector<MigrationEvent> migrations_;
};

// One-shot: seeds islands with `initial`, runs cfg.generations, returns
// the global best (scored on the evaluation corpus).
Candidate evolve(LlmClient& llm, const ParserProgram& initial, const GroundTruth& truth,
                 const LogFile& log, const OptimizerConfig& cfg, const std::string& background = "",
                 VersionCounter* versions = nullptr, std::vector<ProgressRow>* progress = nullptr);

// Deterministic evaluation subsample: identity when the log fits the
// limit, otherwise a seeded sorted line sample reindexed from 1.
std::pair<LogFile, GroundTruth> make_eval_corpus(const LogFile& log, const GroundTruth& truth,
                                                 std::size_t limit, std::uint64_t seed);

}  // namespace schemacoder
