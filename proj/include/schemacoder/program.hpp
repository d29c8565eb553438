#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "schemacoder/corpus.hpp"
#include "schemacoder/regex.hpp"

namespace schemacoder {

struct Provenance {
    enum class Kind { qtree_branch, merge, boost_iteration, mutation };

    Kind kind = Kind::merge;
    int index = 0;  // branch index / boost iteration / mutation generation

    std::string to_string() const;
    static Provenance from_string(std::string_view text);

    bool operator==(const Provenance&) const = default;
};

struct TemplateRule {
    std::string id;
    std::string match_pattern;  // full-line anchored
    std::string template_text;  // literal tokens and <*> placeholders
    int priority = 0;           // lower = tried first
    Provenance provenance;

    std::shared_ptr<const Regex> compiled;

    int placeholder_count() const;
};

int count_placeholders(std::string_view template_text);

// Specificity: literal characters / pattern length, in [0, 1].
double rule_specificity(const TemplateRule& rule);

struct LineageEntry {
    std::string operation;
    std::vector<std::int64_t> parents;

    bool operator==(const LineageEntry&) const = default;
};

struct ParserProgram {
    std::vector<TemplateRule> rules;  // held in execution order
    std::int64_t version = 1;
    std::vector<LineageEntry> lineage;

    bool empty() const { return rules.empty(); }
    std::size_t size() const { return rules.size(); }
    double mean_specificity() const;
};

struct LineAssignment {
    std::string template_text;
    std::vector<std::string> variables;
    std::string rule_id;
};

struct ParseResult {
    std::map<LineId, LineAssignment> assignments;
    std::set<LineId> unmatched;
    std::set<std::string> flagged_rules;  // rules that blew the step budget

    std::size_t universe_size() const { return assignments.size() + unmatched.size(); }
};

struct RuleDiagnostic {
    std::string rule_id;
    std::string reason;
};

struct CompileOptions {
    bool lenient = false;  // drop invalid rules instead of failing
};

struct CompiledDocument {
    ParserProgram program;
    std::vector<RuleDiagnostic> rejected;  // populated in lenient mode
};

// Parses and validates a JSON rule document:
//   {"version": v, "rules": [{"id", "pattern", "template", "priority", "provenance"}]}
// Throws SchemaError for malformed documents and RuleError for invalid
// rules (bad pattern, placeholder/group-count mismatch, duplicate id)
// unless options.lenient is set, in which case bad rules are dropped and
// reported in `rejected`.
CompiledDocument compile_program(std::string_view document, const CompileOptions& options = {});

// Re-establishes rule order and compiled patterns for a program assembled
// in memory. Throws RuleError on invalid rules.
ParserProgram finalize_program(ParserProgram program);

struct ExecuteOptions {
    std::int64_t step_budget_per_line = 100000;
    unsigned parallelism = 0;  // 0 = pick from hardware when the log is large
};

ParseResult execute(const ParserProgram& program, const LogFile& log, const ExecuteOptions& options = {});

// Deterministic fallback merge: keeps every distinct (pattern, template)
// pair from every part and re-prioritizes by specificity.
ParserProgram merge_programs(const std::vector<ParserProgram>& parts);

std::string serialize(const ParserProgram& program);
ParserProgram deserialize(std::string_view document);

// LogHub-style structured CSV: LineId,Content,EventTemplate,Matched.
// Unmatched lines carry their raw content as the template.
std::string parse_result_to_csv(const ParseResult& result, const LogFile& log);
void write_parse_result_csv(const ParseResult& result, const LogFile& log, const std::string& path);

}  // namespace schemacoder
