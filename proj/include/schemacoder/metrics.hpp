#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "schemacoder/corpus.hpp"
#include "schemacoder/program.hpp"

namespace schemacoder {

// Lines grouped by template identity. Unmatched lines form singleton
// groups with per-line keys so they never merge.
struct Grouping {
    std::map<std::string, std::set<LineId>> groups;
    std::map<LineId, std::string> line_to_key;
    // Normalized template string per key; empty for unmatched singletons.
    std::map<std::string, std::string> key_template;
};

struct TemplateVerdict {
    bool group_correct = false;
    bool template_correct = false;
    std::size_t member_count = 0;
};

struct EvalReport {
    double ga = 0.0;
    double pa = 0.0;
    double fga = 0.0;
    double fta = 0.0;
    double loss = 1.0;
    std::set<LineId> misgrouped_lines;
    std::set<LineId> template_mismatch_lines;
    std::set<LineId> unmatched_lines;
    std::map<std::string, TemplateVerdict> per_template_verdicts;
    // Predicted template for every matched line in a diagnostic set; feeds
    // the textual feedback exemplars.
    std::map<LineId, std::string> diagnostic_predicted;

    bool perfect() const { return loss == 0.0; }
};

Grouping to_grouping(const ParseResult& result, const LogFile& log);
Grouping to_grouping(const GroundTruth& truth);

double grouping_accuracy(const Grouping& pred, const Grouping& truth);
double parsing_accuracy(const ParseResult& pred, const GroundTruth& truth);
double fga(const Grouping& pred, const Grouping& truth);
double fta(const Grouping& pred, const Grouping& truth);

EvalReport evaluate(const ParseResult& pred, const GroundTruth& truth, const LogFile& log);

std::string eval_report_to_json(const EvalReport& report);

// One-line summary: "GA PA FGA FTA LOSS" with four decimals.
std::string eval_summary_line(const EvalReport& report);

}  // namespace schemacoder
