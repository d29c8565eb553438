#include "schemacoder/metrics.hpp"

#include "schemacoder/errors.hpp"
#include "schemacoder/util.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>

namespace schemacoder {

using nlohmann::json;

namespace {

std::string unmatched_key(LineId id) {
    return "\x01unmatched:" + std::to_string(id);
}

void check_universe(const std::set<LineId>& pred_ids, const std::set<LineId>& truth_ids) {
    if (pred_ids != truth_ids) {
        throw UniverseMismatch("prediction covers " + std::to_string(pred_ids.size()) +
                               " lines, ground truth covers " + std::to_string(truth_ids.size()) +
                               " and the id sets differ");
    }
}

std::set<LineId> grouping_ids(const Grouping& g) {
    std::set<LineId> ids;
    for (const auto& [id, key] : g.line_to_key) {
        (void)key;
        ids.insert(id);
    }
    return ids;
}

}  // namespace

Grouping to_grouping(const ParseResult& result, const LogFile& log) {
    Grouping g;
    for (const auto& [id, assignment] : result.assignments) {
        std::string key = normalize_whitespace(assignment.template_text);
        g.groups[key].insert(id);
        g.line_to_key[id] = key;
        g.key_template[key] = key;
    }
    for (LineId id : result.unmatched) {
        std::string key = unmatched_key(id);
        (void)log;
        g.groups[key].insert(id);
        g.line_to_key[id] = key;
        g.key_template[key] = "";
    }
    return g;
}

Grouping to_grouping(const GroundTruth& truth) {
    Grouping g;
    for (const auto& [id, template_text] : truth.templates) {
        std::string key = normalize_whitespace(template_text);
        g.groups[key].insert(id);
        g.line_to_key[id] = key;
        g.key_template[key] = key;
    }
    return g;
}

double grouping_accuracy(const Grouping& pred, const Grouping& truth) {
    check_universe(grouping_ids(pred), grouping_ids(truth));
    if (pred.line_to_key.empty()) return 1.0;
    std::size_t correct = 0;
    for (const auto& [id, key] : pred.line_to_key) {
        const auto& pred_members = pred.groups.at(key);
        const auto& truth_members = truth.groups.at(truth.line_to_key.at(id));
        if (pred_members == truth_members) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.line_to_key.size());
}

double parsing_accuracy(const ParseResult& pred, const GroundTruth& truth) {
    std::set<LineId> pred_ids;
    for (const auto& [id, a] : pred.assignments) {
        (void)a;
        pred_ids.insert(id);
    }
    pred_ids.insert(pred.unmatched.begin(), pred.unmatched.end());
    std::set<LineId> truth_ids;
    for (const auto& [id, t] : truth.templates) {
        (void)t;
        truth_ids.insert(id);
    }
    check_universe(pred_ids, truth_ids);
    if (truth_ids.empty()) return 1.0;

    std::size_t correct = 0;
    for (const auto& [id, assignment] : pred.assignments) {
        if (normalize_whitespace(assignment.template_text) ==
            normalize_whitespace(truth.templates.at(id))) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(truth_ids.size());
}

namespace {

double group_f1(const Grouping& pred, const Grouping& truth, bool require_template_equality) {
    check_universe(grouping_ids(pred), grouping_ids(truth));
    if (pred.groups.empty() && truth.groups.empty()) return 1.0;
    if (pred.groups.empty() || truth.groups.empty()) return 0.0;

    std::size_t correct = 0;
    for (const auto& [key, members] : pred.groups) {
        // A predicted group is correct iff some truth group has the same
        // member set; template equality is additionally required for FTA.
        LineId probe = *members.begin();
        const std::string& truth_key = truth.line_to_key.at(probe);
        if (truth.groups.at(truth_key) != members) continue;
        if (require_template_equality) {
            auto it = pred.key_template.find(key);
            const std::string& pred_template = it != pred.key_template.end() ? it->second : key;
            if (pred_template != truth_key) continue;
        }
        ++correct;
    }
    double precision = static_cast<double>(correct) / static_cast<double>(pred.groups.size());
    double recall = static_cast<double>(correct) / static_cast<double>(truth.groups.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double fga(const Grouping& pred, const Grouping& truth) {
    return group_f1(pred, truth, false);
}

double fta(const Grouping& pred, const Grouping& truth) {
    return group_f1(pred, truth, true);
}

EvalReport evaluate(const ParseResult& pred, const GroundTruth& truth, const LogFile& log) {
    Grouping pred_grouping = to_grouping(pred, log);
    Grouping truth_grouping = to_grouping(truth);

    EvalReport report;
    report.ga = grouping_accuracy(pred_grouping, truth_grouping);
    report.pa = parsing_accuracy(pred, truth);
    report.fga = fga(pred_grouping, truth_grouping);
    report.fta = fta(pred_grouping, truth_grouping);
    report.loss = 1.0 - (report.ga + report.pa + report.fga + report.fta) / 4.0;

    report.unmatched_lines = pred.unmatched;
    for (const auto& [id, key] : pred_grouping.line_to_key) {
        const auto& pred_members = pred_grouping.groups.at(key);
        const auto& truth_members = truth_grouping.groups.at(truth_grouping.line_to_key.at(id));
        if (pred_members != truth_members) report.misgrouped_lines.insert(id);
    }
    for (const auto& [id, assignment] : pred.assignments) {
        if (normalize_whitespace(assignment.template_text) !=
            normalize_whitespace(truth.templates.at(id))) {
            report.template_mismatch_lines.insert(id);
        }
    }
    for (const auto& [id, assignment] : pred.assignments) {
        if (report.template_mismatch_lines.count(id) || report.misgrouped_lines.count(id)) {
            report.diagnostic_predicted[id] = assignment.template_text;
        }
    }

    for (const auto& [key, members] : pred_grouping.groups) {
        TemplateVerdict verdict;
        verdict.member_count = members.size();
        LineId probe = *members.begin();
        const std::string& truth_key = truth_grouping.line_to_key.at(probe);
        verdict.group_correct = truth_grouping.groups.at(truth_key) == members;
        auto it = pred_grouping.key_template.find(key);
        const std::string& pred_template = it != pred_grouping.key_template.end() ? it->second : key;
        verdict.template_correct = verdict.group_correct && pred_template == truth_key;
        report.per_template_verdicts.emplace(key, verdict);
    }
    return report;
}

std::string eval_summary_line(const EvalReport& report) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.4f %.4f %.4f %.4f %.4f", report.ga, report.pa, report.fga,
                  report.fta, report.loss);
    return buf;
}

std::string eval_report_to_json(const EvalReport& report) {
    json doc;
    doc["ga"] = report.ga;
    doc["pa"] = report.pa;
    doc["fga"] = report.fga;
    doc["fta"] = report.fta;
    doc["loss"] = report.loss;
    doc["misgrouped_lines"] = report.misgrouped_lines;
    doc["template_mismatch_lines"] = report.template_mismatch_lines;
    doc["unmatched_lines"] = report.unmatched_lines;
    json verdicts = json::object();
    for (const auto& [key, verdict] : report.per_template_verdicts) {
        json v;
        v["group_correct"] = verdict.group_correct;
        v["template_correct"] = verdict.template_correct;
        v["member_count"] = verdict.member_count;
        verdicts[key] = std::move(v);
    }
    doc["per_template_verdicts"] = std::move(verdicts);
    return doc.dump(2);
}

}  // namespace schemacoder
