#include "schemacoder/program.hpp"

#include "schemacoder/csv.hpp"
#include "schemacoder/errors.hpp"
#include "schemacoder/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <thread>

namespace schemacoder {

using nlohmann::json;

std::string Provenance::to_string() const {
    switch (kind) {
        case Kind::qtree_branch: return "qtree_branch(" + std::to_string(index) + ")";
        case Kind::merge: return "merge";
        case Kind::boost_iteration: return "boost_iteration(" + std::to_string(index) + ")";
        case Kind::mutation: return "mutation(" + std::to_string(index) + ")";
    }
    return "merge";
}

Provenance Provenance::from_string(std::string_view text) {
    Provenance p;
    auto parse_index = [&](std::string_view prefix, Kind kind) -> bool {
        if (text.size() < prefix.size() + 2 || text.substr(0, prefix.size()) != prefix) return false;
        if (text[prefix.size()] != '(' || text.back() != ')') return false;
        std::string digits(text.substr(prefix.size() + 1, text.size() - prefix.size() - 2));
        try {
            p.index = std::stoi(digits);
        } catch (const std::exception&) {
            return false;
        }
        p.kind = kind;
        return true;
    };
    if (text == "merge") {
        p.kind = Kind::merge;
    } else if (!parse_index("qtree_branch", Kind::qtree_branch) &&
               !parse_index("boost_iteration", Kind::boost_iteration) &&
               !parse_index("mutation", Kind::mutation)) {
        p.kind = Kind::merge;
        p.index = 0;
    }
    return p;
}

int count_placeholders(std::string_view template_text) {
    int count = 0;
    std::size_t pos = 0;
    while ((pos = template_text.find("<*>", pos)) != std::string_view::npos) {
        ++count;
        pos += 3;
    }
    return count;
}

int TemplateRule::placeholder_count() const {
    return count_placeholders(template_text);
}

double rule_specificity(const TemplateRule& rule) {
    if (rule.match_pattern.empty()) return 0.0;
    int literals = rule.compiled ? rule.compiled->literal_count()
                                 : Regex::compile(rule.match_pattern).literal_count();
    return static_cast<double>(literals) / static_cast<double>(rule.match_pattern.size());
}

double ParserProgram::mean_specificity() const {
    if (rules.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& rule : rules) sum += rule_specificity(rule);
    return sum / static_cast<double>(rules.size());
}

namespace {

void compile_rule(TemplateRule& rule) {
    if (rule.template_text.empty()) {
        throw RuleError(rule.id, "template must be non-empty");
    }
    std::shared_ptr<const Regex> compiled;
    try {
        compiled = std::make_shared<const Regex>(Regex::compile(rule.match_pattern));
    } catch (const RegexSyntaxError& e) {
        throw RuleError(rule.id, std::string("bad pattern: ") + e.what());
    }
    int placeholders = rule.placeholder_count();
    if (compiled->group_count() != placeholders) {
        throw RuleError(rule.id, "pattern has " + std::to_string(compiled->group_count()) +
                                     " capture groups but template has " +
                                     std::to_string(placeholders) + " <*> placeholders");
    }
    rule.compiled = std::move(compiled);
}

void sort_rules(std::vector<TemplateRule>& rules) {
    std::stable_sort(rules.begin(), rules.end(),
                     [](const TemplateRule& a, const TemplateRule& b) { return a.priority < b.priority; });
}

}  // namespace

ParserProgram finalize_program(ParserProgram program) {
    std::set<std::string> seen;
    for (auto& rule : program.rules) {
        if (!seen.insert(rule.id).second) throw RuleError(rule.id, "duplicate rule id");
        if (!rule.compiled) compile_rule(rule);
    }
    sort_rules(program.rules);
    return program;
}

CompiledDocument compile_program(std::string_view document, const CompileOptions& options) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("rule document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("rule document must be a JSON object");
    if (!doc.contains("rules") || !doc["rules"].is_array()) {
        throw SchemaError("rule document must contain a 'rules' array");
    }

    CompiledDocument out;
    if (doc.contains("version")) {
        if (!doc["version"].is_number_integer()) throw SchemaError("'version' must be an integer");
        out.program.version = doc["version"].get<std::int64_t>();
    }
    if (doc.contains("lineage")) {
        if (!doc["lineage"].is_array()) throw SchemaError("'lineage' must be an array");
        for (const auto& entry : doc["lineage"]) {
            if (!entry.is_object() || !entry.contains("operation") || !entry.contains("parents")) {
                throw SchemaError("lineage entries need 'operation' and 'parents'");
            }
            LineageEntry le;
            le.operation = entry["operation"].get<std::string>();
            for (const auto& p : entry["parents"]) le.parents.push_back(p.get<std::int64_t>());
            out.program.lineage.push_back(std::move(le));
        }
    }

    std::set<std::string> seen_ids;
    int anon = 0;
    for (const auto& item : doc["rules"]) {
        try {
            if (!item.is_object()) throw SchemaError("rule entries must be objects");
            for (const char* field : {"pattern", "template"}) {
                if (!item.contains(field) || !item[field].is_string()) {
                    throw SchemaError(std::string("rule is missing string field '") + field + "'");
                }
            }
            TemplateRule rule;
            if (item.contains("id") && item["id"].is_string() && !item["id"].get<std::string>().empty()) {
                rule.id = item["id"].get<std::string>();
            } else {
                do {
                    rule.id = "rule_" + std::to_string(anon++);
                } while (seen_ids.count(rule.id) > 0);
            }
            rule.match_pattern = item["pattern"].get<std::string>();
            rule.template_text = item["template"].get<std::string>();
            if (item.contains("priority")) {
                if (!item["priority"].is_number_integer()) throw RuleError(rule.id, "priority must be an integer");
                rule.priority = item["priority"].get<int>();
            }
            if (item.contains("provenance") && item["provenance"].is_string()) {
                rule.provenance = Provenance::from_string(item["provenance"].get<std::string>());
            }
            if (!seen_ids.insert(rule.id).second) throw RuleError(rule.id, "duplicate rule id");
            compile_rule(rule);
            out.program.rules.push_back(std::move(rule));
        } catch (const SchemaError&) {
            if (!options.lenient) throw;
            out.rejected.push_back(RuleDiagnostic{"<malformed>", "malformed rule entry"});
        } catch (const RuleError& e) {
            if (!options.lenient) throw;
            out.rejected.push_back(RuleDiagnostic{e.rule_id(), e.reason()});
        }
    }
    sort_rules(out.program.rules);
    return out;
}

namespace {

void execute_range(const ParserProgram& program, const LogFile& log, std::size_t begin, std::size_t end,
                   std::int64_t budget_per_line, std::vector<int>* rule_hits,
                   std::vector<std::string>* flagged) {
    std::vector<std::string> captures;
    for (std::size_t i = begin; i < end; ++i) {
        const std::string& content = log.lines[i].content;
        std::int64_t budget = budget_per_line;
        int hit = -1;
        for (std::size_t r = 0; r < program.rules.size(); ++r) {
            auto outcome = program.rules[r].compiled->full_match(content, &captures, budget);
            if (outcome.matched) {
                hit = static_cast<int>(r);
                break;
            }
            if (outcome.step_limit_hit) {
                flagged->push_back(program.rules[r].id);
                break;  // budget for this line is spent
            }
        }
        (*rule_hits)[i] = hit;
    }
}

}  // namespace

ParseResult execute(const ParserProgram& program, const LogFile& log, const ExecuteOptions& options) {
    const std::size_t n = log.lines.size();
    std::vector<int> rule_hits(n, -1);
    ParseResult result;

    unsigned workers = options.parallelism;
    if (workers == 0) {
        workers = n >= 200000 ? std::max(1u, std::thread::hardware_concurrency()) : 1;
    }
    workers = std::min<unsigned>(workers, 16);
    if (workers <= 1 || n < 2 * workers) {
        std::vector<std::string> flagged;
        execute_range(program, log, 0, n, options.step_budget_per_line, &rule_hits, &flagged);
        result.flagged_rules.insert(flagged.begin(), flagged.end());
    } else {
        std::vector<std::vector<std::string>> flagged(workers);
        std::vector<std::thread> threads;
        std::size_t per = (n + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            std::size_t begin = w * per;
            std::size_t end = std::min(n, begin + per);
            if (begin >= end) break;
            threads.emplace_back(execute_range, std::cref(program), std::cref(log), begin, end,
                                 options.step_budget_per_line, &rule_hits, &flagged[w]);
        }
        for (auto& t : threads) t.join();
        for (const auto& f : flagged) result.flagged_rules.insert(f.begin(), f.end());
    }

    std::vector<std::string> captures;
    for (std::size_t i = 0; i < n; ++i) {
        LineId id = log.lines[i].id;
        int hit = rule_hits[i];
        if (hit < 0) {
            result.unmatched.insert(id);
            continue;
        }
        const TemplateRule& rule = program.rules[static_cast<std::size_t>(hit)];
        std::int64_t budget = options.step_budget_per_line;
        rule.compiled->full_match(log.lines[i].content, &captures, budget);
        LineAssignment assignment;
        assignment.template_text = rule.template_text;
        assignment.variables = captures;
        assignment.rule_id = rule.id;
        result.assignments.emplace(id, std::move(assignment));
    }
    return result;
}

ParserProgram merge_programs(const std::vector<ParserProgram>& parts) {
    if (parts.empty()) throw std::invalid_argument("merge_programs: parts must be non-empty");

    struct Entry {
        TemplateRule rule;
        double specificity;
        std::size_t original;
    };
    std::vector<Entry> entries;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t idx = 0;
    for (const auto& part : parts) {
        for (const auto& rule : part.rules) {
            if (!seen.emplace(rule.match_pattern, rule.template_text).second) {
                ++idx;
                continue;
            }
            entries.push_back(Entry{rule, rule_specificity(rule), idx++});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.specificity != b.specificity) return a.specificity > b.specificity;
        if (a.rule.match_pattern.size() != b.rule.match_pattern.size()) {
            return a.rule.match_pattern.size() > b.rule.match_pattern.size();
        }
        if (a.rule.match_pattern != b.rule.match_pattern) {
            return a.rule.match_pattern < b.rule.match_pattern;
        }
        return a.original < b.original;
    });

    ParserProgram merged;
    std::set<std::string> used_ids;
    int priority = 0;
    for (auto& entry : entries) {
        TemplateRule rule = std::move(entry.rule);
        rule.priority = priority++;
        std::string base = rule.id.empty() ? "rule" : rule.id;
        std::string candidate = base;
        int suffix = 1;
        while (!used_ids.insert(candidate).second) {
            candidate = base + "_" + std::to_string(++suffix);
        }
        rule.id = candidate;
        merged.rules.push_back(std::move(rule));
    }

    LineageEntry lineage;
    lineage.operation = "merge";
    std::int64_t max_version = 0;
    for (const auto& part : parts) {
        lineage.parents.push_back(part.version);
        max_version = std::max(max_version, part.version);
    }
    for (const auto& part : parts) {
        for (const auto& entry : part.lineage) merged.lineage.push_back(entry);
    }
    merged.lineage.push_back(std::move(lineage));
    merged.version = max_version + 1;
    return merged;
}

std::string serialize(const ParserProgram& program) {
    json doc;
    doc["version"] = program.version;
    json rules = json::array();
    for (const auto& rule : program.rules) {
        json r;
        r["id"] = rule.id;
        r["pattern"] = rule.match_pattern;
        r["template"] = rule.template_text;
        r["priority"] = rule.priority;
        r["provenance"] = rule.provenance.to_string();
        rules.push_back(std::move(r));
    }
    doc["rules"] = std::move(rules);
    json lineage = json::array();
    for (const auto& entry : program.lineage) {
        json e;
        e["operation"] = entry.operation;
        e["parents"] = entry.parents;
        lineage.push_back(std::move(e));
    }
    doc["lineage"] = std::move(lineage);
    return doc.dump(2);
}

ParserProgram deserialize(std::string_view document) {
    return compile_program(document).program;
}

std::string parse_result_to_csv(const ParseResult& result, const LogFile& log) {
    std::string out = "LineId,Content,EventTemplate,Matched\n";
    for (const auto& line : log.lines) {
        std::vector<std::string> fields;
        fields.push_back(std::to_string(line.id));
        fields.push_back(line.content);
        auto it = result.assignments.find(line.id);
        if (it != result.assignments.end()) {
            fields.push_back(it->second.template_text);
            fields.push_back("true");
        } else {
            fields.push_back(line.content);
            fields.push_back("false");
        }
        out += csv_join(fields);
        out.push_back('\n');
    }
    return out;
}

void write_parse_result_csv(const ParseResult& result, const LogFile& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write csv: " + path);
    out << parse_result_to_csv(result, log);
    if (!out) throw IoError("write failure: " + path);
}

}  // namespace schemacoder
