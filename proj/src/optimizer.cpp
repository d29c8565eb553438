#include "schemacoder/optimizer.hpp"

#include "schemacoder/errors.hpp"
#include "schemacoder/util.hpp"

#include <algorithm>
#include <cstdio>

namespace schemacoder {

namespace {

std::string extract_rule_document(const std::string& reply) {
    std::size_t start = reply.find('{');
    if (start == std::string::npos) return "";
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < reply.size(); ++i) {
        char c = reply[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) return reply.substr(start, i - start + 1);
        }
    }
    return "";
}

std::string escape_literal(const std::string& text) {
    static const std::string specials = "\\^$.|?*+()[]{}";
    std::string out;
    out.reserve(text.size() + 8);
    for (char c : text) {
        if (specials.find(c) != std::string::npos) out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

Descriptor describe_program(const ParserProgram& program) {
    Descriptor d;
    std::size_t n = program.rules.size();
    if (n <= 2) {
        d.rule_bucket = 0;
    } else if (n <= 5) {
        d.rule_bucket = 1;
    } else if (n <= 10) {
        d.rule_bucket = 2;
    } else if (n <= 20) {
        d.rule_bucket = 3;
    } else {
        d.rule_bucket = 4;
    }
    double spec = program.mean_specificity();
    int bucket = static_cast<int>(spec * 5.0);
    d.specificity_bucket = std::clamp(bucket, 0, 4);
    return d;
}

bool EliteArchive::insert(Candidate candidate) {
    auto it = grid_.find(candidate.descriptor);
    if (it == grid_.end()) {
        grid_.emplace(candidate.descriptor, std::move(candidate));
        return true;
    }
    if (candidate.score > it->second.score) {
        it->second = std::move(candidate);
        return true;
    }
    return false;  // ties keep the earlier candidate
}

const Candidate* EliteArchive::best() const {
    const Candidate* best = nullptr;
    for (const auto& [descriptor, candidate] : grid_) {
        (void)descriptor;
        if (!best || candidate.score > best->score) best = &candidate;
    }
    return best;
}

std::string TextualFeedback::to_text() const {
    std::string out = summary;
    for (const auto& exemplar : exemplars) {
        out += "\nline " + std::to_string(exemplar.line_id) + " [" + exemplar.category + "]\n";
        out += "  content:   " + exemplar.content + "\n";
        out += "  predicted: " + exemplar.predicted + "\n";
        out += "  expected:  " + exemplar.expected;
    }
    return out;
}

TextualFeedback build_feedback(const EvalReport& report, const GroundTruth& truth,
                               const LogFile& log, std::size_t cap, std::uint64_t seed) {
    if (cap < 1) throw std::invalid_argument("build_feedback: cap must be >= 1");

    TextualFeedback feedback;
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "GA=%.4f PA=%.4f FGA=%.4f FTA=%.4f loss=%.4f | unmatched=%zu "
                  "template_mismatch=%zu misgrouped=%zu",
                  report.ga, report.pa, report.fga, report.fta, report.loss,
                  report.unmatched_lines.size(), report.template_mismatch_lines.size(),
                  report.misgrouped_lines.size());
    feedback.summary = buf;

    struct Category {
        const char* name;
        std::vector<LineId> lines;
    };
    std::set<LineId> taken;
    std::vector<Category> categories(3);
    categories[0].name = "unmatched";
    for (LineId id : report.unmatched_lines) {
        categories[0].lines.push_back(id);
        taken.insert(id);
    }
    categories[1].name = "template_mismatch";
    for (LineId id : report.template_mismatch_lines) {
        if (taken.insert(id).second) categories[1].lines.push_back(id);
    }
    categories[2].name = "misgrouped";
    for (LineId id : report.misgrouped_lines) {
        if (taken.insert(id).second) categories[2].lines.push_back(id);
    }

    std::size_t remaining = cap;
    for (std::size_t ci = 0; ci < categories.size() && remaining > 0; ++ci) {
        auto& category = categories[ci];
        std::vector<LineId> picked;
        if (category.lines.size() <= remaining) {
            picked = category.lines;
        } else {
            // Seeded stride subsample.
            std::size_t n = category.lines.size();
            std::size_t stride = n / remaining;
            SplitMix64 rng(seed ^ (0x1000193u * (ci + 1)));
            std::size_t offset = rng.next_below(stride);
            for (std::size_t i = 0; i < remaining; ++i) picked.push_back(category.lines[offset + i * stride]);
        }
        for (LineId id : picked) {
            FeedbackExemplar exemplar;
            exemplar.line_id = id;
            exemplar.content = log.content_of(id);
            exemplar.category = category.name;
            exemplar.expected = truth.templates.count(id) ? truth.templates.at(id) : "";
            auto predicted = report.diagnostic_predicted.find(id);
            exemplar.predicted =
                predicted != report.diagnostic_predicted.end() ? predicted->second : "UNMATCHED";
            feedback.exemplars.push_back(std::move(exemplar));
        }
        remaining -= picked.size();
    }
    return feedback;
}

ParserProgram mutate(LlmClient& llm, const ParserProgram& parent, const TextualFeedback& feedback,
                     const std::string& background, const OptimizerConfig& cfg, int generation,
                     VersionCounter* versions) {
    CompletionRequest request;
    request.purpose = PromptId::mutate;
    request.temperature = cfg.mutate_temperature;
    request.max_output_tokens = cfg.max_output_tokens;
    request.prompt = render_prompt(PromptId::mutate, {{"background", background},
                                                      {"parent", serialize(parent)},
                                                      {"feedback", feedback.to_text()}});

    ParserProgram child;
    bool have_child = false;
    try {
        std::string reply = llm.complete(request);
        std::string payload = extract_rule_document(reply);
        if (!payload.empty()) {
            CompiledDocument doc = compile_program(payload, CompileOptions{.lenient = true});
            if (!doc.program.rules.empty()) {
                child = std::move(doc.program);
                have_child = true;
            }
        }
    } catch (const BackendError&) {
    } catch (const SchemaError&) {
    }

    if (!have_child) {
        // Deterministic fallback mutation.
        child = parent;
        const FeedbackExemplar* unmatched = nullptr;
        const FeedbackExemplar* mismatched = nullptr;
        for (const auto& exemplar : feedback.exemplars) {
            if (!unmatched && exemplar.category == "unmatched") unmatched = &exemplar;
            if (!mismatched && exemplar.category == "template_mismatch") mismatched = &exemplar;
        }
        if (unmatched) {
            // Append a literal rule that claims exactly this line.
            TemplateRule rule;
            rule.id = "fallback_g" + std::to_string(generation);
            rule.match_pattern = escape_literal(unmatched->content);
            rule.template_text = unmatched->content;
            int max_priority = 0;
            for (const auto& r : child.rules) max_priority = std::max(max_priority, r.priority);
            rule.priority = max_priority + 1;
            rule.provenance = Provenance{Provenance::Kind::mutation, generation};
            std::set<std::string> ids;
            for (const auto& r : child.rules) ids.insert(r.id);
            while (ids.count(rule.id)) rule.id += "x";
            child.rules.push_back(std::move(rule));
        } else if (mismatched && !child.rules.empty()) {
            // Duplicate the rule that owns the mismatched exemplar and
            // generalize its last literal token into a variable.
            std::size_t target = 0;
            for (std::size_t r = 0; r < child.rules.size(); ++r) {
                if (child.rules[r].template_text == mismatched->predicted) {
                    target = r;
                    break;
                }
            }
            TemplateRule dup = child.rules[target];
            std::vector<std::string> tokens;
            {
                std::string token;
                for (char c : dup.template_text) {
                    if (c == ' ') {
                        tokens.push_back(token);
                        token.clear();
                    } else {
                        token.push_back(c);
                    }
                }
                tokens.push_back(token);
            }
            bool generalized = false;
            for (std::size_t t = tokens.size(); t-- > 0;) {
                if (tokens[t] == "<*>" || tokens[t].empty()) continue;
                std::string escaped = escape_literal(tokens[t]);
                std::size_t at = dup.match_pattern.rfind(escaped);
                if (at == std::string::npos) break;
                dup.match_pattern.replace(at, escaped.size(), "(\\S+)");
                tokens[t] = "<*>";
                std::string rebuilt;
                for (std::size_t k = 0; k < tokens.size(); ++k) {
                    if (k > 0) rebuilt.push_back(' ');
                    rebuilt += tokens[k];
                }
                dup.template_text = rebuilt;
                generalized = true;
                break;
            }
            if (generalized) {
                dup.id += "_gen" + std::to_string(generation);
                dup.compiled.reset();
                dup.provenance = Provenance{Provenance::Kind::mutation, generation};
                std::set<std::string> ids;
                for (const auto& r : child.rules) ids.insert(r.id);
                while (ids.count(dup.id)) dup.id += "x";
                child.rules.push_back(std::move(dup));
            }
        }
        // With no exemplars the child is a structural copy of the parent.
    }

    for (auto& rule : child.rules) {
        if (!rule.compiled) {
            try {
                Regex compiled = Regex::compile(rule.match_pattern);
                rule.compiled = std::make_shared<const Regex>(std::move(compiled));
            } catch (const RegexSyntaxError&) {
            }
        }
    }
    // Drop anything that still fails to compile (possible in fallback paths).
    std::vector<TemplateRule> kept;
    for (auto& rule : child.rules) {
        if (rule.compiled &&
            rule.compiled->group_count() == rule.placeholder_count() && !rule.template_text.empty()) {
            kept.push_back(std::move(rule));
        }
    }
    child.rules = std::move(kept);
    if (child.rules.empty()) child = parent;

    child.version = versions ? versions->next() : parent.version + 1;
    child.lineage = parent.lineage;
    child.lineage.push_back(LineageEntry{"mutate", {parent.version}});
    try {
        ParserProgram finalized = finalize_program(std::move(child));
        return finalized;
    } catch (const RuleError&) {
        ParserProgram copy = parent;
        copy.version = versions ? versions->next() : parent.version + 1;
        copy.lineage.push_back(LineageEntry{"mutate", {parent.version}});
        return copy;
    }
}

std::pair<LogFile, GroundTruth> make_eval_corpus(const LogFile& log, const GroundTruth& truth,
                                                 std::size_t limit, std::uint64_t seed) {
    if (log.lines.size() <= limit) return {log, truth};

    // Floyd's algorithm for a uniform sample without replacement.
    SplitMix64 rng(seed ^ 0x7e46a1c3u);
    std::set<std::size_t> picks;
    const std::size_t n = log.lines.size();
    for (std::size_t j = n - limit; j < n; ++j) {
        std::size_t t = rng.next_below(j + 1);
        if (!picks.insert(t).second) picks.insert(j);
    }

    LogFile sub;
    sub.source_path = log.source_path + "#sample";
    GroundTruth sub_truth;
    LineId next_id = 1;
    for (std::size_t index : picks) {
        const LogLine& line = log.lines[index];
        sub.lines.push_back(LogLine{next_id, line.content});
        auto it = truth.templates.find(line.id);
        if (it != truth.templates.end()) sub_truth.templates[next_id] = it->second;
        ++next_id;
    }
    return {std::move(sub), std::move(sub_truth)};
}

Evolution::Evolution(LlmClient& llm, ParserProgram initial, const GroundTruth& truth,
                     const LogFile& log, OptimizerConfig cfg, std::string background,
                     VersionCounter* versions)
    : llm_(llm),
      cfg_(cfg),
      background_(std::move(background)),
      versions_(versions),
      local_versions_(initial.version + 1),
      rng_(cfg.seed) {
    if (cfg_.islands < 1) throw std::invalid_argument("Evolution: islands must be >= 1");
    if (!versions_) versions_ = &local_versions_;

    auto [eval_log, eval_truth] = make_eval_corpus(log, truth, cfg_.eval_line_limit, cfg_.seed);
    eval_log_ = std::move(eval_log);
    eval_truth_ = std::move(eval_truth);

    islands_.resize(static_cast<std::size_t>(cfg_.islands));
    Candidate seed_candidate = evaluate_program(initial);
    global_best_ = seed_candidate;
    for (int i = 0; i < cfg_.islands; ++i) {
        Candidate copy = seed_candidate;
        copy.island = i;
        islands_[static_cast<std::size_t>(i)].insert(std::move(copy));
    }
}

Candidate Evolution::evaluate_program(const ParserProgram& program) const {
    Candidate candidate;
    candidate.program = program;
    ParseResult result = execute(program, eval_log_);
    candidate.report = evaluate(result, eval_truth_, eval_log_);
    candidate.score = 1.0 - candidate.report.loss;
    candidate.descriptor = describe_program(program);
    candidate.generation = generation_;
    return candidate;
}

void Evolution::step_generation() {
    ++generation_;
    for (int island = 0; island < cfg_.islands; ++island) {
        EliteArchive& archive = islands_[static_cast<std::size_t>(island)];
        // Exploratory parent choice: uniform over occupied cells.
        const auto& grid = archive.grid();
        std::size_t pick = rng_.next_below(grid.size());
        auto it = grid.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(pick));
        const Candidate& parent = it->second;

        TextualFeedback feedback = build_feedback(parent.report, eval_truth_, eval_log_,
                                                  cfg_.feedback_cap, cfg_.seed ^ rng_.next());
        ParserProgram child_program =
            mutate(llm_, parent.program, feedback, background_, cfg_, generation_, versions_);
        Candidate child = evaluate_program(child_program);
        child.island = island;
        child.generation = generation_;
        archive.insert(std::move(child));

        const Candidate* island_best = archive.best();
        if (island_best && island_best->score > global_best_.score) global_best_ = *island_best;
        progress_.push_back(ProgressRow{generation_, island, global_best_.score,
                                        1.0 - global_best_.score});
    }
    if (cfg_.migrate_every > 0 && generation_ % cfg_.migrate_every == 0 && cfg_.islands > 1) {
        migrate();
    }
}

void Evolution::migrate() {
    MigrationEvent event;
    event.generation = generation_;
    std::vector<Candidate> outgoing;
    outgoing.reserve(static_cast<std::size_t>(cfg_.islands));
    for (int i = 0; i < cfg_.islands; ++i) {
        const Candidate* best = islands_[static_cast<std::size_t>(i)].best();
        outgoing.push_back(best ? *best : global_best_);
        event.from_islands.push_back(i);
    }
    for (int i = 0; i < cfg_.islands; ++i) {
        int target = (i + 1) % cfg_.islands;
        Candidate migrant = outgoing[static_cast<std::size_t>(i)];
        migrant.island = target;
        islands_[static_cast<std::size_t>(target)].insert(std::move(migrant));
    }
    migrations_.push_back(std::move(event));
}

void Evolution::inject(const ParserProgram& program) {
    Candidate candidate = evaluate_program(program);
    for (int i = 0; i < cfg_.islands; ++i) {
        Candidate copy = candidate;
        copy.island = i;
        islands_[static_cast<std::size_t>(i)].insert(std::move(copy));
    }
    if (candidate.score > global_best_.score) global_best_ = candidate;
}

Candidate evolve(LlmClient& llm, const ParserProgram& initial, const GroundTruth& truth,
                 const LogFile& log, const OptimizerConfig& cfg, const std::string& background,
                 VersionCounter* versions, std::vector<ProgressRow>* progress) {
    if (cfg.generations < 1) throw std::invalid_argument("evolve: generations must be >= 1");
    Evolution evolution(llm, initial, truth, log, cfg, background, versions);
    for (int g = 0; g < cfg.generations; ++g) evolution.step_generation();
    if (progress) *progress = evolution.progress();
    return evolution.global_best();
}

}  // namespace schemacoder
