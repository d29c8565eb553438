#include "schemacoder/qtree.hpp"

#include "schemacoder/errors.hpp"
#include "schemacoder/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <set>

namespace schemacoder {

using nlohmann::json;

namespace {

std::string format_chunks(const std::vector<Chunk>& chunks) {
    std::string out;
    for (const auto& chunk : chunks) {
        out += "--- chunk " + std::to_string(chunk.id) + " ---\n";
        out += chunk.text;
        out.push_back('\n');
    }
    return out;
}

// Pulls the first JSON value out of a reply that may wrap it in markdown
// fences or prose.
std::string extract_json_payload(const std::string& reply, char open, char close) {
    std::size_t start = reply.find(open);
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
        } else if (c == open) {
            ++depth;
        } else if (c == close) {
            --depth;
            if (depth == 0) return reply.substr(start, i - start + 1);
        }
    }
    return "";
}

std::vector<std::string> parse_question_lines(const std::string& reply) {
    std::vector<std::string> questions;
    for (const std::string& raw : split_lines(reply)) {
        std::string line = trim(raw);
        if (line.empty()) continue;
        // Strip list markers: "3.", "2)", "-", "*".
        std::size_t pos = 0;
        while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
        if (pos > 0 && pos < line.size() && (line[pos] == '.' || line[pos] == ')')) {
            line = trim(line.substr(pos + 1));
        } else if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
            line = trim(line.substr(1));
        }
        if (!line.empty() && line.find('?') != std::string::npos) questions.push_back(line);
    }
    return questions;
}

}  // namespace

QuestionSet generate_questions(LlmClient& llm, const std::vector<Chunk>& chunks,
                               const std::string& background, int breadth,
                               const QTreeConfig& cfg) {
    if (chunks.empty()) throw std::invalid_argument("generate_questions: need at least one chunk");
    if (breadth < 1) throw std::invalid_argument("generate_questions: breadth must be >= 1");

    CompletionRequest request;
    request.purpose = PromptId::explore;
    request.temperature = cfg.explore_temperature;
    request.max_output_tokens = cfg.max_output_tokens;
    request.prompt = render_prompt(PromptId::explore, {{"background", background},
                                                       {"chunk", format_chunks(chunks)}});

    QuestionSet out;
    std::set<std::string> seen;
    for (int attempt = 0; attempt < cfg.layer_retries; ++attempt) {
        std::string reply = llm.complete(request);
        bool grew = false;
        for (auto& q : parse_question_lines(reply)) {
            if (static_cast<int>(out.questions.size()) >= breadth) break;
            if (seen.insert(to_lower(q)).second) {
                out.questions.push_back(std::move(q));
                grew = true;
            }
        }
        if (static_cast<int>(out.questions.size()) >= breadth) break;
        if (!grew && llm.profile().supports_deterministic) break;  // same reply every time
    }
    if (out.questions.empty()) {
        throw DegenerateError("exploration layer produced no parseable questions");
    }
    out.flagged_short = static_cast<int>(out.questions.size()) < breadth;
    return out;
}

std::vector<SegmentRef> select_segments(LlmClient& llm, const std::string& question,
                                        const std::vector<Chunk>& chunks,
                                        const std::string& background, const QTreeConfig& cfg,
                                        int* dropped_ungrounded) {
    if (question.empty()) throw std::invalid_argument("select_segments: question must be non-empty");

    CompletionRequest request;
    request.purpose = PromptId::select;
    request.temperature = cfg.layer_temperature;
    request.max_output_tokens = cfg.max_output_tokens;
    request.prompt = render_prompt(PromptId::select, {{"background", background},
                                                      {"question", question},
                                                      {"chunks", format_chunks(chunks)}});

    std::string reply = llm.complete(request);
    std::string payload = extract_json_payload(reply, '[', ']');
    int dropped = 0;
    std::vector<SegmentRef> segments;

    json doc;
    if (!payload.empty()) {
        try {
            doc = json::parse(payload);
        } catch (const json::exception&) {
            doc = json();
        }
    }
    if (doc.is_array()) {
        for (const auto& item : doc) {
            if (!item.is_object() || !item.contains("quote") || !item["quote"].is_string()) {
                ++dropped;
                continue;
            }
            int chunk_id = item.value("chunk", -1);
            std::string quote = item["quote"].get<std::string>();
            if (trim(quote).empty()) {
                ++dropped;
                continue;
            }
            const Chunk* chunk = nullptr;
            for (const auto& c : chunks) {
                if (c.id == chunk_id) {
                    chunk = &c;
                    break;
                }
            }
            if (!chunk) {
                ++dropped;
                continue;
            }
            // Quote-grounding: the excerpt must be a verbatim substring of
            // its claimed chunk.
            std::size_t offset = chunk->text.find(quote);
            if (offset == std::string::npos) {
                ++dropped;
                continue;
            }
            std::size_t newlines_before = static_cast<std::size_t>(
                std::count(chunk->text.begin(),
                           chunk->text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
            std::size_t newlines_inside = static_cast<std::size_t>(
                std::count(quote.begin(), quote.end(), '\n'));

            SegmentRef segment;
            segment.chunk_id = chunk->id;
            segment.first_line = chunk->first_line + static_cast<LineId>(newlines_before);
            segment.last_line = segment.first_line + static_cast<LineId>(newlines_inside);

            // Expand to full line boundaries within the chunk text.
            std::vector<std::string> chunk_lines = split_lines(chunk->text);
            std::string text;
            for (LineId i = segment.first_line; i <= segment.last_line; ++i) {
                std::size_t local = static_cast<std::size_t>(i - chunk->first_line);
                if (local >= chunk_lines.size()) break;
                if (!text.empty()) text.push_back('\n');
                text += chunk_lines[local];
            }
            segment.text = std::move(text);
            segments.push_back(std::move(segment));
        }
    }

    if (dropped_ungrounded) *dropped_ungrounded = dropped;
    if (segments.empty()) {
        throw DegenerateError("segment selection produced no grounded segments for question: " +
                              question);
    }
    return segments;
}

namespace {

std::vector<std::string> segment_lines(const std::vector<SegmentRef>& segments) {
    std::vector<std::string> lines;
    for (const auto& segment : segments) {
        for (auto& line : split_lines(segment.text)) lines.push_back(std::move(line));
    }
    return lines;
}

std::string format_segments(const std::vector<SegmentRef>& segments) {
    std::string out;
    for (const auto& segment : segments) {
        out += "[chunk " + std::to_string(segment.chunk_id) + ", lines " +
               std::to_string(segment.first_line) + "-" + std::to_string(segment.last_line) + "]\n";
        out += segment.text;
        out.push_back('\n');
    }
    return out;
}

bool program_matches(const ParserProgram& program, const std::string& line) {
    for (const auto& rule : program.rules) {
        if (rule.compiled->matches(line)) return true;
    }
    return false;
}

}  // namespace

ParserProgram generate_pattern_fragment(LlmClient& llm, const std::string& question,
                                        const std::vector<SegmentRef>& segments,
                                        const std::string& background, const QTreeConfig& cfg,
                                        int branch_index, VersionCounter* versions) {
    if (segments.empty()) {
        throw std::invalid_argument("generate_pattern_fragment: need at least one segment");
    }

    CompletionRequest request;
    request.purpose = PromptId::pattern;
    request.temperature = cfg.layer_temperature;
    request.max_output_tokens = cfg.max_output_tokens;
    request.prompt = render_prompt(PromptId::pattern, {{"background", background},
                                                       {"question", question},
                                                       {"segments", format_segments(segments)}});

    const std::vector<std::string> lines = segment_lines(segments);

    for (int attempt = 0; attempt < cfg.layer_retries; ++attempt) {
        std::string reply = llm.complete(request);
        std::string payload = extract_json_payload(reply, '{', '}');
        if (payload.empty()) {
            if (llm.profile().supports_deterministic) break;
            continue;
        }
        CompiledDocument doc;
        try {
            doc = compile_program(payload, CompileOptions{.lenient = true});
        } catch (const SchemaError&) {
            if (llm.profile().supports_deterministic) break;
            continue;
        }
        // Self-consistency: a rule earns its place by fully matching at
        // least one selected segment line.
        ParserProgram fragment;
        for (auto& rule : doc.program.rules) {
            bool hits = false;
            for (const auto& line : lines) {
                if (rule.compiled->matches(line)) {
                    hits = true;
                    break;
                }
            }
            if (hits) {
                rule.provenance = Provenance{Provenance::Kind::qtree_branch, branch_index};
                fragment.rules.push_back(std::move(rule));
            }
        }
        if (!fragment.rules.empty()) {
            fragment.version = versions ? versions->next() : 1;
            fragment.lineage.push_back(LineageEntry{"qtree_pattern", {}});
            return fragment;
        }
        if (llm.profile().supports_deterministic) break;
    }
    throw DegenerateError("pattern layer produced no rule matching any segment line for question: " +
                          question);
}

namespace {

// Accepts an LLM merge reply only when it parses and still matches every
// line the inputs matched; otherwise falls back to the deterministic merge.
ParserProgram merge_with_llm(LlmClient& llm, const std::vector<ParserProgram>& parts,
                             const std::vector<std::string>& must_match_lines,
                             const std::string& background, const QTreeConfig& cfg,
                             VersionCounter* versions, TraceSink* trace) {
    std::string documents;
    for (const auto& part : parts) {
        documents += serialize(part);
        documents.push_back('\n');
    }

    CompletionRequest request;
    request.purpose = PromptId::merge;
    request.temperature = cfg.layer_temperature;
    request.max_output_tokens = cfg.max_output_tokens * 2;
    request.prompt = render_prompt(
        PromptId::merge, {{"background", background}, {"documents", documents}});

    ParserProgram merged;
    bool accepted = false;
    try {
        std::string reply = llm.complete(request);
        if (trace) {
            trace->push_back(TraceRecord{-1, "merge", hash_hex(request.prompt), hash_hex(reply)});
        }
        std::string payload = extract_json_payload(reply, '{', '}');
        if (!payload.empty()) {
            CompiledDocument doc = compile_program(payload, CompileOptions{.lenient = true});
            if (!doc.program.rules.empty()) {
                bool covers = true;
                for (const auto& line : must_match_lines) {
                    if (!program_matches(doc.program, line)) {
                        covers = false;
                        break;
                    }
                }
                if (covers) {
                    merged = std::move(doc.program);
                    accepted = true;
                }
            }
        }
    } catch (const BackendError&) {
        // fall through to the deterministic merge
    } catch (const SchemaError&) {
    }

    if (!accepted) merged = merge_programs(parts);
    merged.version = versions ? versions->next() : merged.version;
    return merged;
}

}  // namespace

QTreeRun run_qtree(LlmClient& llm, const std::vector<Chunk>& chunks, const std::string& background,
                   const QTreeConfig& cfg, TraceSink* trace, VersionCounter* versions) {
    if (chunks.empty()) throw std::invalid_argument("run_qtree: need at least one chunk");

    QTreeRun run;
    run.tree.background = background;
    for (const auto& chunk : chunks) run.tree.chunk_ids.push_back(chunk.id);

    QuestionSet questions = generate_questions(llm, chunks, background, cfg.breadth, cfg);
    if (trace) {
        std::string joined;
        for (const auto& q : questions.questions) {
            joined += q;
            joined.push_back('\n');
        }
        trace->push_back(TraceRecord{-1, "explore", hash_hex(format_chunks(chunks)), hash_hex(joined)});
    }

    std::vector<ParserProgram> fragments;
    std::vector<std::string> matched_lines;  // lines any branch fragment matches
    std::vector<std::string> failures;

    struct ObserverGuard {
        LlmClient& llm;
        ~ObserverGuard() { llm.set_observer(nullptr); }
    };

    for (std::size_t b = 0; b < questions.questions.size(); ++b) {
        QBranch branch;
        branch.question = questions.questions[b];
        ObserverGuard guard{llm};
        llm.set_observer([&branch](const CompletionRequest& request, const std::string& reply) {
            branch.raw_llm_outputs.push_back(std::string(prompt_id_name(request.purpose)) + ": " +
                                             reply);
        });
        try {
            branch.segments = select_segments(llm, branch.question, chunks, background, cfg,
                                              &branch.dropped_ungrounded);
            if (trace) {
                trace->push_back(TraceRecord{static_cast<int>(b), "select",
                                             hash_hex(branch.question),
                                             hash_hex(format_segments(branch.segments))});
            }
            branch.fragment = generate_pattern_fragment(llm, branch.question, branch.segments,
                                                        background, cfg, static_cast<int>(b),
                                                        versions);
            if (trace) {
                trace->push_back(TraceRecord{static_cast<int>(b), "pattern",
                                             hash_hex(format_segments(branch.segments)),
                                             hash_hex(serialize(branch.fragment))});
            }
            for (const auto& line : segment_lines(branch.segments)) {
                if (program_matches(branch.fragment, line)) matched_lines.push_back(line);
            }
            fragments.push_back(branch.fragment);
        } catch (const DegenerateError& e) {
            ++run.failed_branches;
            failures.push_back(e.what());
        } catch (const BackendError& e) {
            ++run.failed_branches;
            failures.push_back(e.what());
        }
        run.tree.branches.push_back(std::move(branch));
    }

    if (fragments.empty()) {
        std::string detail;
        for (const auto& f : failures) detail += "; " + f;
        throw DegenerateError("all question branches failed" + detail);
    }

    // Pack fragments into token-limited groups, merge within groups, then
    // fold the group results pairwise.
    std::vector<std::string> docs;
    docs.reserve(fragments.size());
    for (const auto& fragment : fragments) docs.push_back(serialize(fragment));
    std::vector<TokenGroup> groups = group_by_token_limit(docs, cfg.token_limit);

    std::vector<ParserProgram> group_results;
    for (const auto& group : groups) {
        if (group.indices.size() == 1) {
            group_results.push_back(fragments[group.indices.front()]);
            continue;
        }
        std::vector<ParserProgram> parts;
        for (std::size_t idx : group.indices) parts.push_back(fragments[idx]);
        group_results.push_back(
            merge_with_llm(llm, parts, matched_lines, background, cfg, versions, trace));
    }

    ParserProgram merged = group_results.front();
    for (std::size_t g = 1; g < group_results.size(); ++g) {
        merged = merge_with_llm(llm, {merged, group_results[g]}, matched_lines, background, cfg,
                                versions, trace);
    }

    // Post-merge integrity: every segment line a branch matched must still
    // match. The deterministic merge keeps every rule, so it always passes.
    bool intact = true;
    for (const auto& line : matched_lines) {
        if (!program_matches(merged, line)) {
            intact = false;
            break;
        }
    }
    if (!intact) {
        merged = merge_programs(fragments);
        merged.version = versions ? versions->next() : merged.version;
    }

    merged = finalize_program(std::move(merged));
    run.program = std::move(merged);
    if (trace) {
        trace->push_back(
            TraceRecord{-1, "fold", hash_hex(std::to_string(group_results.size()) + " groups"),
                        hash_hex(serialize(run.program))});
    }
    return run;
}

std::string trace_to_jsonl(const TraceSink& trace) {
    std::string out;
    for (const auto& record : trace) {
        json doc;
        doc["branch"] = record.branch;
        doc["layer"] = record.layer;
        doc["input_hash"] = record.input_hash;
        doc["output_hash"] = record.output_hash;
        out += doc.dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace schemacoder
